"""Command-line entry point: sample fields, measure nodal lines, tabulate analytics, run campaigns.

Every subcommand echoes its numeric output as CSV on stdout; ``--out`` also
writes it to a file with a ``<out>.meta.json`` provenance sidecar.
Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .analytics import cov_length_trispectrum, cross_corr_profile, var_proj4_exact, var_trispectrum_exact
from .errors import DomainError
from .experiments import ExperimentConfig, grid_sizes, run_campaign, write_report, write_samples_csv
from .field import sample_coefficients, synthesize, write_field_csv
from .functionals import functional_sample
from .geometry import nodal_length_contour, nodal_length_epsilon
from .specfun import DegreeParams, quadrature_grid

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _ells(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one degree")
    return values


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--out", type=Path, help="also write the CSV here, with a .meta.json sidecar")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker threads (default 1)")
    common.add_argument("--dry-run", action="store_true", help="validate and print the planned grids only")
    common.add_argument("--grid-mult", type=float, default=1.0, help="grid resolution multiplier (>= 1)")

    parser = argparse.ArgumentParser(prog="nodalab", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"nodalab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text, allow_abbrev=False)

    p = add("sample", "draw coefficients; --out writes the synthesized field grid")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--replicate", type=int, default=0)

    p = add("nodal", "nodal (or level) length of one replicate")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--level", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, help="also report the epsilon-band estimate")

    p = add("trispectrum", "h4, M and the fourth-chaos projection for replicates 0..R-1")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--replicates", type=_positive_int, default=1)

    p = add("cross-corr", "exact and asymptotic cross-correlation profile")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--psi-min", type=float, default=10.0)
    p.add_argument("--psi-max", type=float)
    p.add_argument("--steps", type=_positive_int, default=200)
    p.add_argument("--form", choices=("stated", "sine"), default="stated")

    p = add("variance-scan", "exact Var(M), Cov(L, M) and Var(proj4) across degrees")
    p.add_argument("--ells", type=_ells, required=True)

    p = add("clt", "Wasserstein distance and fourth cumulants of M (no length measurement)")
    p.add_argument("--ells", type=_ells, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--replicates", type=_positive_int, default=1000)

    p = add("campaign", "full Monte Carlo campaign from a JSON config or flags")
    p.add_argument("--config", type=Path)
    p.add_argument("--ells", type=_ells)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--replicates", type=_positive_int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--samples", type=Path, help="per-replicate CSV output")
    return parser


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _args_echo(args: argparse.Namespace) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("out", "threads", "samples"):
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def _emit(text: str, args: argparse.Namespace, extra_meta: dict | None = None) -> None:
    sys.stdout.write(text)
    if args.out is not None:
        args.out.write_text(text)
        meta = {"command": args.command, "args": _args_echo(args), "version": __version__}
        if "seed" in meta["args"]:
            meta["seed"] = meta["args"]["seed"]
        if extra_meta:
            meta.update(extra_meta)
        path = args.out.with_name(args.out.name + ".meta.json")
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _plan(ells: Sequence[int], mult: float, contour: bool) -> str:
    rows = []
    for ell in ells:
        DegreeParams(ell)
        rows.append((ell, *grid_sizes(ell, mult, contour)))
    return _csv_text(["ell", "n_theta", "n_phi"], rows)


def _cmd_sample(args) -> None:
    params = DegreeParams(args.ell)
    n_theta, n_phi = grid_sizes(args.ell, args.grid_mult)
    if args.dry_run:
        sys.stdout.write(_plan([args.ell], args.grid_mult, True))
        return
    coeffs = sample_coefficients(params, args.seed, args.replicate)
    text = _csv_text(["m", "a"], zip(range(-args.ell, args.ell + 1), (float(a) for a in coeffs.a)))
    sys.stdout.write(text)
    if args.out is not None:
        write_field_csv(synthesize(coeffs, quadrature_grid(n_theta, n_phi)), args.out)
        meta = {"command": "sample", "args": _args_echo(args), "seed": args.seed, "version": __version__}
        args.out.with_name(args.out.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _cmd_nodal(args) -> None:
    params = DegreeParams(args.ell)
    if args.epsilon is not None and not args.epsilon > 0:
        raise DomainError("--epsilon must be positive")
    if args.dry_run:
        sys.stdout.write(_plan([args.ell], args.grid_mult, True))
        return
    grid = quadrature_grid(*grid_sizes(args.ell, args.grid_mult))
    fg = synthesize(sample_coefficients(params, args.seed, args.replicate), grid)
    header = ["ell", "seed", "replicate", "method", "level", "epsilon", "n_theta", "n_phi", "length"]
    est = nodal_length_contour(fg, level=args.level)
    rows = [(args.ell, args.seed, args.replicate, est.method, args.level, "", grid.n_theta, grid.n_phi, est.length)]
    if args.epsilon is not None:
        if args.level != 0.0:
            raise DomainError("the epsilon-band estimate measures the zero level only")
        band = nodal_length_epsilon(fg, args.epsilon)
        rows.append((args.ell, args.seed, args.replicate, band.method, 0.0, args.epsilon,
                     grid.n_theta, grid.n_phi, band.length))
    _emit(_csv_text(header, rows), args)


def _cmd_trispectrum(args) -> None:
    params = DegreeParams(args.ell)
    if params.ell < 1:
        raise DomainError("trispectrum needs ell >= 1")
    if args.dry_run:
        sys.stdout.write(_plan([args.ell], args.grid_mult, False))
        return
    grid = quadrature_grid(*grid_sizes(args.ell, args.grid_mult, contour=False))
    rows = []
    for k in range(args.replicates):
        fg = synthesize(sample_coefficients(params, args.seed, k), grid)
        s = functional_sample(fg, math.nan, args.seed, k)
        rows.append((args.ell, k, s.h4, s.m, s.proj4))
    _emit(_csv_text(["ell", "replicate", "h4", "m", "proj4"], rows), args)


def _cmd_cross_corr(args) -> None:
    params = DegreeParams(args.ell)
    psi_max = args.psi_max if args.psi_max is not None else params.big_l * math.pi / 2
    if args.steps < 2:
        raise DomainError("--steps must be at least 2")
    if not 0 < args.psi_min < psi_max < params.big_l * math.pi:
        raise DomainError(f"need 0 < psi-min < psi-max < L pi = {params.big_l * math.pi:.6g}")
    if args.dry_run:
        sys.stdout.write(_csv_text(["ell", "psi_min", "psi_max", "steps"],
                                   [(args.ell, args.psi_min, psi_max, args.steps)]))
        return
    prof = cross_corr_profile(params, args.psi_min, psi_max, args.steps, form=args.form)
    rows = zip(*(map(float, a) for a in (prof.psi, prof.j_exact, prof.j_asym, prof.envelope)))
    _emit(_csv_text(["psi", "j_exact", "j_asym", "envelope"], rows), args)


def _cmd_variance_scan(args) -> None:
    for ell in args.ells:
        if ell < 2:
            raise DomainError("variance-scan needs every ell >= 2")
    if args.dry_run:
        sys.stdout.write(_csv_text(["ell"], [(e,) for e in args.ells]))
        return
    rows = []
    for ell in args.ells:
        p = DegreeParams(ell)
        rows.append((ell, var_trispectrum_exact(p), cov_length_trispectrum(p), var_proj4_exact(p)))
    _emit(_csv_text(["ell", "var_M", "cov_LM", "var_proj4"], rows), args)


_CLT_COLUMNS = ["ell", "replicates", "var_M", "var_M_se", "var_M_analytic", "d_wasserstein",
                "d_wasserstein_floor", "cum4_M", "cum4_M_se", "cum4_h4", "cum4_h4_se", "stein_bound"]


def _cmd_clt(args) -> None:
    config = ExperimentConfig(ells=args.ells, replicates=args.replicates, master_seed=args.seed,
                              grid_mult=args.grid_mult, measure_length=False)
    if args.dry_run:
        sys.stdout.write(_plan(config.ells, config.grid_mult, False))
        return
    report = run_campaign(config, workers=args.threads)
    rows = [[getattr(r, c) for c in _CLT_COLUMNS] for r in report.rows]
    _emit(_csv_text(_CLT_COLUMNS, rows), args, {"config": config.to_dict()})


def _cmd_campaign(args) -> None:
    if args.config is not None:
        data = json.loads(args.config.read_text())
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object")
    else:
        data = {}
    for key, value in (("ells", args.ells), ("master_seed", args.seed),
                       ("replicates", args.replicates), ("epsilon", args.epsilon)):
        if value is not None:
            data[key] = value
    if args.grid_mult != 1.0:
        data["grid_mult"] = args.grid_mult
    if args.config is None and not {"ells", "replicates", "master_seed"} <= set(data):
        raise UsageError("campaign needs --config or all of --ells, --replicates and --seed")
    config = ExperimentConfig.from_dict(data)
    if args.dry_run:
        sys.stdout.write(_plan(config.ells, config.grid_mult, config.measure_length))
        return
    report = run_campaign(config, workers=args.threads)
    out = args.out or (Path(config.outputs["report"]) if "report" in config.outputs else None)
    if out is not None:
        write_report(report, out)
        sys.stdout.write(out.read_text())
    else:
        names = list(report.rows[0].__dataclass_fields__)
        sys.stdout.write(_csv_text(names, [[getattr(r, n) for n in names] for r in report.rows]))
    samples = args.samples or (Path(config.outputs["samples"]) if "samples" in config.outputs else None)
    if samples is not None:
        write_samples_csv(report, samples)


_COMMANDS = {
    "sample": _cmd_sample,
    "nodal": _cmd_nodal,
    "trispectrum": _cmd_trispectrum,
    "cross-corr": _cmd_cross_corr,
    "variance-scan": _cmd_variance_scan,
    "clt": _cmd_clt,
    "campaign": _cmd_campaign,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.grid_mult < 1.0:
        parser.print_usage(sys.stderr)
        sys.stderr.write("nodalab: error: --grid-mult expects a value >= 1\n")
        return EXIT_USAGE
    try:
        _COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"nodalab: error: {exc}\n")
        return EXIT_USAGE
    except (DomainError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"nodalab: {exc}\n")
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
