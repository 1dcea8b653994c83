"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 rank violation, 3 non-convergence.
Relative output paths are placed under $AFREE_OUTPUT_DIR when it is set.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cells import alpha0_cell, counterexample_gap, fhom_limit, qa_envelope
from .highcontrast import HighContrastProblem, SweepRow, gamma_sweep
from .integrands import Integrand
from .io import (RunManifest, append_csv, load_config, load_operator, microstructure_from_dict, output_path,
                 read_field, soft_family_from_dict, write_field)
from .operators import verify_constant_rank
from .projection import KEEP_MEAN, ZERO_MEAN, ProjectionPlan, recover_potential, residual_A
from .solvers import SolveOptions

log = logging.getLogger("afree_homog")

EXIT_OK, EXIT_USAGE, EXIT_RANK, EXIT_NONCONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, default=float))


def _manifest_path(target: Path, command: str) -> Path:
    return target.with_name(target.name + ".manifest.json") if target.suffix else target / f"{command}.manifest.json"


def _finish(manifest: RunManifest, outputs: list[Path], t0: float, anchor: Path) -> None:
    for p in outputs:
        manifest.add_output(p)
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(_manifest_path(anchor, manifest.command))


def _parse_xi_list(cfg: dict) -> list[np.ndarray]:
    if "xi_list" in cfg:
        return [np.atleast_1d(np.asarray(x, float)) for x in cfg["xi_list"]]
    if "xi" in cfg:
        return [np.atleast_1d(np.asarray(cfg["xi"], float))]
    raise UsageError("config needs 'xi' or 'xi_list'")


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # results in input order


# ------------------------------------------------------------------ commands

def cmd_rank(args) -> int:
    op = load_operator(args.spec)
    cert = verify_constant_rank(op, args.samples, args.tol, args.seed)
    _emit(cert.to_dict())
    return EXIT_OK if cert.ok else EXIT_RANK


def cmd_project(args) -> int:
    t0 = time.perf_counter()
    op = load_operator(args.op)
    u = read_field(args.infile)
    if u.dim != op.dim or u.n_comp != op.in_dim:
        raise UsageError(f"field (d={u.dim}, N={u.n_comp}) does not match {op!r}")
    plan = ProjectionPlan.build(op, u.n, args.mode)
    out = plan(u)
    ref = u.norm()
    before, after = residual_A(op, u), residual_A(op, out, reference=ref)
    target = output_path(args.outfile)
    write_field(target, out)
    _emit({"residual_before": before, "residual_after": after, "mode": args.mode})
    manifest = RunManifest("project", {"op": args.op, "in": str(args.infile), "mode": args.mode}, 0, __version__)
    _finish(manifest, [target], t0, target)
    return EXIT_OK


def cmd_potential(args) -> int:
    t0 = time.perf_counter()
    op_b = load_operator(args.op_b)
    op_a = load_operator(args.op_a) if args.op_a else None
    u = read_field(args.infile)
    w = recover_potential(op_b, u, args.tol, op_a=op_a)
    target = output_path(args.outfile)
    write_field(target, w)
    manifest = RunManifest("potential", {"op_b": args.op_b, "op_a": args.op_a, "in": str(args.infile)}, 0,
                           __version__)
    _finish(manifest, [target], t0, target)
    return EXIT_OK


def _solver_setup(cfg: dict):
    if "operator" not in cfg and "op" not in cfg:
        raise UsageError("config needs 'operator'")
    op = load_operator(cfg.get("operator", cfg.get("op")))
    opts = SolveOptions.from_dict(cfg.get("opts"))
    return op, opts


def _write_rows(cfg: dict, command: str, header, rows, t0, extra_cfg=None) -> Path:
    target = output_path(cfg.get("output_csv", f"{command}.csv"))
    append_csv(target, header, rows)
    manifest = RunManifest(command, {**cfg, **(extra_cfg or {})}, int(cfg.get("opts", {}).get("seed", 0)),
                           __version__)
    _finish(manifest, [target], t0, target)
    return target


def cmd_envelope(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    opts = SolveOptions.from_dict(cfg.get("opts"))
    op = None if cfg.get("operator") in (None, "none") else load_operator(cfg["operator"])
    f = Integrand.from_dict(cfg["integrand"])
    n = int(cfg["n"])
    dim = int(cfg.get("dim", op.dim if op else 1))
    xis = _parse_xi_list(cfg)
    reports = _map(lambda xi: qa_envelope(op, f, xi, n, opts, dim=dim), xis, args.threads)
    header = [f"xi{j}" for j in range(f.n_comp)] + ["n", "value", "iters", "residual_A", "residual_mean",
                                                    "converged"]
    rows = [list(xi) + [n, r.value, r.iterations, r.residual_A, r.residual_mean, r.converged]
            for xi, r in zip(xis, reports)]
    _write_rows(cfg, "envelope", header, rows, t0)
    for xi, r in zip(xis, reports):
        _emit({"xi": list(xi), **r.summary()})
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NONCONVERGED


def cmd_fhom(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    op, opts = _solver_setup(cfg)
    f1 = Integrand.from_dict(cfg["integrand"])
    ms = microstructure_from_dict(cfg["microstructure"])
    k_list = cfg.get("k_list", [cfg.get("k", 1)])
    n_cell = int(cfg["n"])
    xis = _parse_xi_list(cfg)
    tables = _map(lambda xi: fhom_limit(op, f1, ms, xi, k_list, n_cell, opts), xis, args.threads)
    header = [f"xi{j}" for j in range(f1.n_comp)] + ["k", "n", "value", "iters", "residual_A", "converged"]
    rows = [list(xi) + [row["k"], row["n"], row["value"], row["iters"], row["residual_A"], row["converged"]]
            for xi, tab in zip(xis, tables) for row in tab.rows()]
    _write_rows(cfg, "fhom", header, rows, t0)
    for xi, tab in zip(xis, tables):
        _emit({"xi": list(xi), "values": tab.values, "liminf_estimate": tab.liminf_estimate,
               "stabilization_gap": tab.stabilization_gap, "converged": tab.converged})
    return EXIT_OK if all(t.converged for t in tables) else EXIT_NONCONVERGED


def cmd_alpha0(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    op, opts = _solver_setup(cfg)
    f0 = soft_family_from_dict(cfg["integrand"]).base
    ms = microstructure_from_dict(cfg["microstructure"])
    n = int(cfg["n"])
    rep = alpha0_cell(op, f0, ms, n, opts)
    header = ["n", "value", "iters", "residual_A", "residual_support", "residual_mean", "converged"]
    _write_rows(cfg, "alpha0", header, [[n, rep.value, rep.iterations, rep.residual_A, rep.residual_support,
                                         rep.residual_mean, rep.converged]], t0)
    _emit(rep.summary())
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    op, opts = _solver_setup(cfg)
    m_list = cfg.get("m_list") or []
    if not m_list:
        raise UsageError("m_list is empty")
    prob = HighContrastProblem(op, soft_family_from_dict(cfg["f0"]), Integrand.from_dict(cfg["f1"]),
                               microstructure_from_dict(cfg["microstructure"]), int(m_list[0]), int(cfg["s"]),
                               opts)
    if "xi_grid" not in cfg:
        raise UsageError("config needs 'xi_grid'")
    report = gamma_sweep(prob, m_list, cfg["xi_grid"], cfg.get("k_list", [1]))
    target = output_path(cfg.get("output_csv", "sweep.csv"))
    if target.exists():
        target.unlink()  # one report per file
    append_csv(target, SweepRow.CSV_COLUMNS, [r.csv_row() for r in report.rows])
    manifest = RunManifest("sweep", cfg, opts.seed, __version__)
    _finish(manifest, [target], t0, target)
    _emit({"header": report.limit.label, "predicted": report.predicted, "xi_star": report.limit.xi_star.tolist(),
           "alpha0": report.limit.alpha0, "gaps": report.gaps, "monotone": report.monotone,
           "final_relative_gap": report.final_relative_gap, "richardson": report.richardson})
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_counterexample(args) -> int:
    t0 = time.perf_counter()
    try:
        eps = [float(x) for x in args.eps_list.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --eps-list: {exc}") from exc
    if not eps:
        raise UsageError("--eps-list is empty")
    table = counterexample_gap(eps)
    for row in table.rows():
        _emit(row)
    if args.out:
        target = output_path(args.out)
        if target.exists():
            target.unlink()
        append_csv(target, ["epsilon", "value", "closed_form", "reference_QAf0"],
                   [[r["epsilon"], r["value"], r["closed_form"], r["reference_QAf0"]] for r in table.rows()])
        _finish(RunManifest("counterexample", {"eps_list": eps}, 0, __version__), [target], t0, target)
    return EXIT_OK


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afree-homog", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=1, help="worker cap for independent solves")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("rank", help="sampled constant-rank certificate")
    s.add_argument("spec", help="catalog name (e.g. curl, div:3) or operator JSON file")
    s.add_argument("--samples", type=int, default=256)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("project", help="project a field onto A-free fields")
    s.add_argument("--op", required=True)
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", dest="outfile", required=True)
    s.add_argument("--mode", choices=(ZERO_MEAN, KEEP_MEAN), default=ZERO_MEAN)
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("potential", help="recover w with B w = u")
    s.add_argument("--op-b", required=True)
    s.add_argument("--op-a", default=None, help="check the pair and that u is A-free")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", dest="outfile", required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_potential)

    for name, fn, helptext in (("envelope", cmd_envelope, "A-quasiconvex envelope"),
                               ("fhom", cmd_fhom, "perforated cell problem table"),
                               ("alpha0", cmd_alpha0, "soft-inclusion constant"),
                               ("sweep", cmd_sweep, "Gamma-sweep over eps = 1/m")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", help="JSON config document")
        s.set_defaults(func=fn)

    s = sub.add_parser("counterexample", help="checkerboard evaluation of -det")
    s.add_argument("--eps-list", default="0.5,0.25,0.125")
    s.add_argument("--out", default=None, help="CSV output")
    s.set_defaults(func=cmd_counterexample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, OSError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
