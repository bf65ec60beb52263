"""Batch front end: solve, check feasibility, verify, refine, run oracles.

Exit codes: 0 on success, 2 when the compatibility value alpha fails the
feasibility test (the report is printed and the optimizer never runs),
1 on configuration or solver failures.

All output files are written once, at the end of a successful run: a
``summary.csv`` table (one row per state or grid), per-state field dumps
``u_<i>.csv`` / ``phi_<i>.csv`` plus the shared ``chi.csv``, and a
``report.json`` with the full residual and multiplier set.  Identical
config and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import RunConfig, load_config
from .errors import SbpError
from .grid import read_field, write_field
from .manifold import feasible_init
from .optimize import SolveResult, excited_states, minimize_on_M, polish_positive
from .problem import Problem, classify_alpha
from .reduction import phi_map
from .verify import (
    ResidualReport,
    dense_oracle_compare,
    reconstruct_phi,
    refinement_study,
    residual_original_system,
    write_summary,
)

__all__ = ["main"]

_DEGENERATE_LEVEL_FRACTION = 0.01


def _say(quiet: bool, *parts) -> None:
    if not quiet:
        print(*parts)


def _gate_feasibility(problem: Problem, quiet: bool) -> int | None:
    """Print the feasibility report; return exit code 2 when the manifold is
    empty (infeasible alpha, or a degenerate edge touching a fat level set,
    which covers constant coupling)."""
    report = classify_alpha(problem)
    refuse = report.classification == "infeasible" or (
        report.classification == "boundary_degenerate"
        and report.level_set_fraction >= _DEGENERATE_LEVEL_FRACTION
    )
    if refuse:
        print(report.describe())
        print("alpha is not strictly inside the coupling range on a "
              "non-degenerate level set; no state can satisfy both "
              "constraints, refusing to optimize")
        return 2
    if report.classification == "boundary_degenerate":
        _say(quiet, f"warning: {report.describe()}; the constraint manifold "
                    "may be empty, attempting anyway")
    else:
        _say(quiet, report.describe())
    return None


def _state_entry(problem: Problem, index: int, res: SolveResult,
                 rep: ResidualReport) -> dict:
    alpha = problem.alpha
    fully_converged = bool(
        res.converged
        and rep.norm_res <= 1e-10
        and rep.compat_res <= 1e-8 * (1.0 + abs(alpha))
    )
    return {
        "index": index,
        "J": rep.j,
        "omega": rep.omega,
        "mu": rep.mu,
        "iterations": res.iterations,
        "converged": fully_converged,
        "optimizer_converged": res.converged,
        "stop_reason": res.stop_reason,
        "grad_norm": res.grad_norm,
        "eq1_res": rep.eq1_res,
        "eq1_res_native": rep.eq1_res_native,
        "eq2_res": rep.eq2_res,
        "bc_res": rep.bc_res,
        "bc_res_second": rep.bc_res_second,
        "norm_res": rep.norm_res,
        "compat_res": rep.compat_res,
        "dirichlet_energy": res.breakdown.dirichlet,
        "min_u": float(res.u.min()),
    }


def _write_report(out: Path, cfg: RunConfig, problem: Problem,
                  entries: list[dict], extra: dict | None = None) -> None:
    report = classify_alpha(problem)
    payload = {
        "alpha": problem.alpha,
        "feasibility": {
            "classification": report.classification,
            "q_min": report.q_min,
            "q_max": report.q_max,
            "level_set_fraction": report.level_set_fraction,
        },
        "config": {k: _jsonable(v) for k, v in sorted(cfg.values.items())},
        "coupling_params": {k: _jsonable(v) for k, v in sorted(cfg.coupling_params.items())},
        "mode": cfg.mode,
        "states": entries,
    }
    if extra:
        payload.update(extra)
    with open(out / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def _dump_state_fields(out: Path, problem: Problem, index: int,
                       res: SolveResult) -> None:
    write_field(out / f"u_{index}.csv", problem.grid, res.u)
    phi_full = reconstruct_phi(problem, res.pair, res.mu)
    write_field(out / f"phi_{index}.csv", problem.grid, phi_full)


def cmd_solve(cfg: RunConfig, out: Path, seed: int | None, quiet: bool) -> int:
    t0 = time.perf_counter()
    problem = cfg.build_problem()
    code = _gate_feasibility(problem, quiet)
    if code is not None:
        return code
    opts = cfg.optimizer_options(seed=seed)
    mode = cfg.mode
    if mode not in ("ground", "excited"):
        mode = "ground"
    if mode == "ground":
        _say(quiet, "minimizing from the two-bump feasible start")
        res = minimize_on_M(problem, feasible_init(problem), opts)
        res = polish_positive(problem, res, opts)
        states = [res]
    else:
        k = cfg.get("run.k")
        if k < 1:
            raise SbpError(f"run.k must be >= 1, got {k}")
        _say(quiet, f"multi-start search for {k} families of states")
        states = excited_states(problem, k, opts)
        if not states:
            print("no start converged; nothing to report", file=sys.stderr)
            return 1

    out.mkdir(parents=True, exist_ok=True)
    reports = []
    entries = []
    for i, res in enumerate(states):
        rep = residual_original_system(
            problem, res.u, res.pair, res.omega, res.mu,
            j=res.j, iterations=res.iterations)
        reports.append(rep)
        entries.append(_state_entry(problem, i, res, rep))
        if cfg.get("output.dump_fields"):
            _dump_state_fields(out, problem, i, res)
        _say(quiet,
             f"state {i}: J={rep.j:.10g} omega={rep.omega:.10g} "
             f"mu={rep.mu:.6g} grad={res.grad_norm:.2e} "
             f"iters={res.iterations} converged={res.converged}")
    write_summary(out / "summary.csv", reports)
    if cfg.get("output.dump_fields"):
        write_field(out / "chi.csv", problem.grid, problem.chi)
    _write_report(out, cfg, problem, entries)
    _say(quiet, f"wrote {out}/summary.csv ({len(states)} states, "
                f"{time.perf_counter() - t0:.1f}s)")
    return 0


def cmd_feasibility(cfg: RunConfig, quiet: bool) -> int:
    problem = cfg.build_problem()
    report = classify_alpha(problem)
    print(report.describe())
    return 0 if report.classification == "interior" else 2


def cmd_verify(cfg: RunConfig, out: Path, quiet: bool) -> int:
    report_path = out / "report.json"
    if not report_path.exists():
        print(f"no report.json under {out}; run solve first", file=sys.stderr)
        return 1
    with open(report_path) as fh:
        prior = json.load(fh)
    problem = cfg.build_problem()
    reports = []
    for entry in prior["states"]:
        i = entry["index"]
        grid_read, u = read_field(out / f"u_{i}.csv")
        if grid_read != problem.grid:
            print(f"u_{i}.csv grid does not match the config grid", file=sys.stderr)
            return 1
        pair = phi_map(problem, u)
        rep = residual_original_system(
            problem, u, pair, entry["omega"], entry["mu"],
            iterations=entry.get("iterations", 0))
        reports.append(rep)
        _say(quiet,
             f"state {i}: eq1={rep.eq1_res:.3e} eq2={rep.eq2_res:.3e} "
             f"bc={rep.bc_res:.3e} norm={rep.norm_res:.3e} "
             f"compat={rep.compat_res:.3e}")
    write_summary(out / "residuals.csv", reports)
    _say(quiet, f"wrote {out}/residuals.csv")
    return 0


def cmd_refine(cfg: RunConfig, out: Path, seed: int | None, quiet: bool) -> int:
    problem = cfg.build_problem()
    code = _gate_feasibility(problem, quiet)
    if code is not None:
        return code
    opts = cfg.optimizer_options(seed=seed)
    grids = cfg.get("run.grids")
    _say(quiet, f"refinement over node counts {list(grids)}")
    study = refinement_study(cfg.build_problem, grids, opts)
    out.mkdir(parents=True, exist_ok=True)
    write_summary(out / "summary.csv", study.reports)
    entries = []
    for i, (res, rep) in enumerate(zip(study.results, study.reports)):
        entries.append({
            "index": i,
            "n": list(rep.n),
            "J": rep.j,
            "omega": rep.omega,
            "mu": rep.mu,
            "eq1_res": rep.eq1_res,
            "eq2_res": rep.eq2_res,
            "bc_res": rep.bc_res,
            "norm_res": rep.norm_res,
            "compat_res": rep.compat_res,
            "converged": res.converged,
        })
    extra = {
        "j_values": list(study.j_values),
        "j_diffs": list(study.j_diffs),
        "j_orders": list(study.j_orders),
        "eq1_orders": list(study.eq1_orders),
        "bc_orders": list(study.bc_orders),
    }
    _write_report(out, cfg, problem, entries, extra=extra)
    _say(quiet, f"observed eq1 orders: {['%.2f' % o for o in study.eq1_orders]}")
    _say(quiet, f"observed J orders:   {['%.2f' % o for o in study.j_orders]}")
    _say(quiet, f"wrote {out}/summary.csv")
    return 0


def cmd_oracle(cfg: RunConfig, quiet: bool) -> int:
    problem = cfg.build_problem()
    rep = dense_oracle_compare(problem, seed=cfg.get("run.seed"))
    lines = [
        ("helmholtz", rep.helmholtz),
        ("poisson_neumann", rep.poisson_neumann),
        ("poisson_dirichlet", rep.poisson_dirichlet),
        ("split_phi", rep.split_phi),
        ("split_psi", rep.split_psi),
        ("state_potential", rep.state_potential),
        ("nullspace_sigma", rep.nullspace_sigma),
        ("nullspace_gap", rep.nullspace_gap),
    ]
    for name, val in lines:
        _say(quiet, f"{name:18s} {val:.3e}")
    ok = rep.max_discrepancy() <= 1e-9 and rep.nullspace_sigma <= 1e-12
    print("oracle agreement OK" if ok else "ORACLE MISMATCH")
    return 0 if ok else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbpbox",
        description=__doc__.splitlines()[0],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_out in (("solve", True), ("feasibility", False),
                            ("verify", True), ("refine", True),
                            ("oracle", False)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to key=value config")
        sp.add_argument("--out", default=None, help="output directory (default: output.dir)")
        sp.add_argument("--seed", type=int, default=None, help="override run.seed")
        sp.add_argument("--quiet", action="store_true", help="suppress progress lines")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else Path(cfg.get("output.dir"))
        if args.command == "solve":
            return cmd_solve(cfg, out, args.seed, args.quiet)
        if args.command == "feasibility":
            return cmd_feasibility(cfg, args.quiet)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.quiet)
        if args.command == "refine":
            return cmd_refine(cfg, out, args.seed, args.quiet)
        if args.command == "oracle":
            return cmd_oracle(cfg, args.quiet)
        raise AssertionError(args.command)
    except SbpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
