"""``rsplan`` command line.

Exit codes: 0 success, 2 configuration error, 3 guarantee loop exhausted,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..certify import CertifyError, GuaranteeMode, Margin, certify, estimate_violation, min_k_for
from ..grid import CaseError
from ..rsp import RspError, StoragePlan, ccg_solve, find_essential
from ..scenarios import ScenarioError, sample_iid, save_profiles, synthetic_history
from ..solver import SolverFailure
from .config import ConfigError, RunConfig, derive_seed, load_config
from .pipeline import GuaranteeLoopExhausted, run_experiments, run_with_guarantee, sweep_budget
from .reports import CERTIFY_COLUMNS, atomic_write, certify_rows, csv_text, emit_experiments, emit_sweep, to_json

EXIT_OK, EXIT_CONFIG, EXIT_EXHAUSTED, EXIT_SOLVER = 0, 2, 3, 4

log = logging.getLogger("rsplan")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--case", help="case file or shipped case name (case3, case6)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--kind", help="c-cost, c-curtailment, nc-cost or nc-curtailment")
    p.add_argument("--budget", type=float, help="investment budget override ($/yr)")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rsplan", description="Robust storage planning with risk certificates")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic daily profile history")
    _common(g)
    g.add_argument("--days", type=int, default=30)

    p = sub.add_parser("plan", help="solve one robust plan on K sampled scenarios")
    _common(p)
    p.add_argument("-K", type=int, required=True)

    c = sub.add_parser("certify", help="risk levels or sample sizes as a CSV table")
    c.add_argument("--mode", required=True, choices=[m.value for m in GuaranteeMode])
    c.add_argument("-k", type=int, nargs="+", required=True, help="invariant-set sizes (or dimension d)")
    c.add_argument("--beta", type=float, default=1e-3)
    c.add_argument("-K", type=int, help="sample size; omit to compute the smallest K for --eps-bar")
    c.add_argument("--eps-bar", type=float, help="target risk level when -K is omitted")
    c.add_argument("--s-bar", type=int)
    c.add_argument("--out", help="write certify.csv here as well")

    r = sub.add_parser("run", help="guarantee loop for one experiment")
    _common(r)

    e = sub.add_parser("experiments", help="repeated guarantee runs and reports")
    _common(e)
    e.add_argument("--experiments", type=int)

    s = sub.add_parser("sweep-budget", help="worst-case curtailment over a budget grid")
    _common(s)
    s.add_argument("--grid", type=float, nargs="+", help="increasing budgets")

    v = sub.add_parser("eval", help="out-of-sample check of a saved plan")
    _common(v)
    v.add_argument("--plan", required=True, help="plan JSON (as written by plan/run)")
    v.add_argument("--gamma", type=float, help="threshold; defaults to the gamma stored with the plan")
    v.add_argument("--test-size", type=int)
    return ap


def _config(args) -> RunConfig:
    over = {"seed": args.seed, "out": args.out, "kind": args.kind, "case": args.case, "budget": args.budget}
    if getattr(args, "experiments", None) is not None:
        over["experiments"] = args.experiments
    if getattr(args, "grid", None):
        over["budget_grid"] = tuple(args.grid)
    if getattr(args, "test_size", None) is not None:
        over["test_size"] = args.test_size
    try:
        return load_config(args.config, **over)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _cmd_gen(args) -> int:
    cfg = _config(args)
    case = cfg.load_case()
    sset, desc = synthetic_history(case, args.days, cfg.seed, cfg.scenarios.sigma_rel)
    desc = dict(desc, case=case.name)
    path = Path(cfg.out) / "profiles.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_profiles(sset, path, desc)
    print(path)
    return EXIT_OK


def _cmd_plan(args) -> int:
    cfg = _config(args)
    case = cfg.load_case()
    train = sample_iid(cfg.scenario_source(case), args.K, derive_seed(cfg.seed, 0, 0))
    sol = ccg_solve(case, train, cfg.formulation, gap_tol=cfg.gap_tol, max_iter=cfg.max_iter)
    ess = find_essential(case, train, cfg.formulation, sol.critical_set, sol.objective)
    doc = {"config": cfg.to_dict(), "solution": sol.to_dict(), "essential": list(ess.indices),
           "investment": sol.plan.investment_cost(case)}
    atomic_write(Path(cfg.out) / "plan.json", to_json(doc))
    print(to_json({"objective": sol.objective, "gamma": sol.gamma, "essential": len(ess.indices),
                   "converged": sol.converged}), end="")
    return EXIT_OK


def _cmd_certify(args) -> int:
    if args.K is None and args.eps_bar is None:
        raise ConfigError("give -K or --eps-bar")
    certs = []
    for k in args.k:
        K = args.K if args.K is not None else min_k_for(args.mode, k, args.eps_bar, args.beta, args.s_bar)
        certs.append(certify(args.mode, k, args.beta, K, args.s_bar))
    text = csv_text(CERTIFY_COLUMNS, certify_rows(certs))
    if args.out:
        atomic_write(Path(args.out) / "certify.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _config(args)
    run = run_with_guarantee(cfg)
    case = cfg.load_case()
    doc = {"config": cfg.to_dict(), "solution": run.solution.to_dict(), "essential": list(run.essential.indices),
           "certificate": run.certificate.to_dict(), "K": run.K, "history": run.history,
           "investment": run.solution.plan.investment_cost(case)}
    atomic_write(Path(cfg.out) / "run.json", to_json(doc))
    print(to_json({"K": run.K, "essential": run.essential.cardinality, "epsilon": run.certificate.epsilon,
                   "objective": run.solution.objective}), end="")
    return EXIT_OK


def _cmd_experiments(args) -> int:
    cfg = _config(args)
    report = run_experiments(cfg)
    emit_experiments(report, cfg.out)
    ok = sum(r.certified for r in report.rows)
    print(f"{ok}/{len(report.rows)} experiments certified; selected: {report.selected}")
    if ok == 0:
        return EXIT_EXHAUSTED
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    if cfg.budget_grid is None:
        raise ConfigError("sweep-budget needs --grid or budget_grid in the config")
    try:
        rep = sweep_budget(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    emit_sweep(rep, cfg.out)
    print(f"zero curtailment reached at budget: {rep.reached}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _config(args)
    case = cfg.load_case()
    try:
        doc = json.loads(Path(args.plan).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read plan {args.plan}: {exc}") from None
    sol = doc.get("solution", doc)
    plan = StoragePlan.from_dict(sol["plan"])
    gamma = args.gamma if args.gamma is not None else float(sol["gamma"])
    bad = plan.violations(case, cfg.formulation)
    if bad:
        raise ConfigError("plan is not feasible for this case: " + "; ".join(bad))
    test = sample_iid(cfg.scenario_source(case), cfg.test_size, derive_seed(cfg.seed, 0, 1_000_000))
    est = estimate_violation(case, plan, gamma, test, cfg.formulation, Margin(cfg.margin_rel, cfg.margin_abs))
    out = {"violations": est.violations, "trials": est.trials, "epsilon_hat": est.epsilon_hat, "gamma": gamma}
    atomic_write(Path(cfg.out) / "eval.json", to_json(out))
    print(to_json(out), end="")
    return EXIT_OK


_COMMANDS = {"gen": _cmd_gen, "plan": _cmd_plan, "certify": _cmd_certify, "run": _cmd_run,
             "experiments": _cmd_experiments, "sweep-budget": _cmd_sweep, "eval": _cmd_eval}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("RSP_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CaseError, ScenarioError, CertifyError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuaranteeLoopExhausted as exc:
        print(f"guarantee loop exhausted: {exc}", file=sys.stderr)
        for h in exc.history:
            print(f"  guess={h['guess']} K={h['K']} |I|={h['observed']} eps={h['epsilon']:.6g}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except (SolverFailure, RspError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
