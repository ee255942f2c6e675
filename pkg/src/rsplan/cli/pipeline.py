"""Guarantee loop, repeated experiments and curtailment budget sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..certify import (
    CertifyError,
    GuaranteeCertificate,
    GuaranteeMode,
    RiskEstimate,
    certify,
    estimate_violation,
    min_k_for,
)
from ..grid import NetworkCase
from ..rsp import EssentialSet, RobustSolution, SecondStageEvaluator, ccg_solve, find_essential
from ..scenarios import sample_iid
from ..solver import SolveOptions
from .config import RunConfig, derive_seed

log = logging.getLogger(__name__)

TEST_STREAM = 1_000_000  # seed key for out-of-sample draws, disjoint from guess indices


class GuaranteeLoopExhausted(RuntimeError):
    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


@dataclass
class GuaranteeRun:
    solution: RobustSolution
    certificate: GuaranteeCertificate
    essential: EssentialSet
    K: int
    history: list[dict]  # one entry per pass: guess, K, observed cardinality, epsilon
    train_seed: int


def _dimension(case: NetworkCase) -> int:
    return 2 * len(case.storage.candidates) + 1


def _certificate(config: RunConfig, guess: int, observed: int, K: int) -> GuaranteeCertificate:
    """Certificate for one solved sample. An invariant set larger than ``s_bar``
    voids the improved bound; that case is reported as the vacuous epsilon = 1."""
    mode = config.guarantee_mode
    if mode is GuaranteeMode.PRIOR_CONVEX:
        return certify(mode, guess, config.beta, K)
    if mode is GuaranteeMode.IMPROVED_NONCONVEX:
        if observed > config.s_bar:
            return certify(GuaranteeMode.POSTERIOR_NONCONVEX, K, config.beta, K)
        return certify(mode, observed, config.beta, K, config.s_bar)
    return certify(mode, observed, config.beta, K)


def run_with_guarantee(config: RunConfig, experiment: int = 0, case: NetworkCase | None = None,
                       source=None, opts: SolveOptions | None = None) -> GuaranteeRun:
    """Guess the invariant-set size, size the sample, solve, measure, and retry if short.

    Each pass draws a fresh scenario set. The prior mode needs no guess: the
    sample size follows from the first-stage dimension and one pass suffices.
    """
    case = case or config.load_case()
    source = source if source is not None else config.scenario_source(case)
    kind = config.formulation
    mode = config.guarantee_mode
    history: list[dict] = []
    k = _dimension(case) if mode is GuaranteeMode.PRIOR_CONVEX else config.initial_k_guess
    for guess in range(config.max_guesses):
        if mode is GuaranteeMode.IMPROVED_NONCONVEX and k > config.s_bar:
            raise GuaranteeLoopExhausted(f"invariant set size {k} exceeds s_bar={config.s_bar}", history)
        K = min_k_for(mode, k, config.eps_bar, config.beta, config.s_bar)
        seed = derive_seed(config.seed, experiment, guess)
        train = sample_iid(source, K, seed)
        sol = ccg_solve(case, train, kind, gap_tol=config.gap_tol, max_iter=config.max_iter, opts=opts)
        ess = find_essential(case, train, kind, sol.critical_set, sol.objective, opts=opts)
        k_obs = ess.cardinality
        cert = _certificate(config, k, k_obs, K)
        eps = cert.epsilon
        history.append({"guess": k, "K": K, "observed": k_obs, "epsilon": eps, "converged": sol.converged})
        log.info("experiment %d pass %d: guess=%d K=%d |I|=%d eps=%.6g", experiment, guess, k, K, k_obs, eps)
        if eps <= config.eps_bar:
            return GuaranteeRun(sol, cert, ess, K, history, seed)
        k = max(k_obs, k + 1)
    raise GuaranteeLoopExhausted(
        f"no certificate within {config.max_guesses} passes; |I| history "
        f"{[h['observed'] for h in history]}", history)


@dataclass
class ExperimentRow:
    index: int
    status: str  # "ok" or the error message
    run: GuaranteeRun | None = None
    risk: RiskEstimate | None = None
    investment: float = math.nan
    history: list[dict] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.run is not None

    def to_dict(self) -> dict:
        d = {"experiment": self.index, "status": self.status, "history": self.history}
        if self.run is not None:
            r = self.run
            d.update({
                "plan": r.solution.plan.to_dict(),
                "gamma": r.solution.gamma,
                "objective": r.solution.objective,
                "investment": self.investment,
                "K": r.K,
                "essential": list(r.essential.indices),
                "critical_set": list(r.solution.critical_set),
                "certificate": r.certificate.to_dict(),
                "train_seed": r.train_seed,
            })
        if self.risk is not None:
            d["out_of_sample"] = {"violations": self.risk.violations, "trials": self.risk.trials,
                                  "epsilon_hat": self.risk.epsilon_hat}
        return d


@dataclass
class ExperimentReport:
    config: RunConfig
    rows: list[ExperimentRow]
    selected: int | None
    rule: str

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "experiments": [r.to_dict() for r in self.rows],
                "selected": self.selected, "selection_rule": self.rule}


def out_of_sample(config: RunConfig, case, source, run: GuaranteeRun, experiment: int,
                  opts: SolveOptions | None = None) -> RiskEstimate:
    test = sample_iid(source, config.test_size, derive_seed(config.seed, experiment, TEST_STREAM))
    ev = SecondStageEvaluator(case, config.formulation, opts)
    return estimate_violation(case, run.solution.plan, run.solution.gamma, test, config.formulation,
                              config.margin, evaluator=ev)


def _one_experiment(args) -> ExperimentRow:
    config, e = args
    case = config.load_case()
    source = config.scenario_source(case)
    try:
        run = run_with_guarantee(config, e, case, source)
    except GuaranteeLoopExhausted as exc:
        return ExperimentRow(e, f"exhausted: {exc}", history=exc.history)
    except (CertifyError, RuntimeError) as exc:
        return ExperimentRow(e, f"error: {exc}")
    risk = out_of_sample(config, case, source, run, e)
    return ExperimentRow(e, "ok", run, risk, run.solution.plan.investment_cost(case), run.history)


def select(rows: list[ExperimentRow], objective: str, abs_tol: float = 1e-3) -> tuple[int | None, str]:
    """Index of the chosen experiment; ties go to the lowest index."""
    ok = [r for r in rows if r.certified]
    if objective == "curtailment":
        rule = "least investment among certified runs with zero worst-case curtailment"
        zero = [r for r in ok if r.run.solution.gamma <= abs_tol]
        if zero:
            ok = zero
        else:
            rule = "least worst-case curtailment among certified runs (none reached zero)"
            if not ok:
                return None, rule
            best = min(r.run.solution.gamma for r in ok)
            ok = [r for r in ok if r.run.solution.gamma <= best + abs_tol]
    else:
        rule = "least investment among certified runs"
    if not ok:
        return None, rule
    pick = min(ok, key=lambda r: (r.investment, r.index))
    return pick.index, rule


def run_experiments(config: RunConfig) -> ExperimentReport:
    jobs = [(config, e) for e in range(config.experiments)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_one_experiment, jobs))
    else:
        rows = [_one_experiment(j) for j in jobs]
    idx, rule = select(rows, config.formulation.objective, config.margin_abs)
    return ExperimentReport(config, rows, idx, rule)


@dataclass
class SweepPoint:
    budget: float
    gamma: float
    investment: float
    essential: int
    certificate: GuaranteeCertificate
    risk: RiskEstimate
    eps_bar: float

    @property
    def certified(self) -> bool:
        return self.certificate.epsilon <= self.eps_bar

    def to_dict(self) -> dict:
        return {"budget": self.budget, "gamma": self.gamma, "investment": self.investment,
                "essential": self.essential, "certificate": self.certificate.to_dict(),
                "certified": self.certified,
                "epsilon_hat": self.risk.epsilon_hat, "violations": self.risk.violations,
                "trials": self.risk.trials}


@dataclass
class SweepReport:
    config: RunConfig
    K: int
    points: list[SweepPoint]
    reached: float | None  # smallest grid budget with zero worst-case curtailment

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "K": self.K, "points": [p.to_dict() for p in self.points],
                "zero_curtailment_budget": self.reached}


def sweep_budget(config: RunConfig, opts: SolveOptions | None = None) -> SweepReport:
    """Curtailment kind only. One training draw is shared by every grid point so
    the worst-case curtailment is nonincreasing along the grid."""
    kind = config.formulation
    if kind.objective != "curtailment":
        raise ValueError("budget sweeps need a curtailment formulation")
    if not config.budget_grid:
        raise ValueError("budget sweeps need a budget_grid")
    base = config.load_case()
    source = config.scenario_source(base)
    mode = config.guarantee_mode
    k = _dimension(base) if mode is GuaranteeMode.PRIOR_CONVEX else config.initial_k_guess
    K = min_k_for(mode, k, config.eps_bar, config.beta, config.s_bar)
    train = sample_iid(source, K, derive_seed(config.seed, 0, 0))
    test = sample_iid(source, config.test_size, derive_seed(config.seed, 0, TEST_STREAM))
    points = []
    reached = None
    for b in config.budget_grid:
        case = base.with_budget(b)
        sol = ccg_solve(case, train, kind, gap_tol=config.gap_tol, max_iter=config.max_iter, opts=opts)
        ess = find_essential(case, train, kind, sol.critical_set, sol.objective, opts=opts)
        cert = _certificate(config, k, ess.cardinality, K)
        risk = estimate_violation(case, sol.plan, sol.gamma, test, kind, config.margin, opts=opts)
        points.append(SweepPoint(b, sol.gamma, sol.plan.investment_cost(case), ess.cardinality, cert, risk,
                                 config.eps_bar))
        if reached is None and sol.gamma <= config.margin_abs:
            reached = b
        log.info("budget %.6g: gamma=%.6g |I|=%d eps=%.6g eps_hat=%.4f", b, sol.gamma,
                 ess.cardinality, cert.epsilon, risk.epsilon_hat)
    if reached is None:
        log.warning("budget grid exhausted before worst-case curtailment reached zero")
    return SweepReport(config, K, points, reached)
