"""
⛰️ Basin-Hopping Optimizer
==========================
Bound-strict constrained minimization of discord under a Bell-value window! 🎯

Local search: scipy COBYQA (derivative-free trust region that never leaves
the box) with the Bell window and the weight simplex as constraints. If the
local run ends infeasible, a quadratic penalty on the constraint violation is
added and its weight doubled, up to MAX_PENALTY_ESCALATIONS times.

Global search: scipy basinhopping with
- a bounded step (uniform perturbation, clamped, simplex re-projected)
- a rejection filter that re-checks bounds, simplex, state validity,
  non-negative discord and the Bell window after every local run

Every objective evaluation goes through a BoundsGuard that counts
out-of-box points and clips before evaluating.

Part of: Discord Certifier tools
"""

import inspect
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import Bounds, NonlinearConstraint, OptimizeResult, basinhopping, minimize

# Add tools directory to path for imports
current_dir = Path(__file__).resolve().parent
if str(current_dir) not in sys.path:
    sys.path.insert(0, str(current_dir))

try:
    from LinalgCore import EIGEN_CLIP_TOL
    from StateModel import (
        StateModelError, decode_vector, entangled_basis, project_simplex, vector_bounds, vector_length,
    )
    from BellExpressions import BellExpression, bell_value
    from DiscordEngine import joint_objective
except ImportError:
    from tools.LinalgCore import EIGEN_CLIP_TOL
    from tools.StateModel import (
        StateModelError, decode_vector, entangled_basis, project_simplex, vector_bounds, vector_length,
    )
    from tools.BellExpressions import BellExpression, bell_value
    from tools.DiscordEngine import joint_objective

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION
# ============================================================================

DEFAULT_EPSILON = 1e-3
DEFAULT_TEMPERATURE = 0.05
DEFAULT_STEPSIZE = 0.4
DEFAULT_BH_ITERATIONS = 20
DEFAULT_LOCAL_BUDGET = 1500

# scipy adaptive step control: halve below 20% acceptance over 10 steps
STEP_INTERVAL = 10
TARGET_ACCEPT_RATE = 0.2
STEPWISE_FACTOR = 0.5

PENALTY_WEIGHT_0 = 100.0
MAX_PENALTY_ESCALATIONS = 8
FEASIBILITY_TOL = 1e-8
INITIAL_TR_RADIUS = 0.25
FINAL_TR_RADIUS = 1e-7

SIMPLEX_DELTA = 1e-9
TRACE_CHECK_TOL = 1e-8
NEGATIVE_DISCORD_TOL = 1e-6
INFEASIBLE_ENERGY_OFFSET = 10.0
REJECTED_STEP_ENERGY = 1e4

STEP_MODES = ("bounded", "default")

# basinhopping's seeding keyword moved from `seed` to `rng`
_BH_RNG_KEYWORD = "rng" if "rng" in inspect.signature(basinhopping).parameters else "seed"


class OptimizationError(Exception):
    """Precondition violation (x0 outside bounds, budget too small, bad counts)."""
    pass


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class BoxProblem:
    """Plain box-bounded search space; simplex_dims leading coordinates form a simplex block."""
    bounds: np.ndarray
    simplex_dims: int = 0

    @property
    def dimension(self) -> int:
        return len(self.bounds)


@dataclass(frozen=True)
class OptimizationProblem:
    """Minimize discord subject to |B̃| within ε of p·|B|_Q."""
    expr: BellExpression
    p: float
    epsilon: float = DEFAULT_EPSILON
    bounds: np.ndarray = None
    simplex_dims: int = 3

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise OptimizationError(f"❌ Fraction p must lie in (0, 1], got {self.p}")
        if self.epsilon <= 0:
            raise OptimizationError(f"❌ epsilon must be > 0, got {self.epsilon}")
        if self.bounds is None:
            object.__setattr__(self, "bounds", vector_bounds(self.expr.n_alice, self.expr.n_bob))
        if len(self.bounds) != self.dimension:
            raise OptimizationError(f"❌ Bounds sized {len(self.bounds)}, expected N_D = {self.dimension}")

    @property
    def dimension(self) -> int:
        return vector_length(self.expr.n_alice, self.expr.n_bob)

    @property
    def target(self) -> float:
        """|B|_p = p · |B|_Q"""
        return self.p * self.expr.quantum_bound

    @property
    def window(self) -> Tuple[float, float]:
        return self.target - self.epsilon, self.target + self.epsilon


@dataclass
class OptResult:
    """Outcome of a local or global minimization."""
    x_best: np.ndarray
    objective: float
    bell_achieved: float
    feasible: bool
    evaluations: int
    rejected_steps: int = 0
    max_violation: float = 0.0
    bounds_violations: int = 0
    iterations: int = 1


# ============================================================================
# EVALUATION HELPERS
# ============================================================================

class BoundsGuard:
    """
    Objective wrapper that instruments every evaluation point.

    Points outside the box are counted in `violations` and clipped before the
    wrapped function sees them.
    """

    def __init__(self, func: Callable[[np.ndarray], float], bounds: np.ndarray):
        self.func = func
        self.lower = np.asarray(bounds, dtype=float)[:, 0]
        self.upper = np.asarray(bounds, dtype=float)[:, 1]
        self.calls = 0
        self.violations = 0

    def __call__(self, x, *args) -> float:
        x = np.asarray(x, dtype=float)
        self.calls += 1
        if np.any(x < self.lower) or np.any(x > self.upper):
            self.violations += 1
            logger.debug("Objective requested outside bounds; clipping")
        return float(self.func(np.clip(x, self.lower, self.upper)))


def within_bounds(x: np.ndarray, bounds: np.ndarray) -> bool:
    bounds = np.asarray(bounds, dtype=float)
    return bool(np.all(x >= bounds[:, 0]) and np.all(x <= bounds[:, 1]))


def simplex_slack(x: np.ndarray, dims: int = 3) -> float:
    """1 - Σ μ over the simplex block (≥ 0 when valid)."""
    return 1.0 - float(np.sum(x[:dims])) if dims else 0.0


def _unvalidated_state(x: np.ndarray, expr: BellExpression) -> Tuple[np.ndarray, object]:
    """ρ(x) without the simplex check, so the Bell value stays smooth near the face."""
    params, cfg = decode_vector(x, expr.n_alice, expr.n_bob)
    basis = entangled_basis(params, check=False)
    rho = (basis.T * params.weights) @ basis.conj()
    return (rho + rho.conj().T) / 2, cfg


def bell_of_vector(x: np.ndarray, expr: BellExpression) -> float:
    rho, cfg = _unvalidated_state(x, expr)
    return bell_value(rho, expr, cfg)


def bell_constraint(x: np.ndarray, prob: OptimizationProblem) -> Tuple[float, float]:
    """
    (g_lo, g_hi) = (|B̃| - (|B|_p - ε), (|B|_p + ε) - |B̃|); feasible iff both ≥ 0.

    Undecodable vectors return (-inf, -inf).
    """
    try:
        achieved = abs(bell_of_vector(np.asarray(x, dtype=float), prob.expr))
    except StateModelError:
        return -np.inf, -np.inf
    lo, hi = prob.window
    return achieved - lo, hi - achieved


def state_checks(x: np.ndarray, prob: OptimizationProblem) -> Tuple[bool, str]:
    """Bounds, simplex and density-matrix validity of the state encoded in x."""
    if not within_bounds(x, prob.bounds):
        return False, "outside bounds"
    if simplex_slack(x, prob.simplex_dims) < 0:
        return False, "simplex violated"
    try:
        rho, _ = _unvalidated_state(x, prob.expr)
    except StateModelError as e:
        return False, str(e)
    eigs = np.linalg.eigvalsh(rho)
    if eigs[0] < -EIGEN_CLIP_TOL:
        return False, f"negative eigenvalue {eigs[0]:.3e}"
    if abs(np.trace(rho).real - 1.0) > TRACE_CHECK_TOL:
        return False, "trace not 1"
    return True, "ok"


def problem_constraints(prob: OptimizationProblem) -> List[Callable[[np.ndarray], np.ndarray]]:
    """Bell window (two sides) and simplex as g(x) ≥ 0 callables."""
    def window(x):
        return np.array(bell_constraint(x, prob))

    def simplex(x):
        return np.array([simplex_slack(x, prob.simplex_dims)])

    return [window, simplex]


def _max_violation(x: np.ndarray, constraints: Sequence[Callable]) -> float:
    worst = 0.0
    for g in constraints:
        values = np.atleast_1d(np.asarray(g(x), dtype=float))
        worst = max(worst, float(np.max(np.maximum(-values, 0.0))) if values.size else 0.0)
    return worst


# ============================================================================
# LOCAL MINIMIZATION
# ============================================================================

def local_minimize(objective: Callable[[np.ndarray], float], constraints: Sequence[Callable],
                   bounds: np.ndarray, x0: np.ndarray, budget: int = DEFAULT_LOCAL_BUDGET,
                   initial_tr_radius: float = INITIAL_TR_RADIUS,
                   final_tr_radius: float = FINAL_TR_RADIUS) -> OptResult:
    """
    Derivative-free, bound-strict constrained minimization.

    Args:
        objective: f(x); wrapped in a BoundsGuard unless it already is one
        constraints: callables g(x) with feasibility g(x) ≥ 0 (scalar or array)
        bounds: (N, 2) box
        x0: start point inside the box
        budget: total objective evaluations across penalty escalations

    Returns:
        Best feasible point found, or the least-violating point flagged infeasible

    Raises:
        OptimizationError: If x0 is outside the box or budget < N + 2
    """
    bounds = np.asarray(bounds, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = len(bounds)
    if x0.shape != (n,) or not within_bounds(x0, bounds):
        raise OptimizationError("❌ x0 must lie within the box bounds")
    if budget < n + 2:
        raise OptimizationError(f"❌ Budget {budget} below N + 2 = {n + 2}")

    guard = objective if isinstance(objective, BoundsGuard) else BoundsGuard(objective, bounds)
    start_calls = guard.calls
    box = Bounds(bounds[:, 0], bounds[:, 1])
    scipy_constraints = [NonlinearConstraint(g, 0.0, np.inf) for g in constraints]
    radius = min(initial_tr_radius, 0.5 * float(np.min(bounds[:, 1] - bounds[:, 0])))

    best_feasible: Optional[Tuple[float, np.ndarray]] = None
    least_violating: Optional[Tuple[float, float, np.ndarray]] = None
    # The start point is itself a candidate
    start_value = guard(x0)
    start_violation = _max_violation(x0, constraints)
    if start_violation <= FEASIBILITY_TOL:
        best_feasible = (start_value, x0)
    else:
        least_violating = (start_violation, start_value, x0)
    x_start = x0
    weight = 0.0

    for escalation in range(MAX_PENALTY_ESCALATIONS + 1):
        remaining = budget - (guard.calls - start_calls)
        if remaining < n + 2:
            break

        if weight > 0:
            def fun(x, w=weight):
                viol = _max_violation(x, constraints)
                return guard(x) + w * viol ** 2
        else:
            fun = guard

        res = minimize(fun, x_start, method="COBYQA", bounds=box,
                       constraints=scipy_constraints,
                       options={"maxfev": remaining,
                                "initial_tr_radius": radius,
                                "final_tr_radius": min(final_tr_radius, radius)})
        x = np.clip(np.asarray(res.x, dtype=float), bounds[:, 0], bounds[:, 1])
        value = float(guard.func(x))
        violation = _max_violation(x, constraints)

        if violation <= FEASIBILITY_TOL:
            if best_feasible is None or value < best_feasible[0]:
                best_feasible = (value, x)
            break
        if least_violating is None or (violation, value) < least_violating[:2]:
            least_violating = (violation, value, x)

        weight = PENALTY_WEIGHT_0 if weight == 0 else 2 * weight
        x_start = x
        logger.debug(f"Escalating penalty to {weight:g} (violation {violation:.3e})")

    evaluations = guard.calls - start_calls
    if best_feasible is not None:
        value, x = best_feasible
        return OptResult(x_best=x, objective=value, bell_achieved=float("nan"), feasible=True,
                         evaluations=evaluations, bounds_violations=guard.violations)
    if least_violating is None:
        value = float(guard.func(x0))
        least_violating = (_max_violation(x0, constraints), value, x0)
    violation, value, x = least_violating
    return OptResult(x_best=x, objective=value, bell_achieved=float("nan"), feasible=False,
                     evaluations=evaluations, max_violation=violation,
                     bounds_violations=guard.violations)


def minimize_problem(prob: OptimizationProblem, x0: np.ndarray,
                     budget: int = DEFAULT_LOCAL_BUDGET, guard: Optional[BoundsGuard] = None) -> OptResult:
    """One local minimization of the joint discord objective for a problem."""
    objective = guard or BoundsGuard(lambda x: joint_objective(x, prob.expr), prob.bounds)
    result = local_minimize(objective, problem_constraints(prob), prob.bounds, x0, budget)
    return annotate(result, prob)


def in_window(x: np.ndarray, prob: OptimizationProblem) -> bool:
    """Bell window met up to FEASIBILITY_TOL."""
    g_lo, g_hi = bell_constraint(x, prob)
    return bool(g_lo >= -FEASIBILITY_TOL and g_hi >= -FEASIBILITY_TOL)


def annotate(result: OptResult, prob: OptimizationProblem) -> OptResult:
    """
    Fill in the achieved Bell value and the problem-level feasibility flag.

    A simplex overshoot left by the local solver is rescaled away first.
    """
    x = np.asarray(result.x_best, dtype=float)
    if simplex_slack(x, prob.simplex_dims) < 0:
        x = project_simplex(x)
        result = replace(result, x_best=x, objective=joint_objective(x, prob.expr))
    valid, _ = state_checks(x, prob)
    achieved = bell_of_vector(x, prob.expr)
    return replace(result, bell_achieved=achieved, feasible=bool(valid and in_window(x, prob)))


# ============================================================================
# STEPPING & REJECTION
# ============================================================================

def propose_step(x: np.ndarray, stepsize: float, prob, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform perturbation in [-stepsize, stepsize] per coordinate, clamped to
    the box, with the simplex block rescaled to sum ≤ 1 - 1e-9.
    """
    bounds = np.asarray(prob.bounds, dtype=float)
    x_new = np.asarray(x, dtype=float) + rng.uniform(-stepsize, stepsize, size=len(bounds))
    x_new = np.clip(x_new, bounds[:, 0], bounds[:, 1])
    dims = getattr(prob, "simplex_dims", 0)
    if dims:
        total = x_new[:dims].sum()
        if total > 1.0:
            x_new[:dims] *= (1.0 - SIMPLEX_DELTA) / total
    return x_new


class BoundedStep:
    """
    take_step object for scipy basinhopping.

    `stepsize` is adjusted by scipy's adaptive step control but never grows
    past its starting value, so only the halving on low acceptance has an
    effect. In "default" mode the perturbation is unclamped; out-of-box
    proposals are rejected before any local search starts.
    """

    def __init__(self, prob, stepsize: float, rng: np.random.Generator, mode: str = "bounded"):
        if mode not in STEP_MODES:
            raise OptimizationError(f"❌ Unknown step mode '{mode}', expected one of {STEP_MODES}")
        self.prob = prob
        self.max_stepsize = stepsize
        self._stepsize = stepsize
        self.rng = rng
        self.mode = mode

    @property
    def stepsize(self) -> float:
        return self._stepsize

    @stepsize.setter
    def stepsize(self, value: float) -> None:
        self._stepsize = min(float(value), self.max_stepsize)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.mode == "bounded":
            return propose_step(x, self.stepsize, self.prob, self.rng)
        return np.asarray(x, dtype=float) + self.rng.uniform(-self.stepsize, self.stepsize, size=len(x))


def accept_or_reject(candidate: OptResult, prob: OptimizationProblem) -> bool:
    """
    Post-minimization rejection filter.

    Accepts iff the point is in bounds, satisfies the simplex, encodes a valid
    density matrix, has objective ≥ -1e-6 and meets the Bell window.
    """
    x = np.asarray(candidate.x_best, dtype=float)
    valid, reason = state_checks(x, prob)
    if not valid:
        logger.debug(f"Rejected step: {reason}")
        return False
    if candidate.objective < -NEGATIVE_DISCORD_TOL:
        logger.debug(f"Rejected step: negative discord {candidate.objective:.3e}")
        return False
    return in_window(x, prob)


# ============================================================================
# BASIN HOPPING
# ============================================================================

class BasinHopper:
    """
    Basin-hopping driver around scipy.optimize.basinhopping.

    Tracks the best accepted local result itself, so the initial
    minimization and every hop feed one monotone incumbent.
    """

    def __init__(self, objective: Callable[[np.ndarray], float], constraints: Sequence[Callable],
                 space, accept: Callable[[OptResult], bool],
                 finish: Optional[Callable[[OptResult], OptResult]] = None,
                 local_budget: int = DEFAULT_LOCAL_BUDGET, step_mode: str = "bounded"):
        self.space = space
        self.bounds = np.asarray(space.bounds, dtype=float)
        self.guard = BoundsGuard(objective, self.bounds)
        self.constraints = list(constraints)
        self.accept = accept
        self.finish = finish or (lambda r: r)
        self.local_budget = local_budget
        self.step_mode = step_mode

        self.best: Optional[OptResult] = None
        self.least_bad: Optional[OptResult] = None
        self.history: List[float] = []
        self.rejected_steps = 0
        self._last: Optional[OptResult] = None

    def _local_method(self, fun, x0, args=(), **unused) -> OptimizeResult:
        x0 = np.asarray(x0, dtype=float)
        dims = getattr(self.space, "simplex_dims", 0)
        if not within_bounds(x0, self.bounds) or simplex_slack(x0, dims) < 0:
            # Unclamped proposal from the default step mode
            self.rejected_steps += 1
            self._last = None
            return OptimizeResult(x=x0, fun=REJECTED_STEP_ENERGY, success=False, nfev=0)

        result = self.finish(local_minimize(self.guard, self.constraints, self.bounds, x0, self.local_budget))
        self._last = result
        if self.accept(result):
            if self.best is None or result.objective < self.best.objective:
                self.best = result
        elif self.least_bad is None or (result.max_violation, result.objective) < \
                (self.least_bad.max_violation, self.least_bad.objective):
            self.least_bad = result
        self.history.append(self.best.objective if self.best is not None else np.inf)

        energy = result.objective
        if not result.feasible:
            energy += INFEASIBLE_ENERGY_OFFSET + result.max_violation
        return OptimizeResult(x=result.x_best, fun=energy, success=result.feasible,
                              nfev=result.evaluations)

    def _accept_test(self, f_new=None, x_new=None, f_old=None, x_old=None) -> bool:
        if self._last is None:
            return False
        ok = self.accept(self._last)
        if not ok:
            self.rejected_steps += 1
        return ok

    def run(self, x0: np.ndarray, iterations: int = DEFAULT_BH_ITERATIONS,
            stepsize: float = DEFAULT_STEPSIZE, temperature: float = DEFAULT_TEMPERATURE,
            seed: int = 0) -> OptResult:
        """
        Initial local minimization from x0 plus iterations - 1 hops.

        Deterministic given seed.

        Raises:
            OptimizationError: If iterations < 1
        """
        if iterations < 1:
            raise OptimizationError("❌ Basin hopping needs at least one iteration")
        step_seq, metropolis_seq = np.random.SeedSequence(seed).spawn(2)
        step = BoundedStep(self.space, stepsize, np.random.default_rng(step_seq), self.step_mode)

        basinhopping(
            self.guard, np.asarray(x0, dtype=float),
            niter=iterations - 1,
            T=temperature,
            stepsize=stepsize,
            minimizer_kwargs={"method": self._local_method},
            take_step=step,
            accept_test=self._accept_test,
            interval=STEP_INTERVAL,
            target_accept_rate=TARGET_ACCEPT_RATE,
            stepwise_factor=STEPWISE_FACTOR,
            **{_BH_RNG_KEYWORD: np.random.default_rng(metropolis_seq)},
        )

        chosen = self.best if self.best is not None else self.least_bad
        if chosen is None:
            chosen = self.finish(OptResult(x_best=np.asarray(x0, dtype=float),
                                           objective=float(self.guard.func(x0)),
                                           bell_achieved=float("nan"), feasible=False, evaluations=0))
        return replace(chosen, evaluations=self.guard.calls, rejected_steps=self.rejected_steps,
                       bounds_violations=self.guard.violations, iterations=iterations,
                       feasible=self.best is not None)


def basin_hopping(prob: OptimizationProblem, x0: np.ndarray, iterations: int = DEFAULT_BH_ITERATIONS,
                  stepsize: float = DEFAULT_STEPSIZE, temperature: float = DEFAULT_TEMPERATURE,
                  seed: int = 0, step_mode: str = "bounded",
                  local_budget: int = DEFAULT_LOCAL_BUDGET) -> OptResult:
    """
    Global minimization of the discord objective for one (expression, p) problem.

    Returns the best feasible OptResult, or the least-violating point flagged
    infeasible when no hop produced an acceptable state.
    """
    hopper = BasinHopper(
        objective=lambda x: joint_objective(x, prob.expr),
        constraints=problem_constraints(prob),
        space=prob,
        accept=lambda r: accept_or_reject(r, prob),
        finish=lambda r: annotate(r, prob),
        local_budget=local_budget,
        step_mode=step_mode,
    )
    result = hopper.run(x0, iterations=iterations, stepsize=stepsize,
                        temperature=temperature, seed=seed)
    logger.info(
        f"⛰️ {prob.expr.name} p={prob.p:.4f}: objective {result.objective:.6f}, "
        f"Bell {result.bell_achieved:.6f}, feasible={result.feasible}, "
        f"evals={result.evaluations}, rejected={result.rejected_steps}"
    )
    return result
