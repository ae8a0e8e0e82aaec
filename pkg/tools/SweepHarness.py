"""
📈 Sweep Harness
================
Minimal-discord sweeps over the fraction grid p for each Bell expression! 🧭

For every p in the grid, `restarts` independent basin-hopping runs are
started from one of three initializations:
- random:             uniform in the box, simplex-projected
- near_quantum_bound: the see-saw maximizer's pure state and observables
- warm_start:         the best vector found at the previous p

Each run's seed is derived from (base_seed, expr, p, restart_index), so any
single point can be re-run on its own. Jobs run in a process pool sized by
DISCORD_CERT_THREADS; records are merged and sorted by one collector.

Part of: Discord Certifier tools
"""

import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

# Add tools directory to path for imports
current_dir = Path(__file__).resolve().parent
if str(current_dir) not in sys.path:
    sys.path.insert(0, str(current_dir))

try:
    from colab_compat import ColabCompat
    from LinalgCore import LinalgError
    from StateModel import (
        StateModelError, assemble_state, decode_vector, encode_vector, project_simplex,
        pure_state_to_params, vector_bounds,
    )
    from BellExpressions import BellExpression, get_expression, seesaw_maximize
    from DiscordEngine import discord_certified
    from BasinHoppingOptimizer import (
        DEFAULT_BH_ITERATIONS, DEFAULT_EPSILON, DEFAULT_LOCAL_BUDGET, DEFAULT_STEPSIZE,
        DEFAULT_TEMPERATURE, STEP_MODES, OptimizationProblem, basin_hopping,
    )
except ImportError:
    from tools.colab_compat import ColabCompat
    from tools.LinalgCore import LinalgError
    from tools.StateModel import (
        StateModelError, assemble_state, decode_vector, encode_vector, project_simplex,
        pure_state_to_params, vector_bounds,
    )
    from tools.BellExpressions import BellExpression, get_expression, seesaw_maximize
    from tools.DiscordEngine import discord_certified
    from tools.BasinHoppingOptimizer import (
        DEFAULT_BH_ITERATIONS, DEFAULT_EPSILON, DEFAULT_LOCAL_BUDGET, DEFAULT_STEPSIZE,
        DEFAULT_TEMPERATURE, STEP_MODES, OptimizationProblem, basin_hopping,
    )

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION
# ============================================================================

DEFAULT_RESTARTS = 8
DEFAULT_P_STEPS = 30
P_GRID_MARGIN = 0.02
CERTIFICATION_GAP = 5e-3
NEAR_QUANTUM_SEESAW_RESTARTS = 8

STRATEGIES = ("random", "near_quantum_bound", "warm_start")
# CLI spellings → canonical strategy names
STRATEGY_ALIASES = {
    "random": "random",
    "near-quantum": "near_quantum_bound",
    "near_quantum_bound": "near_quantum_bound",
    "warm": "warm_start",
    "warm_start": "warm_start",
}


class SweepError(Exception):
    """Invalid sweep configuration or strategy precondition."""
    pass


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class SweepConfig:
    """Everything that determines a sweep's records."""
    expr_name: str
    p_grid: Tuple[float, ...]
    restarts: int = DEFAULT_RESTARTS
    bh_iterations: int = DEFAULT_BH_ITERATIONS
    strategy: str = "random"
    epsilon: float = DEFAULT_EPSILON
    base_seed: int = 0
    stepsize: float = DEFAULT_STEPSIZE
    temperature: float = DEFAULT_TEMPERATURE
    step_mode: str = "bounded"
    local_budget: int = DEFAULT_LOCAL_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        object.__setattr__(self, "strategy", STRATEGY_ALIASES.get(self.strategy, self.strategy))
        if not self.p_grid:
            raise SweepError("❌ p_grid is empty")
        if list(self.p_grid) != sorted(self.p_grid):
            raise SweepError("❌ p_grid must be sorted ascending")
        if any(not (0.0 < p <= 1.0) for p in self.p_grid):
            raise SweepError("❌ Every p must lie in (0, 1]")
        if self.restarts < 1:
            raise SweepError("❌ restarts must be ≥ 1")
        if self.bh_iterations < 1:
            raise SweepError("❌ bh_iterations must be ≥ 1")
        if self.strategy not in STRATEGIES:
            raise SweepError(f"❌ Unknown strategy '{self.strategy}', expected one of {STRATEGIES}")
        if self.step_mode not in STEP_MODES:
            raise SweepError(f"❌ Unknown step mode '{self.step_mode}', expected one of {STEP_MODES}")
        if self.epsilon <= 0:
            raise SweepError("❌ epsilon must be > 0")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["p_grid"] = list(self.p_grid)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SweepError(f"❌ Unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        """Load a config file; unknown keys are rejected."""
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))


@dataclass
class RunRecord:
    """One basin-hopping run at one (expression, p)."""
    expr_name: str
    p: float
    seed: int
    strategy: str
    restart_index: int
    x_best: List[float]
    discord_certified: Optional[float]
    objective: float
    bell_achieved: float
    feasible: bool
    wall_time: float
    evaluations: int
    rejected_steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        known = {f.name for f in fields(cls)}
        missing = [name for name in known if name not in data and name != "rejected_steps"]
        if missing:
            raise KeyError(f"RunRecord fields missing: {sorted(missing)}")
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class AggregateRow:
    p: float
    min_discord: Optional[float]
    count_feasible: int
    count_total: int


@dataclass
class Aggregate:
    """Per-p minimum certified discord over feasible records."""
    expr_name: str
    rows: List[AggregateRow] = field(default_factory=list)

    def min_at(self, p: float) -> Optional[float]:
        for row in self.rows:
            if row.p == p:
                return row.min_discord
        raise KeyError(f"p = {p} not in aggregate")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows],
                            columns=["p", "min_discord", "count_feasible", "count_total"])


# ============================================================================
# SEEDS & GRIDS
# ============================================================================

def derive_seed(base_seed: int, expr_name: str, p: float, restart_index: int) -> int:
    """Stable 63-bit seed from (base_seed, expr, p, restart_index)."""
    key = f"{base_seed}|{expr_name}|{float(p)!r}|{restart_index}".encode('utf-8')
    return int.from_bytes(hashlib.sha256(key).digest()[:8], 'big') >> 1


def default_p_grid(expr: BellExpression, steps: int = DEFAULT_P_STEPS) -> Tuple[float, ...]:
    """`steps` uniform points from p_L - 0.02 to 1.0."""
    start = max(expr.p_local - P_GRID_MARGIN, 1e-3)
    return tuple(float(p) for p in np.linspace(start, 1.0, steps))


def p_grid_from_range(p_min: float, p_max: float, steps: int) -> Tuple[float, ...]:
    if steps < 1:
        raise SweepError("❌ p-steps must be ≥ 1")
    if steps == 1:
        return (float(p_min),)
    return tuple(float(p) for p in np.linspace(p_min, p_max, steps))


# ============================================================================
# INITIALIZATION STRATEGIES
# ============================================================================

def initial_vector(strategy: str, expr: BellExpression, p: float,
                   prev_best: Optional[Sequence[float]], rng: np.random.Generator) -> np.ndarray:
    """
    Starting vector for one basin-hopping run.

    Raises:
        SweepError: On warm_start without prev_best, or an unknown strategy
    """
    strategy = STRATEGY_ALIASES.get(strategy, strategy)
    if strategy == "random":
        bounds = vector_bounds(expr.n_alice, expr.n_bob)
        return project_simplex(rng.uniform(bounds[:, 0], bounds[:, 1]))

    if strategy == "near_quantum_bound":
        seesaw = seesaw_maximize(expr, restarts=NEAR_QUANTUM_SEESAW_RESTARTS,
                                 rng_seed=int(rng.integers(2**32)))
        params = pure_state_to_params(seesaw.state)
        best = discord_certified(assemble_state(params))
        return encode_vector(params, seesaw.config(discord_angles=best.best_measurement))

    if strategy == "warm_start":
        if prev_best is None:
            raise SweepError("❌ warm_start needs the previous point's best vector")
        return np.array(prev_best, dtype=float)

    raise SweepError(f"❌ Unknown strategy '{strategy}'")


# ============================================================================
# RUNNING POINTS
# ============================================================================

def certify(x: np.ndarray, expr: BellExpression) -> Optional[float]:
    """Grid-certified discord of the state in x, or None if x encodes no valid state."""
    params, _ = decode_vector(x, expr.n_alice, expr.n_bob)
    try:
        return discord_certified(assemble_state(params)).discord
    except (StateModelError, LinalgError) as e:
        logger.debug(f"No certified discord for x_best: {e}")
        return None


def run_single(expr_name: str, p: float, restart_index: int, cfg: SweepConfig,
               prev_best: Optional[Sequence[float]] = None) -> RunRecord:
    """One restart at one p; a pure function of its arguments (wall_time aside)."""
    expr = get_expression(expr_name)
    seed = derive_seed(cfg.base_seed, expr_name, p, restart_index)
    rng = np.random.default_rng(seed)

    start = time.perf_counter()
    strategy = cfg.strategy
    if strategy == "warm_start" and prev_best is None:
        # First grid point of a warm chain has nothing to chain from
        strategy = "random"
    x0 = initial_vector(strategy, expr, p, prev_best, rng)
    prob = OptimizationProblem(expr=expr, p=p, epsilon=cfg.epsilon)
    result = basin_hopping(prob, x0, iterations=cfg.bh_iterations, stepsize=cfg.stepsize,
                           temperature=cfg.temperature, seed=seed, step_mode=cfg.step_mode,
                           local_budget=cfg.local_budget)

    certified = certify(result.x_best, expr)
    if certified is not None and abs(certified - result.objective) > CERTIFICATION_GAP:
        logger.warning(
            f"⚠️ {expr_name} p={p:.4f} restart {restart_index}: joint objective "
            f"{result.objective:.6f} vs certified {certified:.6f}; reporting certified"
        )

    return RunRecord(
        expr_name=expr_name,
        p=float(p),
        seed=seed,
        strategy=cfg.strategy,
        restart_index=restart_index,
        x_best=[float(v) for v in result.x_best],
        discord_certified=certified,
        objective=float(result.objective),
        bell_achieved=float(result.bell_achieved),
        feasible=bool(result.feasible and certified is not None),
        wall_time=time.perf_counter() - start,
        evaluations=int(result.evaluations),
        rejected_steps=int(result.rejected_steps),
    )


def _run_job(args: Tuple) -> RunRecord:
    return run_single(*args)


def _execute(jobs: List[Tuple], workers: int, progress: Optional[tqdm]) -> List[RunRecord]:
    """Run jobs inline or in a process pool; completion order does not matter."""
    records: List[RunRecord] = []
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            records.append(_run_job(job))
            if progress is not None:
                progress.update(1)
        return records

    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as executor:
        futures = [executor.submit(_run_job, job) for job in jobs]
        for future in as_completed(futures):
            records.append(future.result())
            if progress is not None:
                progress.update(1)
    return records


def _sort_key(record: RunRecord) -> Tuple[float, int]:
    return record.p, record.restart_index


def best_vector(records: Sequence[RunRecord]) -> Optional[List[float]]:
    """x_best of the lowest-discord feasible record, else of the lowest-objective record."""
    feasible = [r for r in records if r.feasible]
    if feasible:
        return min(feasible, key=lambda r: (r.discord_certified, r.restart_index)).x_best
    if records:
        return min(records, key=lambda r: (r.objective, r.restart_index)).x_best
    return None


def run_point(expr: BellExpression, p: float, cfg: SweepConfig,
              prev_best: Optional[Sequence[float]] = None, workers: int = 1) -> List[RunRecord]:
    """
    `cfg.restarts` basin-hopping runs at one p.

    An all-infeasible point returns its records with feasible=False everywhere.
    """
    jobs = [(expr.name, p, i, cfg, prev_best) for i in range(cfg.restarts)]
    records = sorted(_execute(jobs, workers, None), key=_sort_key)
    n_ok = sum(r.feasible for r in records)
    if n_ok == 0:
        logger.warning(f"⚠️ {expr.name} p={p:.4f}: no feasible run out of {len(records)}")
    return records


# ============================================================================
# AGGREGATION
# ============================================================================

def aggregate(expr_name: str, records: Sequence[RunRecord]) -> Aggregate:
    """Deterministic per-p fold: min certified discord and counts."""
    if not records:
        return Aggregate(expr_name=expr_name)
    df = pd.DataFrame([{"p": r.p, "feasible": r.feasible, "discord": r.discord_certified}
                       for r in records])
    rows = []
    for p, group in df.groupby("p", sort=True):
        ok = group[group["feasible"]]
        rows.append(AggregateRow(
            p=float(p),
            min_discord=float(ok["discord"].min()) if len(ok) else None,
            count_feasible=int(len(ok)),
            count_total=int(len(group)),
        ))
    return Aggregate(expr_name=expr_name, rows=rows)


# ============================================================================
# SWEEP
# ============================================================================

def sweep(cfg: SweepConfig, show_progress: bool = False,
          workers: Optional[int] = None) -> Tuple[Aggregate, List[RunRecord]]:
    """
    Full sweep over cfg.p_grid (ascending).

    warm_start chains each p from the previous p's best vector, so points run
    in order with restarts in parallel; other strategies submit every
    (p, restart) job at once.
    """
    expr = get_expression(cfg.expr_name)
    workers = ColabCompat.worker_count() if workers is None else workers
    total = len(cfg.p_grid) * cfg.restarts
    logger.info(f"📈 Sweep {expr.name}: {len(cfg.p_grid)} points × {cfg.restarts} restarts, "
                f"strategy={cfg.strategy}, workers={workers}")

    progress = tqdm(total=total, desc=f"   📈 {expr.name} sweep", disable=not show_progress)
    records: List[RunRecord] = []
    try:
        if cfg.strategy == "warm_start":
            prev_best = None
            for p in cfg.p_grid:
                jobs = [(expr.name, p, i, cfg, prev_best) for i in range(cfg.restarts)]
                point = sorted(_execute(jobs, workers, progress), key=_sort_key)
                records.extend(point)
                prev_best = best_vector(point)
        else:
            jobs = [(expr.name, p, i, cfg, None) for p in cfg.p_grid for i in range(cfg.restarts)]
            records = _execute(jobs, workers, progress)
    finally:
        progress.close()

    records.sort(key=_sort_key)
    return aggregate(expr.name, records), records
