"""Simulated projective measurements and the closed measurement-feedback loop.

Every objective value seen by the optimizer is an average of sampled
independent-set sizes, and every sample is appended to a global log so the
best set found can be tracked against the number of measurements spent.

Random streams: experiment ``k`` of a batch with master seed ``s`` uses
``default_rng(SeedSequence(s).spawn(K)[k])``, see :func:`experiment_rngs`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .anneal import run_qaa
from .evolve import PropagatorConfig
from .qaoa import (
    HEURISTIC_SEED_P3,
    OptimizerConfig,
    OptResult,
    QAOAParams,
    interpolate_params,
    minimize,
    qaoa_state,
    random_params,
)
from .subspace import ISBasis, ProjectedHamiltonian, build_is_basis, build_projected_hamiltonian
from .udgraph import Graph

__all__ = [
    "HISTORY_COLUMNS",
    "MeasurementRecord",
    "NoisyEstimate",
    "NoisyRunResult",
    "average_curves",
    "best_is_curve",
    "estimate_objective",
    "experiment_rngs",
    "history_rows",
    "run_noisy_qaa_experiment",
    "run_noisy_qaoa_experiment",
    "sample_measurement",
    "write_history_csv",
]

M_MIN = 10
HISTORY_COLUMNS = ("m", "outcome_bitmask_hex", "is_size", "best_so_far", "phase_tag", "level_p",
                   "experiment_id")


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: int  # bitmask of excited atoms
    is_size: int
    sequence_index: int  # 1-based global counter m
    phase_tag: str = "objective_eval"
    level_p: int = 0

    @property
    def vertices(self) -> list[int]:
        return [v for v in range(self.outcome.bit_length()) if self.outcome >> v & 1]


class MeasurementLog:
    """Append-only record of every simulated shot, with an optional cap."""

    def __init__(self, budget: int | None = None):
        self.records: list[MeasurementRecord] = []
        self.budget = budget

    @property
    def remaining(self) -> float:
        return math.inf if self.budget is None else self.budget - len(self.records)

    def add(self, mask: int, size: int, tag: str, level: int) -> None:
        self.records.append(MeasurementRecord(mask, size, len(self.records) + 1, tag, level))


def _probabilities(psi: np.ndarray) -> np.ndarray:
    probs = np.abs(np.asarray(psi)) ** 2
    total = probs.sum()
    if not total > 0:
        raise ValueError("state has zero norm")
    return probs / total


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> int:
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(cdf) - 1)


def sample_measurement(psi: np.ndarray, basis: ISBasis, rng: np.random.Generator,
                       sequence_index: int = 1) -> MeasurementRecord:
    """Collapse onto one basis state with the Born-rule probabilities."""
    i = _draw(np.cumsum(_probabilities(psi)), rng)
    return MeasurementRecord(int(basis.states[i]), int(basis.sizes[i]), sequence_index)


@dataclass(frozen=True)
class NoisyEstimate:
    mean: float
    m_used: int
    sem: float
    capped: bool = False


def estimate_objective(
    psi: np.ndarray,
    basis: ISBasis,
    eps_m: float,
    rng: np.random.Generator,
    budget_cap: int | None = None,
    log: MeasurementLog | None = None,
    tag: str = "objective_eval",
    level: int = 0,
) -> NoisyEstimate:
    """Sample ``f = -|s|`` until at least 10 shots were taken and the
    standard error of the mean (Bessel-corrected) is at most ``eps_m``.

    ``budget_cap`` bounds the shots of this call; the shared ``log`` (if any)
    bounds them further by its remaining global budget.  Hitting either cap
    returns the estimate so far with ``capped=True``.
    """
    if not eps_m > 0:
        raise ValueError("eps_m must be positive")
    cdf = np.cumsum(_probabilities(psi))
    cap = math.inf if budget_cap is None else budget_cap
    if log is not None:
        cap = min(cap, log.remaining)
    total = total_sq = 0.0
    m = 0
    sem = math.inf
    while True:
        if m >= M_MIN:
            mean = total / m
            var = max(total_sq - m * mean * mean, 0.0) / (m - 1)
            sem = math.sqrt(var / m)
            if sem <= eps_m:
                return NoisyEstimate(mean, m, sem)
        if m >= cap:
            mean = total / m if m else math.nan
            return NoisyEstimate(mean, m, sem, capped=True)
        i = _draw(cdf, rng)
        size = int(basis.sizes[i])
        if log is not None:
            log.add(int(basis.states[i]), size, tag, level)
        total -= size
        total_sq += size * size
        m += 1


# -- closed-loop experiments ---------------------------------------------------


@dataclass
class NoisyRunResult:
    history: list[MeasurementRecord]
    mis_size: int
    levels: list[tuple[int, OptResult]] = field(default_factory=list)
    budget_exhausted: bool = False

    @property
    def best_curve(self) -> np.ndarray:
        return best_is_curve(self.history)

    @property
    def measurements_to_mis(self) -> int | None:
        """First ``m`` at which a maximum independent set was observed."""
        for r in self.history:
            if r.is_size == self.mis_size:
                return r.sequence_index
        return None


def best_is_curve(history: Sequence[MeasurementRecord]) -> np.ndarray:
    """Largest set size seen among the first ``m`` shots, for ``m = 1..M``."""
    if not history:
        return np.zeros(0, dtype=np.int64)
    return np.maximum.accumulate(np.array([r.is_size for r in history], dtype=np.int64))


class _BudgetSpent(Exception):
    pass


def _prepare(graph: Graph, basis, h):
    if basis is None:
        basis = build_is_basis(graph)
    if h is None:
        h = build_projected_hamiltonian(basis)
    return basis, h


def run_noisy_qaoa_experiment(
    graph: Graph,
    rng: np.random.Generator,
    total_measurement_budget: int,
    p_start: int = 3,
    p_max: int | None = None,
    optimizer_cfg: OptimizerConfig | None = None,
    eps_m: float = 0.05,
    seed_mode: str = "heuristic",
    basis: ISBasis | None = None,
    h: ProjectedHamiltonian | None = None,
) -> NoisyRunResult:
    """Optimize QAOA from sampled objective values only.

    Level ``p_start`` starts from the averaged seed point (interpolated up if
    ``p_start > 3``) or from a uniform random draw.  Further levels up to
    ``p_max`` start from the interpolated previous optimum.  Any budget left
    after the last level is spent measuring the final optimized state
    (``phase_tag="final_sampling"``).
    """
    if total_measurement_budget <= 0:
        raise ValueError("total_measurement_budget must be positive")
    if seed_mode not in ("heuristic", "random"):
        raise ValueError(f"unknown seed_mode {seed_mode!r}")
    if p_max is None:
        p_max = p_start
    if p_start < 1 or p_max < p_start:
        raise ValueError("need 1 <= p_start <= p_max")
    if seed_mode == "heuristic" and p_start < 3:
        raise ValueError("heuristic seeding starts at p = 3")
    cfg = optimizer_cfg if optimizer_cfg is not None else OptimizerConfig.noisy()
    basis, h = _prepare(graph, basis, h)
    log = MeasurementLog(total_measurement_budget)
    result = NoisyRunResult(log.records, basis.mis_size)

    if seed_mode == "heuristic":
        start = QAOAParams(HEURISTIC_SEED_P3[:2], HEURISTIC_SEED_P3[2:])
        while start.p < p_start:
            start = interpolate_params(start)
    else:
        start = random_params(p_start, rng)

    best = start
    for p in range(p_start, p_max + 1):
        if p > p_start:
            start = interpolate_params(best)

        def f(x, p=p):
            if log.remaining <= 0:
                raise _BudgetSpent
            psi = qaoa_state(basis, h, QAOAParams.from_vector(x, p))
            est = estimate_objective(psi, basis, eps_m, rng, log=log, level=p)
            if est.capped:
                raise _BudgetSpent
            return est.mean

        try:
            res = minimize(f, start.to_vector(), cfg)
        except _BudgetSpent:
            result.budget_exhausted = True
            return result
        result.levels.append((p, res))
        best = QAOAParams.from_vector(res.x, p)

    psi = qaoa_state(basis, h, best)
    cdf = np.cumsum(_probabilities(psi))
    while log.remaining > 0:
        i = _draw(cdf, rng)
        log.add(int(basis.states[i]), int(basis.sizes[i]), "final_sampling", p_max)
    return result


def run_noisy_qaa_experiment(
    graph: Graph,
    T: float,
    n_repeats: int,
    rng: np.random.Generator,
    omega0: float = 1.0,
    delta0: float = 6.0,
    cfg: PropagatorConfig = PropagatorConfig(),
    basis: ISBasis | None = None,
    h: ProjectedHamiltonian | None = None,
) -> NoisyRunResult:
    """Anneal once for time ``T`` and measure the output ``n_repeats`` times."""
    if T < 0:
        raise ValueError("T must be non-negative")
    if n_repeats < 0:
        raise ValueError("n_repeats must be non-negative")
    basis, h = _prepare(graph, basis, h)
    if T == 0:
        psi = np.zeros(basis.dim, dtype=np.complex128)
        psi[0] = 1.0
    else:
        psi = run_qaa(basis, h, omega0, delta0, T, cfg).final_state
    cdf = np.cumsum(_probabilities(psi))
    log = MeasurementLog(n_repeats)
    for _ in range(n_repeats):
        i = _draw(cdf, rng)
        log.add(int(basis.states[i]), int(basis.sizes[i]), "final_sampling", 0)
    return NoisyRunResult(log.records, basis.mis_size)


def experiment_rngs(master_seed: int, count: int) -> list[np.random.Generator]:
    """Independent streams: child ``k`` of ``SeedSequence(master_seed)``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(count)]


def average_curves(curves: Iterable[np.ndarray], length: int | None = None) -> np.ndarray:
    """Pointwise mean; shorter curves are extended by their last value."""
    curves = [np.asarray(c, dtype=float) for c in curves]
    if not curves:
        return np.zeros(0)
    if length is None:
        length = max(len(c) for c in curves)
    out = np.zeros(length)
    for c in curves:
        if len(c) == 0:
            continue
        ext = np.full(length, c[-1])
        k = min(len(c), length)
        ext[:k] = c[:k]
        out += ext
    return out / len(curves)


def history_rows(result: NoisyRunResult, experiment_id: int) -> list[tuple]:
    best = 0
    rows = []
    for r in result.history:
        best = max(best, r.is_size)
        rows.append((r.sequence_index, format(r.outcome, "x"), r.is_size, best, r.phase_tag,
                     r.level_p, experiment_id))
    return rows


def write_history_csv(fh: TextIO, results: Sequence[NoisyRunResult]) -> None:
    """One row per shot of every experiment, experiments in order."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for k, res in enumerate(results):
        w.writerows(history_rows(res, k))
