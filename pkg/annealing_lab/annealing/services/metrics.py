"""Benchmark metrics over sampling results.

Time-to-solution, two-level and chain equilibrium models with inverse
temperature fits, exponential scaling fits, transition-probability scans and
the import of counts produced by external samplers.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from django.conf import settings
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.optimize import minimize_scalar
from scipy.special import comb

from annealing.exceptions import InsufficientDataError, InvalidInputError, UnidentifiableFitError
from annealing.services.bitstrings import BasisState
from annealing.services.evolve import SamplingResult, Schedule, converged_run, make_anneal_spec, sample
from annealing.services.ising import IsingModel
from annealing.services.sat2 import DegeneracyStats

logger = logging.getLogger(__name__)

KELVIN_CONSTANT = 0.206
PROBABILITY_FLOOR = 1e-15
DEFAULT_P_TARGET = 0.99
CHAIN_LEVELS = 5

Statistic = Literal['median', 'mean']


# ---------------------------------------------------------------------------
# Time to solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TtsResult:
    p: float
    T_A: float
    P_target: float
    tts: float

    def to_json_dict(self) -> dict:
        return {'p': self.p, 'T_A': self.T_A, 'P_target': self.P_target,
                'tts': self.tts if math.isfinite(self.tts) else None}


def tts(p: float, T_A: float, P_target: float = DEFAULT_P_TARGET) -> float:
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"Success probability {p} outside [0, 1].")
    if not 0.0 < P_target < 1.0:
        raise InvalidInputError(f"Target probability {P_target} outside (0, 1).")
    if not T_A > 0:
        raise InvalidInputError(f"Annealing time must be positive, got {T_A}.")
    if p >= 1.0 - PROBABILITY_FLOOR:
        return float(T_A)
    if p <= PROBABILITY_FLOOR:
        return math.inf
    return math.log1p(-P_target) / math.log1p(-p) * T_A


def tts_result(p: float, T_A: float, P_target: float = DEFAULT_P_TARGET) -> TtsResult:
    return TtsResult(float(p), float(T_A), float(P_target), tts(p, T_A, P_target))


# ---------------------------------------------------------------------------
# Equilibrium models
# ---------------------------------------------------------------------------

class EquilibriumModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    g0: int = Field(ge=1)
    g1: int = Field(ge=0)
    delta_e: float = Field(ge=0)
    beta: float = Field(ge=0)


@dataclass(frozen=True)
class BetaFit:
    beta: float
    temperature_kelvin: float
    residual: float
    kind: str = 'two-level'
    points: list[tuple[float, float, float]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {'beta': self.beta, 'temperature_kelvin': self.temperature_kelvin,
                'temperature_mk': 1e3 * self.temperature_kelvin, 'residual': self.residual, 'kind': self.kind}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.points, columns=['x', 'y', 'y_fit'])


def make_equilibrium_model(**kwargs) -> EquilibriumModel:
    try:
        return EquilibriumModel(**kwargs)
    except ValidationError as exc:
        raise InvalidInputError(str(exc)) from exc


def equilibrium_p0(model: EquilibriumModel) -> float:
    return 1.0 / (1.0 + model.g1 / model.g0 * math.exp(-model.beta * model.delta_e))


def temperature_from_beta(beta: float) -> float:
    if not beta > 0:
        raise InvalidInputError(f"Inverse temperature must be positive, got {beta}.")
    return KELVIN_CONSTANT / beta


def chain_inverse_p0(n_spins: int, beta: float, delta_e: float, n_max: int = CHAIN_LEVELS) -> float:
    """``sum_{n=0}^{n_max} C(N-1, n) exp(-n beta dE)``, the inverse ground probability of a chain."""
    if n_spins < 2:
        raise InvalidInputError("A chain needs at least two spins.")
    n = np.arange(0, min(n_max, n_spins - 1) + 1)
    return float(np.sum(comb(n_spins - 1, n) * np.exp(-n * beta * delta_e)))


def _fit_log_beta(log_target: np.ndarray, log_model) -> tuple[float, float]:
    def objective(log_beta):
        return float(np.sum((log_target - log_model(math.exp(log_beta))) ** 2))

    found = minimize_scalar(objective, bounds=(-12.0, 8.0), method='bounded', options={'xatol': 1e-12})
    return math.exp(found.x), math.sqrt(found.fun)


def _checked_probabilities(values: Iterable[float]) -> np.ndarray:
    p = np.asarray(list(values), dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise InvalidInputError("Measured probabilities must lie in (0, 1).")
    return p


def fit_beta(records: Sequence[tuple[int, int, float, float]]) -> BetaFit:
    """Least squares of ``log(1/p)`` against the two-level model over beta."""
    if not records:
        raise InsufficientDataError("A beta fit needs at least one record.")
    g0, g1, de = (np.array([r[k] for r in records], dtype=float) for k in range(3))
    p = _checked_probabilities(r[3] for r in records)
    if np.all(de == 0) or np.all(g1 == 0):
        raise UnidentifiableFitError("Beta is unidentifiable when every record has a zero gap or no excited states.")
    log_target = -np.log(p)

    def log_model(beta):
        return np.log1p(g1 / g0 * np.exp(-beta * de))

    beta, residual = _fit_log_beta(log_target, log_model)
    points = [(float(x), float(y), float(f)) for x, y, f in zip(de, 1 / p, np.exp(log_model(beta)))]
    logger.info("Two-level fit: beta=%.4f (T=%.1f mK) over %s records.", beta, 1e3 * temperature_from_beta(beta), len(records))
    return BetaFit(beta, temperature_from_beta(beta), residual, 'two-level', points)


def fit_beta_chain(records: Sequence[tuple[int, float, float]], n_max: int = CHAIN_LEVELS) -> BetaFit:
    """Fit of ``1/p`` against :func:`chain_inverse_p0` for records (n_spins, delta_e, p)."""
    if not records:
        raise InsufficientDataError("A chain fit needs at least one record.")
    n_spins = [int(r[0]) for r in records]
    de = np.array([r[1] for r in records], dtype=float)
    p = _checked_probabilities(r[2] for r in records)
    if np.all(de == 0):
        raise UnidentifiableFitError("Beta is unidentifiable when every record has a zero gap.")
    log_target = -np.log(p)

    def log_model(beta):
        return np.log([chain_inverse_p0(n, beta, d, n_max) for n, d in zip(n_spins, de)])

    beta, residual = _fit_log_beta(log_target, log_model)
    points = [(float(n), float(y), float(f)) for n, y, f in zip(n_spins, 1 / p, np.exp(log_model(beta)))]
    return BetaFit(beta, temperature_from_beta(beta), residual, 'chain', points)


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    points: list[tuple[int, float]]
    exponent: float
    intercept: float
    residual: float
    statistic: str = 'median'

    def to_json_dict(self) -> dict:
        return {'points': [list(p) for p in self.points], 'exponent': self.exponent,
                'intercept': self.intercept, 'residual': self.residual, 'statistic': self.statistic,
                'median_convention': 'lower-middle element for even counts'}

    def to_frame(self) -> pd.DataFrame:
        x = np.array([p[0] for p in self.points], dtype=float)
        return pd.DataFrame({'x': x, 'y': [p[1] for p in self.points],
                             'y_fit': np.exp(self.intercept + self.exponent * x)})


def fit_scaling_exponent(points: Sequence[tuple[int, float]], statistic: Statistic = 'median') -> ScalingFit:
    """Least squares of ``ln(value) = a + r N``."""
    if len(points) < 3:
        raise InsufficientDataError("A scaling fit needs at least three points.")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise InvalidInputError("Scaling fits need finite positive values.")
    design = np.column_stack((np.ones_like(x), x))
    (intercept, exponent), *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
    residual = float(np.linalg.norm(design @ (intercept, exponent) - np.log(y)))
    return ScalingFit([(int(a), float(b)) for a, b in zip(x, y)], float(exponent), float(intercept), residual, statistic)


def _statistic(values: Sequence[float], statistic: Statistic) -> float:
    if statistic == 'median':
        censored = sum(math.isinf(v) for v in values)
        if censored * 2 >= len(values):
            logger.warning("%s of %s values are infinite; the median is censored.", censored, len(values))
            return math.inf
        ordered = sorted(values)
        return float(ordered[(len(ordered) - 1) // 2])
    if statistic == 'mean':
        return float(np.mean(values))
    raise InvalidInputError(f"Unknown statistic {statistic!r}.")


def aggregate_ensemble(groups: Mapping[int, Sequence[float]], statistic: Statistic = 'median') -> list[tuple[int, float]]:
    """Per-size statistic; the median of an even count is its lower-middle element.

    A median over a group where at least half the values are infinite is infinite.
    """
    points = []
    for n in sorted(groups):
        values = list(groups[n])
        if not values:
            raise InsufficientDataError(f"No results for N={n}.")
        points.append((int(n), _statistic(values, statistic)))
    return points


def scaling_points(paths: Iterable[Union[str, Path]], quantity: Literal['tts', 'inverse_p'] = 'tts',
                   statistic: Statistic = 'median') -> list[tuple[int, float]]:
    """Aggregate per-problem entries of anneal result files into per-size points."""
    groups: dict[int, list[float]] = {}
    for path in paths:
        payload = json.loads(Path(path).read_text())
        for entry in payload.get('results', []):
            if quantity == 'tts':
                value = entry['tts']['tts']
                value = math.inf if value is None else float(value)
            else:
                p = float(entry['sampling']['total_success'])
                value = math.inf if p <= 0 else 1.0 / p
            groups.setdefault(int(entry['n_vars']), []).append(value)
    return aggregate_ensemble(groups, statistic)


def fes_points(stats_by_n: Mapping[int, DegeneracyStats]) -> list[tuple[int, float]]:
    """Mean first-excited-level degeneracy per problem size."""
    return aggregate_ensemble({n: list(stats.fes_degeneracies) for n, stats in stats_by_n.items()}, 'mean')


def fes_points_from_reports(paths: Iterable[Union[str, Path]]) -> list[tuple[int, float]]:
    """Pool ``gen_problems`` ensemble reports (stats.json or a run's results.json) by size."""
    groups: dict[int, list[int]] = {}
    for path in paths:
        try:
            payload = json.loads(Path(path).read_text())
            report = payload.get('results', payload)
            n = int(report['config']['n_vars'])
            degeneracies = report['ensemble']['fes_degeneracies']
        except FileNotFoundError as exc:
            raise InvalidInputError(f"Ensemble report {path} does not exist.") from exc
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InvalidInputError(f"{path} is not an ensemble report.") from exc
        groups.setdefault(n, []).extend(degeneracies)
    return aggregate_ensemble(groups, 'mean')


# ---------------------------------------------------------------------------
# Transition scans
# ---------------------------------------------------------------------------

class TauPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float = Field(default_factory=lambda: getattr(settings, 'LAB_DEFAULT_TAU', 0.02), gt=0)
    converge: bool = True
    tol: float | None = Field(default=None, gt=0)
    max_halvings: int | None = Field(default=None, ge=0)


@dataclass(frozen=True)
class TransitionRecord:
    T_A: float
    p: float
    tau: float

    @property
    def q(self) -> float:
        return min(1.0, max(0.0, 1.0 - self.p))


@dataclass
class TransitionScan:
    records: list[TransitionRecord]
    split: int
    rate: float
    rate_intercept: float
    rate_r2: float
    slope: float
    slope_intercept: float
    slope_r2: float

    def to_json_dict(self) -> dict:
        return {
            'records': [{'T_A': r.T_A, 'p': r.p, 'one_minus_p': r.q, 'tau': r.tau} for r in self.records],
            'split_T_A': self.records[self.split].T_A,
            'exponential': {'rate': self.rate, 'intercept': self.rate_intercept, 'r2': self.rate_r2},
            'power': {'slope': self.slope, 'intercept': self.slope_intercept, 'r2': self.slope_r2},
        }

    def to_frame(self) -> pd.DataFrame:
        t = np.array([r.T_A for r in self.records])
        fit = np.where(np.arange(len(t)) < self.split,
                       np.exp(self.rate_intercept - self.rate * t),
                       np.exp(self.slope_intercept) * t ** self.slope)
        return pd.DataFrame({'x': t, 'y': [r.q for r in self.records], 'y_fit': fit})


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Returns (slope, intercept, sum of squared residuals, r2)."""
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    sse = float(residual @ residual)
    spread = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / spread if spread > 0 else 1.0
    return float(slope), float(intercept), sse, r2


def fit_transition_regimes(records: list[TransitionRecord]) -> TransitionScan:
    """Exponential fit on the short-time segment, log-log fit on the long-time segment.

    The split is the one minimizing the combined squared residual; each segment
    keeps at least two points.
    """
    usable = [r for r in records if r.q > 0]
    if len(usable) < len(records):
        logger.warning("Dropped %s records with 1-p = 0 from the regime fit.", len(records) - len(usable))
    if len(usable) < 4:
        raise InsufficientDataError("A two-regime fit needs at least four points with 1-p > 0.")
    t = np.array([r.T_A for r in usable])
    log_q = np.log([r.q for r in usable])
    best = None
    for split in range(2, len(usable) - 1):
        exp_fit = _linear_fit(t[:split], log_q[:split])
        pow_fit = _linear_fit(np.log(t[split:]), log_q[split:])
        total = exp_fit[2] + pow_fit[2]
        if best is None or total < best[0]:
            best = (total, split, exp_fit, pow_fit)
    _, split, exp_fit, pow_fit = best
    return TransitionScan(usable, split, -exp_fit[0], exp_fit[1], exp_fit[3], pow_fit[0], pow_fit[1], pow_fit[3])


def transition_scan(model: IsingModel, ground_states: list[BasisState], schedule: Schedule,
                    T_A_grid: Sequence[float], tau_policy: TauPolicy | None = None) -> TransitionScan:
    grid = [float(t) for t in T_A_grid]
    if any(t <= 0 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("The annealing-time grid must be positive and ascending.")
    if len(grid) < 4:
        raise InsufficientDataError("A transition scan needs at least four annealing times.")
    policy = tau_policy or TauPolicy()
    records = []
    for T_A in grid:
        spec = make_anneal_spec(model=model, schedule=schedule, T_A=T_A, tau=min(policy.tau, T_A))
        if policy.converge:
            outcome = converged_run(spec, ground_states, policy.tol, policy.max_halvings)
            records.append(TransitionRecord(T_A, outcome.result.total_success, outcome.tau))
        else:
            records.append(TransitionRecord(T_A, sample(spec, ground_states).total_success, spec.tau))
        logger.info("T_A=%g: 1-p=%.3e", T_A, records[-1].q)
    return fit_transition_regimes(records)


# ---------------------------------------------------------------------------
# External sampler counts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleCounts:
    counts: dict[BasisState, int]
    metadata: dict = field(default_factory=dict)

    @property
    def total_reads(self) -> int:
        return int(sum(self.counts.values()))


def _validated_counts(counts: Mapping[BasisState, int], metadata: dict) -> SampleCounts:
    if any(c < 0 for c in counts.values()):
        raise InvalidInputError("Sample counts must be non-negative.")
    result = SampleCounts(dict(counts), metadata)
    if result.total_reads <= 0:
        raise InvalidInputError("Sample counts contain no reads.")
    return result


def import_sample_counts(path: Union[str, Path]) -> SampleCounts:
    """Read ``bitstring,count`` rows plus an optional ``.json`` metadata sidecar."""
    from annealing.services.problem_io import validate_document

    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"Counts file {path} does not exist.")
    try:
        frame = pd.read_csv(path, dtype={'bitstring': str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"Malformed counts file {path}: {exc}") from exc
    if list(frame.columns) != ['bitstring', 'count']:
        raise InvalidInputError(f"Counts file {path} needs exactly the columns bitstring,count.")
    if frame['count'].isna().any() or not pd.api.types.is_integer_dtype(frame['count']):
        raise InvalidInputError(f"Counts in {path} must be integers.")

    counts: dict[BasisState, int] = {}
    for bitstring, count in zip(frame['bitstring'], frame['count']):
        state = BasisState.from_string(str(bitstring))
        counts[state] = counts.get(state, 0) + int(count)
    if len({s.n for s in counts}) > 1:
        raise InvalidInputError(f"Bitstrings in {path} differ in length.")

    metadata = {}
    sidecar = path.with_suffix('.json')
    if sidecar.exists():
        metadata = json.loads(sidecar.read_text())
        validate_document(metadata, 'sample_counts_metadata')
    result = _validated_counts(counts, metadata)
    if 'num_reads' in metadata and metadata['num_reads'] != result.total_reads:
        logger.warning("Sidecar reports %s reads but the file holds %s.", metadata['num_reads'], result.total_reads)
    return result


def counts_to_sampling(counts: SampleCounts, targets: list[BasisState]) -> SamplingResult:
    if len(set(targets)) != len(targets):
        raise InvalidInputError("Target states must be distinct.")
    total = counts.total_reads
    probabilities = {t: counts.counts.get(t, 0) / total for t in targets}
    return SamplingResult(probabilities, float(sum(probabilities.values())),
                          {'source': 'external', 'total_reads': total, **counts.metadata})
