"""Closed-system annealing by second-order product-formula integration.

``H(s) = A(s) H_I + B(s) H_P`` with ``H_I = -sum_k X_k`` and ``H_P`` the
diagonal Ising Hamiltonian. One Trotter step of length ``dt`` at midpoint
``s_k`` applies ``exp(-i dt A H_I / 2) exp(-i dt B H_P) exp(-i dt A H_I / 2)``.
Time is dimensionless (hbar = 1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np
import pandas as pd
from django.conf import settings
from pydantic import BaseModel, ConfigDict, Field, InstanceOf, ValidationError, model_validator

from annealing.exceptions import InvalidInputError, ResourceLimitError
from annealing.services.bitstrings import BasisState
from annealing.services.ising import IsingModel, diagonal_energies

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-10


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Control functions A(s), B(s); ``linear`` means A = 1 - s and B = s."""

    kind: str = 'linear'
    s_points: tuple[float, ...] = ()
    a_points: tuple[float, ...] = ()
    b_points: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == 'linear':
            return
        if self.kind != 'tabulated':
            raise InvalidInputError(f"Unknown schedule kind {self.kind!r}.")
        s = np.asarray(self.s_points, dtype=float)
        if not (len(s) == len(self.a_points) == len(self.b_points)) or len(s) < 2:
            raise InvalidInputError("A tabulated schedule needs at least two (s, A, B) rows of equal length.")
        if np.any(np.diff(s) <= 0):
            raise InvalidInputError("Schedule s values must be strictly increasing.")
        if s[0] > 0.0 or s[-1] < 1.0:
            raise InvalidInputError("Schedule must cover s in [0, 1].")
        if min(self.a_points) < 0 or min(self.b_points) < 0:
            raise InvalidInputError("Schedule amplitudes must be non-negative.")
        a0, b0, a1, b1 = self.A(0.0), self.B(0.0), self.A(1.0), self.B(1.0)
        if b0 > 0 and not a0 > 10 * b0:
            raise InvalidInputError(f"Schedule must start transverse-dominated, got A(0)={a0}, B(0)={b0}.")
        if a1 > 0 and not b1 > 10 * a1:
            raise InvalidInputError(f"Schedule must end problem-dominated, got A(1)={a1}, B(1)={b1}.")

    @classmethod
    def linear(cls) -> Schedule:
        return cls()

    @classmethod
    def tabulated(cls, s: Iterable[float], a: Iterable[float], b: Iterable[float]) -> Schedule:
        return cls('tabulated', tuple(float(v) for v in s), tuple(float(v) for v in a), tuple(float(v) for v in b))

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> Schedule:
        try:
            frame = pd.read_csv(path)
        except (OSError, ValueError) as exc:
            raise InvalidInputError(f"Cannot read schedule {path}: {exc}") from exc
        frame.columns = [str(c).strip() for c in frame.columns]
        missing = {'s', 'A', 'B'} - set(frame.columns)
        if missing:
            raise InvalidInputError(f"Schedule {path} lacks columns {sorted(missing)}.")
        frame = frame.sort_values('s')
        return cls.tabulated(frame['s'], frame['A'], frame['B'])

    def A(self, s):
        if self.kind == 'linear':
            return 1.0 - s
        return np.interp(s, self.s_points, self.a_points)

    def B(self, s):
        if self.kind == 'linear':
            return s
        return np.interp(s, self.s_points, self.b_points)

    def describe(self) -> dict:
        if self.kind == 'linear':
            return {'kind': 'linear'}
        return {'kind': 'tabulated', 's': list(self.s_points), 'A': list(self.a_points), 'B': list(self.b_points)}


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probability(self, state: BasisState) -> float:
        return float(abs(self.amplitudes[state.index]) ** 2)

    def overlap(self, other: StateVector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def diagonal_expectation(self, diagonal: np.ndarray) -> float:
        return float(np.dot(np.abs(self.amplitudes) ** 2, diagonal))

    def transverse_expectation(self) -> float:
        return float(np.vdot(self.amplitudes, apply_transverse(self.amplitudes, self.n_qubits)).real)

    def copy(self) -> StateVector:
        return StateVector(self.n_qubits, self.amplitudes.copy())


def _check_state_cap(n: int, cap: int | None = None) -> None:
    limit = cap if cap is not None else getattr(settings, 'LAB_STATE_CAP', 26)
    if n < 1:
        raise InvalidInputError("A state needs at least one qubit.")
    if n > limit:
        raise ResourceLimitError(f"A {n}-qubit state vector exceeds the cap of {limit} qubits.")


def initial_state_uniform(n: int, cap: int | None = None) -> StateVector:
    _check_state_cap(n, cap)
    dim = 2 ** n
    return StateVector(n, np.full(dim, dim ** -0.5, dtype=np.complex128))


def basis_state(bits: BasisState, cap: int | None = None) -> StateVector:
    _check_state_cap(bits.n, cap)
    amplitudes = np.zeros(2 ** bits.n, dtype=np.complex128)
    amplitudes[bits.index] = 1.0
    return StateVector(bits.n, amplitudes)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _qubit_view(vectors: np.ndarray, n: int, k: int) -> np.ndarray:
    # qubit k (1-based) is bit position n - k of the index
    return vectors.reshape((2 ** (k - 1), 2, 2 ** (n - k)) + vectors.shape[1:])


def apply_transverse(vectors: np.ndarray, n: int) -> np.ndarray:
    """``H_I @ vectors`` for a vector or a (2**n, m) block."""
    out = np.zeros_like(vectors)
    for k in range(1, n + 1):
        _qubit_view(out, n, k)[...] -= _qubit_view(vectors, n, k)[:, ::-1]
    return out


def rotate_transverse(psi: np.ndarray, n: int, angle: float) -> None:
    """In place ``psi <- exp(-i angle H_I) psi``, a product of single-qubit x-rotations."""
    c, s = np.cos(angle), 1j * np.sin(angle)
    for k in range(1, n + 1):
        view = _qubit_view(psi, n, k)
        a0 = view[:, 0].copy()
        a1 = view[:, 1]
        view[:, 0] = c * a0 + s * a1
        view[:, 1] = s * a0 + c * a1


def apply_diagonal_phase(psi: np.ndarray, diagonal: np.ndarray, angle: float) -> None:
    """In place ``psi <- exp(-i angle H_P) psi``."""
    psi *= np.exp((-1j * angle) * diagonal)


def _trotter(psi: np.ndarray, n: int, diagonal: np.ndarray, schedule: Schedule,
             s_start: float, s_end: float, duration: float, tau: float) -> int:
    steps = max(1, int(round(duration / tau)))
    dt = duration / steps
    mids = s_start + (s_end - s_start) * (np.arange(1, steps + 1) - 0.5) / steps
    a_values = np.asarray(schedule.A(mids), dtype=float) * np.ones(steps)
    b_values = np.asarray(schedule.B(mids), dtype=float) * np.ones(steps)

    # neighbouring half x-rotations commute and are merged
    if a_values[0]:
        rotate_transverse(psi, n, 0.5 * dt * a_values[0])
    for k in range(steps):
        if b_values[k]:
            apply_diagonal_phase(psi, diagonal, dt * b_values[k])
        angle = 0.5 * dt * (a_values[k] + (a_values[k + 1] if k + 1 < steps else 0.0))
        if angle:
            rotate_transverse(psi, n, angle)
    return steps


def _check_segment(s_start: float, s_end: float, duration: float, tau: float) -> None:
    if not duration > 0:
        raise InvalidInputError(f"Segment duration must be positive, got {duration}.")
    if not tau > 0 or tau > duration:
        raise InvalidInputError(f"Step tau={tau} must lie in (0, duration={duration}].")
    for s in (s_start, s_end):
        if not 0.0 <= s <= 1.0:
            raise InvalidInputError(f"Annealing parameter {s} outside [0, 1].")


def evolve_segment(state: StateVector, model: IsingModel, schedule: Schedule, s_start: float,
                   s_end: float, duration: float, tau: float, diagonal: np.ndarray | None = None) -> StateVector:
    _check_segment(s_start, s_end, duration, tau)
    if model.n_spins != state.n_qubits:
        raise InvalidInputError(f"Model has {model.n_spins} spins, state has {state.n_qubits} qubits.")
    if diagonal is None:
        diagonal = diagonal_energies(model)
    out = state.copy()
    _trotter(out.amplitudes, out.n_qubits, diagonal, schedule, s_start, s_end, duration, tau)
    return out


# ---------------------------------------------------------------------------
# Protocols
# ---------------------------------------------------------------------------

def _default_tau() -> float:
    return getattr(settings, 'LAB_DEFAULT_TAU', 0.02)


class AnnealSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: InstanceOf[IsingModel]
    schedule: InstanceOf[Schedule] = Field(default_factory=Schedule.linear)
    T_A: float = Field(gt=0)
    tau: float = Field(default_factory=_default_tau, gt=0)

    @model_validator(mode='after')
    def _tau_within_ramp(self):
        if self.tau > self.T_A:
            raise ValueError(f'tau={self.tau} exceeds T_A={self.T_A}')
        return self

    @property
    def protocol(self) -> str:
        return 'standard'

    def describe(self) -> dict:
        return {'protocol': self.protocol, 'T_A': self.T_A, 'tau': self.tau, 'schedule': self.schedule.describe()}


class ReverseAnnealSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: AnnealSpec
    s_r: float = Field(gt=0, lt=1)
    T_W: float = Field(default=0.0, ge=0)
    initial: InstanceOf[BasisState]

    @model_validator(mode='after')
    def _initial_matches_model(self):
        if self.initial.n != self.base.model.n_spins:
            raise ValueError(f'initial state has {self.initial.n} bits, model has {self.base.model.n_spins} spins')
        return self

    @property
    def protocol(self) -> str:
        return 'reverse'

    @property
    def model(self) -> IsingModel:
        return self.base.model

    @property
    def total_duration(self) -> float:
        return 2 * self.base.T_A + self.T_W

    def describe(self) -> dict:
        return {**self.base.describe(), 'protocol': self.protocol, 's_r': self.s_r, 'T_W': self.T_W,
                'initial': str(self.initial)}


ProtocolSpec = Union[AnnealSpec, ReverseAnnealSpec]


def make_anneal_spec(**kwargs) -> AnnealSpec:
    try:
        return AnnealSpec(**kwargs)
    except ValidationError as exc:
        raise InvalidInputError(str(exc)) from exc


def make_reverse_spec(**kwargs) -> ReverseAnnealSpec:
    try:
        return ReverseAnnealSpec(**kwargs)
    except ValidationError as exc:
        raise InvalidInputError(str(exc)) from exc


def with_tau(spec: ProtocolSpec, tau: float) -> ProtocolSpec:
    if isinstance(spec, ReverseAnnealSpec):
        return spec.model_copy(update={'base': spec.base.model_copy(update={'tau': tau})})
    return spec.model_copy(update={'tau': tau})


@dataclass(frozen=True)
class Leg:
    s_start: float
    s_end: float
    duration: float


def protocol_legs(spec: ProtocolSpec) -> list[Leg]:
    if isinstance(spec, ReverseAnnealSpec):
        legs = [Leg(1.0, spec.s_r, spec.base.T_A)]
        if spec.T_W > 0:
            legs.append(Leg(spec.s_r, spec.s_r, spec.T_W))
        legs.append(Leg(spec.s_r, 1.0, spec.base.T_A))
        return legs
    return [Leg(0.0, 1.0, spec.T_A)]


def protocol_start(spec: ProtocolSpec) -> StateVector:
    if isinstance(spec, ReverseAnnealSpec):
        return basis_state(spec.initial)
    return initial_state_uniform(spec.model.n_spins)


def _run_legs(spec: ProtocolSpec) -> StateVector:
    base = spec.base if isinstance(spec, ReverseAnnealSpec) else spec
    state = protocol_start(spec)
    diagonal = diagonal_energies(base.model)
    for leg in protocol_legs(spec):
        tau = min(base.tau, leg.duration)
        _check_segment(leg.s_start, leg.s_end, leg.duration, tau)
        _trotter(state.amplitudes, state.n_qubits, diagonal, base.schedule, leg.s_start, leg.s_end, leg.duration, tau)
    drift = abs(state.norm() ** 2 - 1.0)
    if drift > NORM_TOLERANCE:
        logger.warning("Norm drifted by %.3e during a %s run.", drift, spec.protocol)
    return state


def run_standard(spec: AnnealSpec) -> StateVector:
    return _run_legs(spec)


def run_reverse(spec: ReverseAnnealSpec) -> StateVector:
    return _run_legs(spec)


def run_protocol(spec: ProtocolSpec) -> StateVector:
    if isinstance(spec, ReverseAnnealSpec):
        return run_reverse(spec)
    return run_standard(spec)


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------

@dataclass
class SamplingResult:
    probabilities: dict[BasisState, float]
    total_success: float
    metadata: dict = field(default_factory=dict)

    def probability_list(self) -> list[float]:
        return list(self.probabilities.values())

    def to_json_dict(self) -> dict:
        return {
            'targets': [str(t) for t in self.probabilities],
            'probabilities': {str(t): p for t, p in self.probabilities.items()},
            'total_success': self.total_success,
            'metadata': self.metadata,
        }


def measure_probabilities(state: StateVector, targets: list[BasisState], metadata: dict | None = None) -> SamplingResult:
    if len(set(targets)) != len(targets):
        raise InvalidInputError("Target states must be distinct.")
    for target in targets:
        if target.n != state.n_qubits:
            raise InvalidInputError(f"Target {target} does not match a {state.n_qubits}-qubit state.")
    probabilities = {t: state.probability(t) for t in targets}
    return SamplingResult(probabilities, float(sum(probabilities.values())), dict(metadata or {}))


def sample(spec: ProtocolSpec, targets: list[BasisState]) -> SamplingResult:
    return measure_probabilities(run_protocol(spec), targets, spec.describe())


@dataclass
class ConvergedSampling:
    result: SamplingResult
    converged: bool
    tau: float
    deltas: list[float]

    def to_json_dict(self) -> dict:
        return {**self.result.to_json_dict(), 'converged': self.converged, 'tau_used': self.tau, 'tau_deltas': self.deltas}


def converged_run(spec: ProtocolSpec, targets: list[BasisState], tol: float | None = None,
                  max_halvings: int | None = None) -> ConvergedSampling:
    """Halve tau until no target probability moves by ``tol`` or more."""
    tol = tol if tol is not None else getattr(settings, 'LAB_CONVERGENCE_TOL', 1e-4)
    max_halvings = max_halvings if max_halvings is not None else getattr(settings, 'LAB_MAX_TAU_HALVINGS', 4)
    base = spec.base if isinstance(spec, ReverseAnnealSpec) else spec
    tau = base.tau
    previous = sample(spec, targets)
    deltas = []
    for _ in range(max_halvings):
        tau /= 2
        current = sample(with_tau(spec, tau), targets)
        delta = max(abs(current.probabilities[t] - previous.probabilities[t]) for t in targets) if targets else 0.0
        deltas.append(delta)
        logger.debug("tau=%.5g: max probability change %.3e", tau, delta)
        if delta < tol:
            return ConvergedSampling(current, True, tau, deltas)
        previous = current
    logger.warning("Probabilities not converged after %s tau halvings (last change %.3e).", max_halvings, deltas[-1] if deltas else 0.0)
    return ConvergedSampling(previous, False, tau, deltas)
