"""Ising problem Hamiltonians.

Energies follow ``E(s) = offset - sum_i h_i s_i - sum_{i<j} J_ij s_i s_j`` with
``s_i = +1`` for a true bit. Spin indices are 1-based, like 2-SAT variables.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from django.conf import settings
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from annealing.exceptions import InvalidInputError, ResourceLimitError
from annealing.services.bitstrings import BasisState
from annealing.services.sat2 import TwoSatProblem

logger = logging.getLogger(__name__)

ENERGY_TOLERANCE = 1e-9
DIAGONAL_CHUNK = 1 << 20


@dataclass(frozen=True)
class IsingModel:
    n_spins: int
    h: tuple[float, ...]
    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        if self.n_spins < 1:
            raise InvalidInputError("An Ising model needs at least one spin.")
        h = tuple(float(v) for v in self.h)
        if len(h) != self.n_spins:
            raise InvalidInputError(f"Expected {self.n_spins} fields, got {len(h)}.")
        canonical: dict[tuple[int, int], float] = {}
        for (i, j), value in dict(self.couplings).items():
            i, j = int(i), int(j)
            if i == j:
                raise InvalidInputError(f"Diagonal coupling ({i}, {j}) is not allowed.")
            if not (1 <= i <= self.n_spins and 1 <= j <= self.n_spins):
                raise InvalidInputError(f"Coupling ({i}, {j}) outside [1, {self.n_spins}].")
            key = (min(i, j), max(i, j))
            canonical[key] = canonical.get(key, 0.0) + float(value)
        canonical = {k: v for k, v in sorted(canonical.items()) if v != 0.0}
        object.__setattr__(self, 'h', h)
        object.__setattr__(self, 'couplings', canonical)
        object.__setattr__(self, 'offset', float(self.offset))

    def terms(self) -> list[tuple[tuple[int, ...], float]]:
        """All non-constant terms as (spin indices, coefficient in the energy)."""
        out = [((i,), -v) for i, v in enumerate(self.h, start=1) if v != 0.0]
        out.extend(((i, j), -v) for (i, j), v in self.couplings.items())
        return out

    def to_json_dict(self) -> dict:
        return {
            'n': self.n_spins,
            'h': list(self.h),
            'j': [[i, j, v] for (i, j), v in self.couplings.items()],
            'offset': self.offset,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> IsingModel:
        return cls(
            n_spins=int(data['n']),
            h=tuple(data['h']),
            couplings={(int(i), int(j)): float(v) for i, j, v in data.get('j', [])},
            offset=float(data.get('offset', 0.0)),
        )


@dataclass(frozen=True)
class EnergyHistogram:
    levels: tuple[float, ...]
    degeneracies: tuple[int, ...]

    @property
    def e0(self) -> float:
        return self.levels[0]

    @property
    def g0(self) -> int:
        return self.degeneracies[0]

    @property
    def e1(self) -> float | None:
        return self.levels[1] if len(self.levels) > 1 else None

    @property
    def g1(self) -> int | None:
        return self.degeneracies[1] if len(self.degeneracies) > 1 else None

    @property
    def delta_e(self) -> float | None:
        return self.levels[1] - self.levels[0] if len(self.levels) > 1 else None

    def matches(self, other: EnergyHistogram, tol: float = ENERGY_TOLERANCE) -> bool:
        return (self.degeneracies == other.degeneracies
                and len(self.levels) == len(other.levels)
                and all(abs(a - b) <= tol for a, b in zip(self.levels, other.levels)))

    def to_json_dict(self) -> dict:
        return {
            'levels': list(self.levels),
            'degeneracies': list(self.degeneracies),
            'g0': self.g0,
            'g1': self.g1,
            'delta_e': self.delta_e,
        }


class ChainSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_spins: int = Field(ge=2)
    coupling_magnitude: float = Field(default=0.5, gt=0)
    flipped_spins: frozenset[int] = frozenset()

    @model_validator(mode='after')
    def _flips_in_range(self):
        bad = sorted(i for i in self.flipped_spins if not 1 <= i <= self.n_spins)
        if bad:
            raise ValueError(f'flipped spins {bad} outside [1, {self.n_spins}]')
        return self


def make_chain_spec(**kwargs) -> ChainSpec:
    try:
        return ChainSpec(**kwargs)
    except ValidationError as exc:
        raise InvalidInputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def map_2sat(problem: TwoSatProblem) -> IsingModel:
    """Each clause contributes ``(e1 s_i - 1)(e2 s_j - 1)``, i.e. 4 when violated and 0 otherwise."""
    h = [0.0] * problem.n_vars
    couplings: dict[tuple[int, int], float] = {}
    offset = 0.0
    for clause in problem.clauses:
        i, j = clause.first.variable_index, clause.second.variable_index
        e1, e2 = clause.first.epsilon, clause.second.epsilon
        key = (min(i, j), max(i, j))
        couplings[key] = couplings.get(key, 0.0) - e1 * e2
        h[i - 1] += e1
        h[j - 1] += e2
        offset += 1.0
    return IsingModel(problem.n_vars, tuple(h), couplings, offset)


def ferro_chain(spec: ChainSpec) -> IsingModel:
    """Open chain whose aligned configurations are the two ground states."""
    couplings = {(i, i + 1): spec.coupling_magnitude for i in range(1, spec.n_spins)}
    model = IsingModel(spec.n_spins, (0.0,) * spec.n_spins, couplings, 0.0)
    return spin_reversal(model, spec.flipped_spins)


def rescale(model: IsingModel, alpha: float) -> IsingModel:
    if not alpha > 0:
        raise InvalidInputError(f"Rescaling factor must be positive, got {alpha}.")
    return IsingModel(
        model.n_spins,
        tuple(alpha * v for v in model.h),
        {k: alpha * v for k, v in model.couplings.items()},
        alpha * model.offset,
    )


def spin_reversal(model: IsingModel, subset: Iterable[int]) -> IsingModel:
    flipped = set(subset)
    bad = sorted(i for i in flipped if not 1 <= i <= model.n_spins)
    if bad:
        raise InvalidInputError(f"Spins {bad} outside [1, {model.n_spins}].")
    h = tuple(-v if i in flipped else v for i, v in enumerate(model.h, start=1))
    couplings = {
        (i, j): (-v if (i in flipped) != (j in flipped) else v)
        for (i, j), v in model.couplings.items()
    }
    return IsingModel(model.n_spins, h, couplings, model.offset)


def random_spin_reversal(model: IsingModel, n_flips: int, rng: np.random.Generator) -> tuple[IsingModel, frozenset[int]]:
    if not 0 <= n_flips <= model.n_spins:
        raise InvalidInputError(f"Cannot flip {n_flips} of {model.n_spins} spins.")
    subset = frozenset(int(i) + 1 for i in rng.choice(model.n_spins, size=n_flips, replace=False))
    return spin_reversal(model, subset), subset


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def energy(model: IsingModel, state: BasisState) -> float:
    if state.n != model.n_spins:
        raise InvalidInputError(f"State has {state.n} bits, model has {model.n_spins} spins.")
    s = state.spins
    value = model.offset
    for indices, coefficient in model.terms():
        value += coefficient * np.prod(s[[i - 1 for i in indices]])
    return float(value)


def _check_cap(n: int, cap: int | None) -> None:
    limit = cap if cap is not None else getattr(settings, 'LAB_ENUMERATION_CAP', 26)
    if n > limit:
        raise ResourceLimitError(f"Exhaustive evaluation of {n} spins exceeds the cap of {limit}.")


def diagonal_energies(model: IsingModel, cap: int | None = None) -> np.ndarray:
    """Energy of every basis state, indexed like the state vector."""
    n = model.n_spins
    _check_cap(n, cap)
    total = 2 ** n
    out = np.empty(total, dtype=np.float64)
    terms = model.terms()
    for start in range(0, total, DIAGONAL_CHUNK):
        stop = min(total, start + DIAGONAL_CHUNK)
        idx = np.arange(start, stop, dtype=np.int64)
        spins: dict[int, np.ndarray] = {}

        def spin(i):
            if i not in spins:
                spins[i] = (((idx >> (n - i)) & 1) * 2 - 1).astype(np.float64)
            return spins[i]

        chunk = np.full(stop - start, model.offset, dtype=np.float64)
        for indices, coefficient in terms:
            product = spin(indices[0]) if len(indices) == 1 else spin(indices[0]) * spin(indices[1])
            chunk += coefficient * product
        out[start:stop] = chunk
    return out


def energy_histogram(model: IsingModel, cap: int | None = None, tol: float = ENERGY_TOLERANCE) -> EnergyHistogram:
    energies = np.sort(diagonal_energies(model, cap))
    starts = np.concatenate(([0], np.flatnonzero(np.diff(energies) > tol) + 1))
    counts = np.diff(np.concatenate((starts, [energies.size])))
    return EnergyHistogram(
        levels=tuple(float(v) for v in energies[starts]),
        degeneracies=tuple(int(c) for c in counts),
    )


def ground_states(model: IsingModel, cap: int | None = None, tol: float = ENERGY_TOLERANCE) -> list[BasisState]:
    energies = diagonal_energies(model, cap)
    hits = np.flatnonzero(energies <= energies.min() + tol)
    return [BasisState.from_index(int(i), model.n_spins) for i in hits]
