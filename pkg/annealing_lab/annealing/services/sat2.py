"""Constrained random 2-SAT instances: generation, satisfiability and counting.

Generated problems obey three constraints: the two literals of a clause use
different variables, every variable appears somewhere, and no clause is
repeated (``(a or b)`` and ``(b or a)`` count as the same clause).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import networkx as nx
import numpy as np
from django.conf import settings
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from annealing.exceptions import GenerationError, InvalidInputError, ResourceLimitError
from annealing.services.bitstrings import BasisState, all_index_bits

logger = logging.getLogger(__name__)

Assignment = BasisState

ENUMERATION_CHUNK = 1 << 20


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    variable_index: int
    negated: bool = False

    @classmethod
    def from_signed(cls, value: int) -> Literal:
        if value == 0:
            raise InvalidInputError("0 is not a literal.")
        return cls(abs(int(value)), value < 0)

    @property
    def signed(self) -> int:
        return -self.variable_index if self.negated else self.variable_index

    @property
    def epsilon(self) -> int:
        return -1 if self.negated else 1

    def holds(self, assignment: Assignment) -> bool:
        return assignment.bits[self.variable_index - 1] != self.negated

    def __str__(self):
        return f"{'~' if self.negated else ''}x{self.variable_index}"


@dataclass(frozen=True, eq=False)
class Clause:
    first: Literal
    second: Literal

    def __post_init__(self):
        if self.first.variable_index == self.second.variable_index:
            raise InvalidInputError(f"Clause {self} uses variable x{self.first.variable_index} twice.")

    @classmethod
    def from_signed(cls, a: int, b: int) -> Clause:
        return cls(Literal.from_signed(a), Literal.from_signed(b))

    @property
    def key(self) -> frozenset:
        return frozenset((self.first, self.second))

    @property
    def signed(self) -> list[int]:
        return [self.first.signed, self.second.signed]

    def __eq__(self, other):
        if not isinstance(other, Clause):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return f"({self.first} v {self.second})"


@dataclass(frozen=True)
class TwoSatProblem:
    n_vars: int
    clauses: tuple[Clause, ...]
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, 'clauses', tuple(self.clauses))
        if self.n_vars < 2:
            raise InvalidInputError(f"A 2-SAT problem needs at least 2 variables, got {self.n_vars}.")
        used = set()
        for clause in self.clauses:
            for lit in (clause.first, clause.second):
                if not 1 <= lit.variable_index <= self.n_vars:
                    raise InvalidInputError(f"Literal {lit} outside [1, {self.n_vars}].")
                used.add(lit.variable_index)
        if len(set(self.clauses)) != len(self.clauses):
            raise InvalidInputError("Problem contains duplicate clauses.")
        missing = sorted(set(range(1, self.n_vars + 1)) - used)
        if missing:
            raise InvalidInputError(f"Variables {missing} appear in no clause.")

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    @classmethod
    def from_signed(cls, n_vars: int, clauses: Iterable[Iterable[int]], label: str | None = None) -> TwoSatProblem:
        built = []
        for pair in clauses:
            pair = list(pair)
            if len(pair) != 2:
                raise InvalidInputError(f"Clause {pair} does not have exactly two literals.")
            built.append(Clause.from_signed(*pair))
        return cls(n_vars, tuple(built), label)

    def to_json_dict(self) -> dict:
        return {
            'n_vars': self.n_vars,
            'clauses': [clause.signed for clause in self.clauses],
            'label': self.label or '',
        }


class GenerationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_vars: int = Field(ge=2)
    clause_offset_c: int = 1
    target_degeneracies: frozenset[int] = frozenset({1, 2, 4})
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    max_attempts: int = Field(default=200_000, ge=1)

    @field_validator('target_degeneracies')
    @classmethod
    def _positive_targets(cls, value):
        if not value or min(value) < 1:
            raise ValueError('target degeneracies must be a non-empty set of positive integers')
        return value

    @property
    def n_clauses(self) -> int:
        return self.n_vars + self.clause_offset_c

    @property
    def clause_universe(self) -> int:
        return 2 * self.n_vars * (self.n_vars - 1)


def make_config(**kwargs) -> GenerationConfig:
    try:
        return GenerationConfig(**kwargs)
    except ValidationError as exc:
        raise InvalidInputError(str(exc)) from exc


@dataclass
class Ensemble:
    config: GenerationConfig
    buckets: dict[int, list[TwoSatProblem]]
    attempts: int
    satisfiable: int

    @property
    def problems(self) -> list[TwoSatProblem]:
        return [p for degeneracy in sorted(self.buckets) for p in self.buckets[degeneracy]]


@dataclass
class DegeneracyStats:
    solution_counts: list[int]
    mean_mu: float
    fes_degeneracy_mean: float | None
    sample_size: int
    expected_mu: float | None = None
    satisfiable_fraction: float | None = None
    attempts: int | None = None
    fes_degeneracies: list[int] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            'solution_counts': self.solution_counts,
            'mean_mu': self.mean_mu,
            'expected_mu': self.expected_mu,
            'fes_degeneracy_mean': self.fes_degeneracy_mean,
            'fes_degeneracies': self.fes_degeneracies,
            'sample_size': self.sample_size,
            'satisfiable_fraction': self.satisfiable_fraction,
            'attempts': self.attempts,
        }


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------

def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 stream for ``seed``; ``keys`` select independent child streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(keys))))


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _draw_problem(config: GenerationConfig, rng: np.random.Generator, label: str | None) -> TwoSatProblem | None:
    n, m = config.n_vars, config.n_clauses
    chosen: dict[frozenset, Clause] = {}
    draw_budget = 50 * m + 100
    while len(chosen) < m and draw_budget > 0:
        draw_budget -= 1
        i, j = rng.choice(n, size=2, replace=False) + 1
        signs = rng.integers(0, 2, size=2)
        clause = Clause(Literal(int(i), bool(signs[0])), Literal(int(j), bool(signs[1])))
        chosen.setdefault(clause.key, clause)
    if len(chosen) < m:
        return None
    clauses = tuple(chosen.values())
    used = {lit.variable_index for c in clauses for lit in (c.first, c.second)}
    if len(used) < n:
        return None
    return TwoSatProblem(n, clauses, label)


def _check_feasible(config: GenerationConfig) -> None:
    if config.n_clauses < 1:
        raise GenerationError(f"M = N + c = {config.n_clauses} leaves nothing to generate.")
    if config.n_clauses > config.clause_universe:
        raise GenerationError(
            f"M = {config.n_clauses} exceeds the {config.clause_universe} distinct clauses over {config.n_vars} variables."
        )
    # every variable must appear in some clause
    if 2 * config.n_clauses < config.n_vars:
        raise GenerationError(f"M = {config.n_clauses} clauses cannot cover {config.n_vars} variables.")


def generate_problem(config: GenerationConfig, rng: np.random.Generator, label: str | None = None) -> TwoSatProblem:
    _check_feasible(config)
    for _ in range(config.max_attempts):
        problem = _draw_problem(config, rng, label)
        if problem is not None:
            return problem
    raise GenerationError(f"No valid problem after {config.max_attempts} attempts (N={config.n_vars}, M={config.n_clauses}).")


def generate_ensemble(config: GenerationConfig, count_per_degeneracy: int,
                      progress: Callable[[int, dict], None] | None = None) -> Ensemble:
    """Fill one bucket per target degeneracy with ``count_per_degeneracy`` problems."""
    if count_per_degeneracy < 1:
        raise InvalidInputError("count_per_degeneracy must be at least 1.")
    _check_feasible(config)
    rng = derive_rng(config.seed)
    buckets: dict[int, list[TwoSatProblem]] = {d: [] for d in sorted(config.target_degeneracies)}
    attempts = satisfiable = 0

    while any(len(b) < count_per_degeneracy for b in buckets.values()):
        if attempts >= config.max_attempts:
            fill = {d: len(b) for d, b in buckets.items()}
            raise GenerationError(f"Attempt budget {config.max_attempts} exhausted with buckets {fill}.")
        attempts += 1
        label = f"N{config.n_vars}-c{config.clause_offset_c}-s{config.seed}-{attempts:06d}"
        problem = _draw_problem(config, rng, label)
        if problem is None or not is_satisfiable_scc(problem):
            continue
        satisfiable += 1
        count = len(enumerate_solutions(problem))
        bucket = buckets.get(count)
        if bucket is not None and len(bucket) < count_per_degeneracy:
            bucket.append(problem)
            if progress:
                progress(attempts, {d: len(b) for d, b in buckets.items()})

    logger.info(
        "Ensemble N=%s c=%s filled after %s attempts (%s satisfiable).",
        config.n_vars, config.clause_offset_c, attempts, satisfiable,
    )
    return Ensemble(config, buckets, attempts, satisfiable)


# ---------------------------------------------------------------------------
# Satisfiability and counting
# ---------------------------------------------------------------------------

def implication_graph(problem: TwoSatProblem) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(v for i in range(1, problem.n_vars + 1) for v in (i, -i))
    for clause in problem.clauses:
        a, b = clause.first.signed, clause.second.signed
        graph.add_edge(-a, b)
        graph.add_edge(-b, a)
    return graph


def is_satisfiable_scc(problem: TwoSatProblem) -> bool:
    component_of = {}
    for number, component in enumerate(nx.kosaraju_strongly_connected_components(implication_graph(problem))):
        for node in component:
            component_of[node] = number
    return all(component_of[i] != component_of[-i] for i in range(1, problem.n_vars + 1))


def _enumeration_cap(cap: int | None) -> int:
    return cap if cap is not None else getattr(settings, 'LAB_ENUMERATION_CAP', 26)


def violation_counts(problem: TwoSatProblem, bits: np.ndarray) -> np.ndarray:
    """Violated-clause counts for each row of a boolean assignment matrix."""
    counts = np.zeros(bits.shape[0], dtype=np.int64)
    for clause in problem.clauses:
        first = bits[:, clause.first.variable_index - 1] != clause.first.negated
        second = bits[:, clause.second.variable_index - 1] != clause.second.negated
        counts += ~(first | second)
    return counts


def enumerate_solutions(problem: TwoSatProblem, cap: int | None = None) -> list[Assignment]:
    n = problem.n_vars
    limit = _enumeration_cap(cap)
    if n > limit:
        raise ResourceLimitError(f"Enumeration of {n} variables exceeds the cap of {limit}.")
    solutions = []
    total = 2 ** n
    for start in range(0, total, ENUMERATION_CHUNK):
        stop = min(total, start + ENUMERATION_CHUNK)
        hits = np.flatnonzero(violation_counts(problem, all_index_bits(n, start, stop)) == 0)
        solutions.extend(BasisState.from_index(int(start + h), n) for h in hits)
    return solutions


def count_violated(problem: TwoSatProblem, a: Assignment) -> int:
    if a.n != problem.n_vars:
        raise InvalidInputError(f"Assignment has {a.n} bits, problem has {problem.n_vars} variables.")
    return sum(not (c.first.holds(a) or c.second.holds(a)) for c in problem.clauses)


def hamming_distance(a: Assignment, b: Assignment) -> int:
    return a.hamming_distance(b)


def expected_degeneracy(K: int, M: int, N: int) -> float:
    if K < 1 or M < 0 or N < 1:
        raise InvalidInputError("expected_degeneracy needs K >= 1, M >= 0, N >= 1.")
    return (1.0 - 2.0 ** (-K)) ** M * 2.0 ** N


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def degeneracy_stats(problems: list[TwoSatProblem], with_fes: bool = True) -> DegeneracyStats:
    from annealing.services.ising import energy_histogram, map_2sat

    if not problems:
        raise InvalidInputError("degeneracy_stats needs at least one problem.")
    counts = [len(enumerate_solutions(p)) for p in problems]
    fes = []
    if with_fes:
        for problem in problems:
            histogram = energy_histogram(map_2sat(problem))
            if histogram.g1 is not None:
                fes.append(histogram.g1)
    shapes = {(p.n_vars, p.n_clauses) for p in problems}
    expected = None
    if len(shapes) == 1:
        n, m = shapes.pop()
        expected = expected_degeneracy(2, m, n)
    return DegeneracyStats(
        solution_counts=counts,
        mean_mu=float(np.mean(counts)),
        fes_degeneracy_mean=float(np.mean(fes)) if fes else None,
        sample_size=len(problems),
        expected_mu=expected,
        satisfiable_fraction=sum(c > 0 for c in counts) / len(counts),
        fes_degeneracies=fes,
    )


def sample_degeneracies(config: GenerationConfig, sample_size: int) -> DegeneracyStats:
    """Solution counts of unfiltered generated problems, for comparison with ``expected_degeneracy``."""
    if sample_size < 1:
        raise InvalidInputError("sample_size must be at least 1.")
    rng = derive_rng(config.seed)
    problems = [generate_problem(config, rng) for _ in range(sample_size)]
    stats = degeneracy_stats(problems, with_fes=False)
    stats.attempts = sample_size
    logger.debug("Sampled %s problems at N=%s: mean mu %.4f vs %.4f.",
                 sample_size, config.n_vars, stats.mean_mu, stats.expected_mu)
    return stats


# ---------------------------------------------------------------------------
# DIMACS
# ---------------------------------------------------------------------------

def read_dimacs(text: str, label: str | None = None) -> TwoSatProblem:
    n_vars = n_clauses = None
    literals: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(('c', '%')):
            continue
        if line.startswith('p'):
            parts = line.split()
            if len(parts) != 4 or parts[1] != 'cnf':
                raise InvalidInputError(f"Bad DIMACS header: {line!r}")
            n_vars, n_clauses = int(parts[2]), int(parts[3])
            continue
        try:
            literals.extend(int(tok) for tok in line.split())
        except ValueError as exc:
            raise InvalidInputError(f"Bad DIMACS clause line: {line!r}") from exc
    if n_vars is None:
        raise InvalidInputError("DIMACS input has no 'p cnf' header.")

    clauses, current = [], []
    for lit in literals:
        if lit == 0:
            clauses.append(current)
            current = []
        else:
            current.append(lit)
    if current:
        raise InvalidInputError("Last DIMACS clause is not 0-terminated.")
    if len(clauses) != n_clauses:
        raise InvalidInputError(f"Header announces {n_clauses} clauses, found {len(clauses)}.")
    return TwoSatProblem.from_signed(n_vars, clauses, label)


def write_dimacs(problem: TwoSatProblem) -> str:
    lines = []
    if problem.label:
        lines.append(f"c {problem.label}")
    lines.append(f"p cnf {problem.n_vars} {problem.n_clauses}")
    lines.extend(f"{c.first.signed} {c.second.signed} 0" for c in problem.clauses)
    return "\n".join(lines) + "\n"

