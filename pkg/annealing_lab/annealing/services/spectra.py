"""Low-lying instantaneous spectrum of ``H(s) = A(s) H_I + B(s) H_P``.

The operator is applied matrix-free through the evolve kernels. Eigenpairs
come from a restarted block Lanczos iteration with full reorthogonalization
and a Rayleigh-Ritz step on the whole Krylov basis; the start block is drawn
from a seeded generator. Reported energies include the Ising offset.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg
from django.conf import settings
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import LinearOperator

from annealing.exceptions import ConvergenceError, InvalidInputError, ResourceLimitError
from annealing.services.evolve import (
    ProtocolSpec,
    ReverseAnnealSpec,
    Schedule,
    _trotter,
    apply_transverse,
    protocol_legs,
    protocol_start,
)
from annealing.services.ising import IsingModel, diagonal_energies

logger = logging.getLogger(__name__)

GUARD_VECTORS = 4
CLUSTER_WINDOW = 1e-7
DENSE_ORACLE_CAP = 10
DEFAULT_SEED = 20240501


@dataclass
class SpectrumSlice:
    s: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    residuals: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def gap(self, level_a: int, level_b: int) -> float:
        return float(self.eigenvalues[level_b - 1] - self.eigenvalues[level_a - 1])


@dataclass
class OverlapTrace:
    times: np.ndarray
    s_values: np.ndarray
    overlaps: np.ndarray
    cluster_overlaps: np.ndarray
    clusters: list[list[tuple[int, ...]]] = field(default_factory=list)
    eigenvalues: np.ndarray | None = None
    # per sample: the highest traced cluster continues above level k, so its sum is partial
    truncated: np.ndarray | None = None

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({'t': self.times, 's': self.s_values})
        for m in range(self.overlaps.shape[1]):
            frame[f'overlap_{m + 1}'] = self.overlaps[:, m]
        for m in range(self.cluster_overlaps.shape[1]):
            frame[f'cluster_{m + 1}'] = self.cluster_overlaps[:, m]
        if self.truncated is not None:
            frame['cluster_truncated'] = self.truncated
        return frame


@dataclass(frozen=True)
class GapResult:
    s_star: float
    gap: float
    level_a: int
    level_b: int


# ---------------------------------------------------------------------------
# Operator
# ---------------------------------------------------------------------------

def hamiltonian_operator(model: IsingModel, schedule: Schedule, s: float,
                         diagonal: np.ndarray | None = None) -> LinearOperator:
    n = model.n_spins
    diagonal = diagonal_energies(model) if diagonal is None else diagonal
    a, b = float(schedule.A(s)), float(schedule.B(s))

    def matmat(block):
        block = np.asarray(block)
        out = b * (diagonal[:, None] * block if block.ndim == 2 else diagonal * block)
        if a:
            out = out + a * apply_transverse(np.ascontiguousarray(block), n)
        return out

    dim = 2 ** n
    return LinearOperator((dim, dim), matvec=matmat, matmat=matmat, rmatvec=matmat, dtype=np.float64)


def dense_hamiltonian(model: IsingModel, schedule: Schedule, s: float, cap: int = DENSE_ORACLE_CAP) -> np.ndarray:
    if model.n_spins > cap:
        raise ResourceLimitError(f"Dense Hamiltonians are limited to {cap} spins.")
    operator = hamiltonian_operator(model, schedule, s)
    return operator.matmat(np.eye(operator.shape[0]))


# ---------------------------------------------------------------------------
# Eigensolver
# ---------------------------------------------------------------------------

def _project_out(block: np.ndarray, basis: np.ndarray) -> np.ndarray:
    for _ in range(2):
        block = block - basis @ (basis.T @ block)
    return block


def _next_block(raw: np.ndarray, basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    scale = max(1.0, float(np.abs(raw).max()))
    block = _project_out(raw, basis)
    q, r = scipy.linalg.qr(block, mode='economic')
    weak = np.abs(np.diag(r)) < 1e-10 * scale
    if weak.any():
        # the Krylov space closed on itself; continue with fresh directions
        block[:, weak] = rng.standard_normal((block.shape[0], int(weak.sum())))
        block = _project_out(block, basis)
        q, _ = scipy.linalg.qr(block, mode='economic')
    q = _project_out(q, basis)
    q, _ = scipy.linalg.qr(q, mode='economic')
    return q


def lowest_eigenpairs(operator: LinearOperator, k: int, *, start_block: np.ndarray | None = None,
                      seed: int = DEFAULT_SEED, tol: float | None = None, max_restarts: int | None = None,
                      krylov_blocks: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs of a real symmetric operator.

    Returns (eigenvalues, eigenvectors as columns, residual norms).
    """
    dim = operator.shape[0]
    tol = tol if tol is not None else getattr(settings, 'LAB_EIGEN_TOL', 1e-9)
    max_restarts = max_restarts if max_restarts is not None else getattr(settings, 'LAB_EIGEN_MAX_RESTARTS', 2000)
    krylov_blocks = krylov_blocks if krylov_blocks is not None else getattr(settings, 'LAB_EIGEN_KRYLOV_BLOCKS', 8)
    width = min(dim, k + GUARD_VECTORS)

    if dim <= width * krylov_blocks:
        matrix = operator.matmat(np.eye(dim))
        values, vectors = scipy.linalg.eigh(0.5 * (matrix + matrix.T), subset_by_index=[0, k - 1])
        residuals = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
        return values, vectors, residuals

    rng = np.random.default_rng(seed)
    block = rng.standard_normal((dim, width))
    if start_block is not None:
        cols = min(width, start_block.shape[1])
        block[:, :cols] = start_block[:, :cols]
    block, _ = scipy.linalg.qr(block, mode='economic')

    residuals = np.full(k, np.inf)
    for restart in range(max_restarts):
        basis = [block]
        products = [operator.matmat(block)]
        for _ in range(krylov_blocks - 1):
            q = np.hstack(basis)
            nxt = _next_block(products[-1], q, rng)
            basis.append(nxt)
            products.append(operator.matmat(nxt))
        q = np.hstack(basis)
        hq = np.hstack(products)
        projected = q.T @ hq
        theta, coeffs = scipy.linalg.eigh(0.5 * (projected + projected.T))
        ritz = q @ coeffs[:, :width]
        ritz_h = hq @ coeffs[:, :width]
        residuals = np.linalg.norm(ritz_h - ritz * theta[:width], axis=0)
        if np.all(residuals[:k] <= tol):
            logger.debug("Block Lanczos converged after %s restarts (max residual %.2e).", restart + 1, residuals[:k].max())
            return theta[:k], ritz[:, :k], residuals[:k]
        block, _ = scipy.linalg.qr(ritz, mode='economic')

    raise ConvergenceError(
        f"Eigensolver did not reach residual {tol:g} within {max_restarts} restarts.",
        residuals=residuals[:k],
    )


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

def instantaneous_spectrum(model: IsingModel, schedule: Schedule, s: float, k: int, *,
                           retain_vectors: bool = False, diagonal: np.ndarray | None = None,
                           start_block: np.ndarray | None = None, seed: int = DEFAULT_SEED) -> SpectrumSlice:
    dim = 2 ** model.n_spins
    if not 1 <= k <= dim:
        raise InvalidInputError(f"k={k} outside [1, {dim}].")
    if not 0.0 <= s <= 1.0:
        raise InvalidInputError(f"Annealing parameter {s} outside [0, 1].")
    diagonal = diagonal_energies(model) if diagonal is None else diagonal
    a, b = float(schedule.A(s)), float(schedule.B(s))

    if a == 0.0:
        # diagonal Hamiltonian: eigenvectors are basis states
        energies = b * diagonal
        order = np.argsort(energies, kind='stable')[:k]
        vectors = np.zeros((dim, k))
        vectors[order, np.arange(k)] = 1.0
        values, residuals = energies[order], np.zeros(k)
    else:
        operator = hamiltonian_operator(model, schedule, s, diagonal)
        values, vectors, residuals = lowest_eigenpairs(operator, k, start_block=start_block, seed=seed)

    return SpectrumSlice(float(s), np.asarray(values, dtype=float),
                         vectors if retain_vectors else None, np.asarray(residuals, dtype=float))


def spectrum_scan(model: IsingModel, schedule: Schedule, s_grid, k: int, *,
                  retain_vectors: bool = False, seed: int = DEFAULT_SEED) -> list[SpectrumSlice]:
    grid = [float(s) for s in s_grid]
    if any(not 0.0 <= s <= 1.0 for s in grid):
        raise InvalidInputError("Spectrum grid must lie within [0, 1].")
    diagonal = diagonal_energies(model)
    slices, previous = [], None
    for s in grid:
        current = instantaneous_spectrum(model, schedule, s, k, retain_vectors=True, diagonal=diagonal,
                                         start_block=previous, seed=seed)
        previous = current.eigenvectors
        if not retain_vectors:
            current.eigenvectors = None
        slices.append(current)
    logger.info("Scanned %s points of the %s lowest levels.", len(grid), k)
    return slices


def spectrum_table(slices: list[SpectrumSlice]) -> pd.DataFrame:
    k = min(sl.k for sl in slices)
    frame = pd.DataFrame({'s': [sl.s for sl in slices]})
    for m in range(k):
        frame[f'lambda_{m + 1}'] = [float(sl.eigenvalues[m]) for sl in slices]
    return frame


def min_gap(model: IsingModel, schedule: Schedule, level_a: int, level_b: int,
            coarse_grid=None, refine_tol: float = 1e-6, seed: int = DEFAULT_SEED) -> GapResult:
    """Coarse scan of ``lambda_b - lambda_a`` (1-based levels) followed by golden-section refinement."""
    if not 1 <= level_a < level_b:
        raise InvalidInputError(f"Need 1 <= level_a < level_b, got {level_a}, {level_b}.")
    grid = np.linspace(0.0, 1.0, 41) if coarse_grid is None else np.asarray(sorted(coarse_grid), dtype=float)
    if len(grid) < 2:
        raise InvalidInputError("The coarse grid needs at least two points.")
    diagonal = diagonal_energies(model)
    slices = spectrum_scan(model, schedule, grid, level_b, seed=seed)
    gaps = np.array([sl.gap(level_a, level_b) for sl in slices])
    best = int(np.argmin(gaps))

    def gap_at(s):
        sl = instantaneous_spectrum(model, schedule, float(s), level_b, diagonal=diagonal, seed=seed)
        return sl.gap(level_a, level_b)

    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    try:
        if 0 < best < len(grid) - 1:
            found = minimize_scalar(gap_at, bracket=(lo, grid[best], hi), method='golden', tol=refine_tol)
        else:
            raise ValueError('minimum on the grid boundary')
    except ValueError:
        found = minimize_scalar(gap_at, bounds=(lo, hi), method='bounded', options={'xatol': refine_tol})

    s_star, gap = float(found.x), float(found.fun)
    if not lo <= s_star <= hi or gap > gaps[best]:
        s_star, gap = float(grid[best]), float(gaps[best])
    return GapResult(s_star, gap, level_a, level_b)


def _clusters(values: np.ndarray, window: float = CLUSTER_WINDOW) -> list[tuple[int, ...]]:
    groups, current = [], [0]
    for m in range(1, len(values)):
        if values[m] - values[m - 1] <= window:
            current.append(m)
        else:
            groups.append(tuple(current))
            current = [m]
    groups.append(tuple(current))
    return groups


def overlap_trace(spec: ProtocolSpec, k: int, n_samples: int, seed: int = DEFAULT_SEED) -> OverlapTrace:
    """Squared overlaps of the evolving state with the ``k`` lowest instantaneous eigenvectors."""
    if n_samples < 2:
        raise InvalidInputError("An overlap trace needs at least two samples.")
    if not 1 <= k <= 10:
        raise InvalidInputError("Overlap traces follow between 1 and 10 levels.")
    base = spec.base if isinstance(spec, ReverseAnnealSpec) else spec
    model, schedule, tau = base.model, base.schedule, base.tau
    diagonal = diagonal_energies(model)
    legs = protocol_legs(spec)
    starts = np.concatenate(([0.0], np.cumsum([leg.duration for leg in legs])))
    total = float(starts[-1])

    def s_at(t):
        for leg, t0 in zip(legs, starts):
            if t <= t0 + leg.duration:
                return leg.s_start + (leg.s_end - leg.s_start) * (t - t0) / leg.duration
        return legs[-1].s_end

    def advance(psi, t_from, t_to):
        for leg, t0 in zip(legs, starts):
            lo, hi = max(t_from, t0), min(t_to, t0 + leg.duration)
            if hi - lo <= 1e-12:
                continue
            s_lo = leg.s_start + (leg.s_end - leg.s_start) * (lo - t0) / leg.duration
            s_hi = leg.s_start + (leg.s_end - leg.s_start) * (hi - t0) / leg.duration
            _trotter(psi, model.n_spins, diagonal, schedule, s_lo, s_hi, hi - lo, tau)

    # one extra level shows whether the top cluster is cut off
    solved = min(k + 1, 2 ** model.n_spins)
    times = np.linspace(0.0, total, n_samples)
    state = protocol_start(spec)
    overlaps = np.zeros((n_samples, k))
    cluster_sums = np.zeros((n_samples, k))
    energies = np.zeros((n_samples, k))
    truncated = np.zeros(n_samples, dtype=bool)
    clusters, s_values, previous = [], [], None
    for row, t in enumerate(times):
        if row:
            advance(state.amplitudes, times[row - 1], t)
        s = float(np.clip(s_at(t), 0.0, 1.0))
        sl = instantaneous_spectrum(model, schedule, s, solved, retain_vectors=True, diagonal=diagonal,
                                    start_block=previous, seed=seed)
        previous = sl.eigenvectors
        overlaps[row] = np.abs(sl.eigenvectors[:, :k].T @ state.amplitudes) ** 2
        groups = _clusters(sl.eigenvalues)
        if solved > k and k in groups[-1] and k - 1 in groups[-1]:
            truncated[row] = True
        groups = [tuple(m for m in group if m < k) for group in groups]
        groups = [group for group in groups if group]
        for group in groups:
            cluster_sums[row, list(group)] = overlaps[row, list(group)].sum()
        clusters.append(groups)
        energies[row] = sl.eigenvalues[:k]
        s_values.append(s)
    if truncated.any():
        logger.warning("The highest of %s traced levels is part of a larger cluster in %s samples.",
                       k, int(truncated.sum()))
    return OverlapTrace(times, np.array(s_values), overlaps, cluster_sums, clusters, energies, truncated)
