"""First-order degenerate perturbation theory near the end of the anneal.

Close to ``s = 1`` the transverse term acts as a small perturbation that
splits the degenerate ground subspace of the problem Hamiltonian. The
sampling distribution reached by a slow anneal is then given by the ground
eigenvector of ``V_ij = <psi_i|H_I|psi_j>`` restricted to that subspace.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from annealing.exceptions import InvalidInputError
from annealing.services.bitstrings import BasisState
from annealing.services.evolve import apply_transverse, basis_state

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PerturbationMatrix:
    ground_states: tuple[BasisState, ...]
    entries: np.ndarray

    @property
    def size(self) -> int:
        return len(self.ground_states)

    def to_json_dict(self) -> dict:
        return {
            'ground_states': [str(s) for s in self.ground_states],
            'entries': self.entries.tolist(),
        }


@dataclass(frozen=True)
class PerturbPrediction:
    matrix: PerturbationMatrix
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degenerate_ground: bool

    @property
    def ground_vector(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    @property
    def probabilities(self) -> dict[BasisState, float]:
        weights = np.abs(self.ground_vector) ** 2
        return {state: float(w) for state, w in zip(self.matrix.ground_states, weights)}

    def to_json_dict(self) -> dict:
        return {
            **self.matrix.to_json_dict(),
            'eigenvalues': self.eigenvalues.tolist(),
            'ground_vector': self.ground_vector.tolist(),
            'probabilities': {str(s): p for s, p in self.probabilities.items()},
            'degenerate_ground': self.degenerate_ground,
        }


def build_perturbation_matrix(ground_states: list[BasisState]) -> PerturbationMatrix:
    states = tuple(ground_states)
    if not states:
        raise InvalidInputError("The ground subspace is empty.")
    if len({s.n for s in states}) != 1:
        raise InvalidInputError("Ground states must have equal length.")
    if len(set(states)) != len(states):
        raise InvalidInputError("Ground states must be distinct.")
    size = len(states)
    entries = np.zeros((size, size))
    for i in range(size):
        for j in range(i + 1, size):
            if states[i].hamming_distance(states[j]) == 1:
                entries[i, j] = entries[j, i] = -1.0
    return PerturbationMatrix(states, entries)


def transverse_matrix_element(bra: BasisState, ket: BasisState) -> float:
    """``<bra|H_I|ket>`` evaluated through the state-vector kernels."""
    if bra.n != ket.n:
        raise InvalidInputError("States must have equal length.")
    image = apply_transverse(basis_state(ket).amplitudes, ket.n)
    return float(np.real(image[bra.index]))


def _canonical_basis(vectors: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the span of ``vectors``.

    Unit vectors are projected onto the span in index order and orthonormalized;
    each resulting vector has its first nonzero component positive.
    """
    dim, rank = vectors.shape
    projector = vectors @ vectors.T
    basis: list[np.ndarray] = []
    for j in range(dim):
        if len(basis) == rank:
            break
        candidate = projector[:, j].copy()
        for b in basis:
            candidate -= (b @ candidate) * b
        norm = np.linalg.norm(candidate)
        if norm > 1e-8:
            basis.append(candidate / norm)
    out = np.column_stack(basis)
    for m in range(out.shape[1]):
        column = out[:, m]
        column[np.abs(column) < 1e-14] = 0.0
        lead = column[np.flatnonzero(np.abs(column) > 1e-12)[0]]
        if lead < 0:
            out[:, m] = -column
    return out


def _eigenbasis(entries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values, vectors = scipy.linalg.eigh(entries)
    ordered = np.empty_like(vectors)
    start = 0
    while start < len(values):
        stop = start + 1
        while stop < len(values) and values[stop] - values[stop - 1] < DEGENERACY_TOLERANCE:
            stop += 1
        ordered[:, start:stop] = _canonical_basis(vectors[:, start:stop])
        start = stop
    return values, ordered


def predict_sampling(matrix: PerturbationMatrix) -> PerturbPrediction:
    values, vectors = _eigenbasis(matrix.entries)
    degenerate = len(values) > 1 and values[1] - values[0] < DEGENERACY_TOLERANCE
    if degenerate:
        logger.warning("Lowest eigenvalue of V is degenerate; the predicted distribution is not unique.")
    return PerturbPrediction(matrix, values, vectors, bool(degenerate))


def decompose_in_eigenbasis(matrix: PerturbationMatrix, state_index: int) -> np.ndarray:
    """Coefficients of ground state ``state_index`` (1-based) over the eigenvectors of V."""
    if not 1 <= state_index <= matrix.size:
        raise InvalidInputError(f"State index {state_index} outside [1, {matrix.size}].")
    _, vectors = _eigenbasis(matrix.entries)
    return vectors[state_index - 1, :].copy()
