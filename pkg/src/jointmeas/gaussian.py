"""Covariance-matrix simulator of fermionic Gaussian states.

The covariance convention is ``Gamma_jk = (i/2) tr(rho [gamma_j, gamma_k])``,
so ``Gamma_jk = i tr(rho gamma_j gamma_k)`` off the diagonal and the
expectation of a standard pair observable is the matrix entry itself:
``<gamma_{2i-1,2i}> = Gamma_{2i-1,2i}``.  With this convention Wick's theorem
reads ``tr(rho gamma_A) = Pf(Gamma_A)`` with no extra sign; the remaining
orientation choices (orthogonal evolution, monomial conjugation) are pinned
against the dense oracle in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .flo import OrthogonalMatrix
from .majorana import IndexSet, ModeCount

ANTISYMMETRY_TOL = 1e-10
PHYSICALITY_TOL = 1e-8
PROBABILITY_SLACK = 1e-9


@dataclass(frozen=True)
class GaussianState:
    """Fermionic Gaussian state, fully described by its covariance matrix."""

    cov: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.cov, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "cov", arr)
        d = arr.shape[0]
        if arr.ndim != 2 or arr.shape != (d, d) or d % 2:
            raise ValueError(f"covariance must be square with even dimension, got {arr.shape}")
        if np.max(np.abs(arr + arr.T)) > ANTISYMMETRY_TOL:
            raise ValueError("covariance matrix is not antisymmetric")
        sv = np.linalg.svd(arr, compute_uv=False)
        if sv.size and sv[0] > 1.0 + PHYSICALITY_TOL:
            raise ValueError(f"unphysical covariance: largest singular value {sv[0]:.12f}")

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0]

    @property
    def mode_count(self) -> ModeCount:
        return ModeCount(self.cov.shape[0] // 2)


def init_fock(occupations: Sequence[int]) -> GaussianState:
    """Fock state |n_1..n_N>: block-diagonal with <gamma_{2i-1,2i}> = 2 n_i - 1."""
    n = len(occupations)
    cov = np.zeros((2 * n, 2 * n))
    for i, occ in enumerate(occupations):
        if occ not in (0, 1):
            raise ValueError(f"occupation numbers are bits, got {occ}")
        cov[2 * i, 2 * i + 1] = 2 * occ - 1
        cov[2 * i + 1, 2 * i] = 1 - 2 * occ
    return GaussianState(cov)


def extend_with_vacuum(state: GaussianState, n_aux_pairs: int) -> GaussianState:
    """Append auxiliary modes in the vacuum (occupation 0) after the physical ones."""
    if n_aux_pairs == 0:
        return state
    d = state.n_modes
    cov = np.zeros((d + 2 * n_aux_pairs, d + 2 * n_aux_pairs))
    cov[:d, :d] = state.cov
    for k in range(n_aux_pairs):
        a = d + 2 * k
        cov[a, a + 1] = -1.0
        cov[a + 1, a] = 1.0
    return GaussianState(cov)


def apply_orthogonal(state: GaussianState, r: OrthogonalMatrix) -> GaussianState:
    """Evolve by the FLO unitary of R (rho -> U_R rho U_R^dag): Gamma -> R Gamma R^T."""
    if r.dim != state.n_modes:
        raise ValueError(f"dimension mismatch: state has {state.n_modes} modes, R is {r.dim}")
    cov = r.entries @ state.cov @ r.entries.T
    return GaussianState(0.5 * (cov - cov.T))


def conjugate_monomial(state: GaussianState, x: IndexSet) -> GaussianState:
    """rho -> gamma_X rho gamma_X^dag: flips the sign of rows/columns in X."""
    d = state.n_modes
    signs = np.ones(d)
    for i in x:
        if not 1 <= i <= d:
            raise ValueError(f"index {i} out of range for {d} modes")
        signs[i - 1] = -1.0
    return GaussianState(signs[:, None] * state.cov * signs[None, :])


def pfaffian(m: np.ndarray) -> float:
    """Pfaffian of a real antisymmetric matrix (Parlett-Reid with pivoting)."""
    m = np.asarray(m, dtype=float)
    d = m.shape[0]
    if m.ndim != 2 or m.shape != (d, d):
        raise ValueError(f"expected a square matrix, got {m.shape}")
    if d % 2:
        raise ValueError("Pfaffian requires even dimension")
    if np.max(np.abs(m + m.T), initial=0.0) > ANTISYMMETRY_TOL * max(1.0, np.max(np.abs(m), initial=0.0)):
        raise ValueError("matrix is not antisymmetric")
    if d == 0:
        return 1.0
    a = m.copy()
    pf = 1.0
    for k in range(0, d - 1, 2):
        pivot = k + 1 + int(np.argmax(np.abs(a[k + 1 :, k])))
        if abs(a[pivot, k]) == 0.0:
            return 0.0
        if pivot != k + 1:
            a[[k + 1, pivot]] = a[[pivot, k + 1]]
            a[:, [k + 1, pivot]] = a[:, [pivot, k + 1]]
            pf = -pf
        pf *= a[k, k + 1]
        if k + 2 < d:
            tail = slice(k + 2, d)
            tau = a[k, tail] / a[k, k + 1]
            col = a[tail, k + 1]
            a[tail, tail] += np.outer(tau, col) - np.outer(col, tau)
    return float(pf)


def expectation(state: GaussianState, a: IndexSet) -> float:
    """tr(rho gamma_A) = Pf of the covariance restricted to A."""
    if len(a) % 2:
        raise ValueError("expectations are defined for even-sized sets")
    if len(a) == 0:
        return 1.0
    idx = [i - 1 for i in a]
    if idx[-1] >= state.n_modes:
        raise ValueError(f"index {a[-1]} out of range for {state.n_modes} modes")
    return pfaffian(state.cov[np.ix_(idx, idx)])


def sample_pair_outcomes(
    state: GaussianState, rng: np.random.Generator
) -> Tuple[Tuple[int, ...], GaussianState]:
    """Sample the joint standard-pair measurement by sequential Born sampling.

    Measures gamma_{1,2}, gamma_{3,4}, ... in order, conditioning the
    covariance after each outcome with the Schur-complement update.  Returns
    the outcomes q in {-1,+1}^N and the collapsed state.
    """
    cov = state.cov.copy()
    d = state.n_modes
    outcomes = []
    for i in range(d // 2):
        a, b = 2 * i, 2 * i + 1
        mean = cov[a, b]
        p_plus = 0.5 * (1.0 + mean)
        if not -PROBABILITY_SLACK <= p_plus <= 1.0 + PROBABILITY_SLACK:
            raise ArithmeticError(f"pair probability {p_plus} outside [0,1]: unphysical state")
        p_plus = min(max(p_plus, 0.0), 1.0)
        q = 1 if rng.random() < p_plus else -1
        outcomes.append(q)
        u = cov[:, a].copy()
        v = cov[:, b].copy()
        cov += (np.outer(v, u) - np.outer(u, v)) / (mean + q)
        cov[[a, b], :] = 0.0
        cov[:, [a, b]] = 0.0
        cov[a, b] = float(q)
        cov[b, a] = float(-q)
    return tuple(outcomes), GaussianState(cov)


def random_gaussian_state(n: ModeCount, rng: np.random.Generator) -> GaussianState:
    """Random pure Gaussian state: a Haar-rotated random Fock state."""
    from .flo import random_orthogonal

    occ = rng.integers(0, 2, size=n.n_fermionic)
    return apply_orthogonal(init_fock(list(occ)), random_orthogonal(2 * n.n_fermionic, rng))
