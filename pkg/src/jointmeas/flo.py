"""Orthogonal-matrix representation of fermionic linear optics.

A FLO unitary acts on Majorana operators by columns of its orthogonal matrix:
``U gamma_i U^dag = sum_j R_{ji} gamma_j``.  Composition therefore follows
matrix order, ``U_{R1} U_{R2} = U_{R1 R2}``.  The convention is pinned by a
dense-oracle test, not by this docstring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .majorana import IndexSet

ORTHOGONALITY_TOL = 1e-10


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class OrthogonalMatrix:
    """A real orthogonal matrix, validated on construction."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.entries)
        object.__setattr__(self, "entries", arr)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        residual = np.max(np.abs(arr.T @ arr - np.eye(arr.shape[0])))
        if residual > ORTHOGONALITY_TOL:
            raise ValueError(f"orthogonality residual {residual:.2e} above {ORTHOGONALITY_TOL}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "OrthogonalMatrix":
        return cls(np.eye(dim))

    def __matmul__(self, other: "OrthogonalMatrix") -> "OrthogonalMatrix":
        return OrthogonalMatrix(self.entries @ other.entries)


@dataclass(frozen=True)
class FlatBlock:
    """An LxL orthogonal block intended to have entries bounded away from zero."""

    size: int
    entries: np.ndarray
    min_abs_entry: float = field(init=False)

    def __post_init__(self):
        arr = _freeze(self.entries)
        object.__setattr__(self, "entries", arr)
        if arr.shape != (self.size, self.size):
            raise ValueError(f"expected {self.size}x{self.size} block, got {arr.shape}")
        residual = np.max(np.abs(arr.T @ arr - np.eye(self.size)))
        if residual > ORTHOGONALITY_TOL:
            raise ValueError(f"orthogonality residual {residual:.2e} above {ORTHOGONALITY_TOL}")
        object.__setattr__(self, "min_abs_entry", float(np.min(np.abs(arr))))


@dataclass(frozen=True)
class ModePermutation:
    """Bijection on 1..2N, stored as the tuple of images (1-based)."""

    images: Tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(1, len(self.images) + 1)):
            raise ValueError("not a permutation of 1..n")

    @property
    def dim(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, dim: int) -> "ModePermutation":
        return cls(tuple(range(1, dim + 1)))

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def compose(self, other: "ModePermutation") -> "ModePermutation":
        """self after other: (self . other)(i) = self(other(i))."""
        return ModePermutation(tuple(self(other(i)) for i in range(1, self.dim + 1)))

    def inverse(self) -> "ModePermutation":
        inv = [0] * self.dim
        for i, img in enumerate(self.images, start=1):
            inv[img - 1] = i
        return ModePermutation(tuple(inv))

    def power(self, k: int) -> "ModePermutation":
        out = ModePermutation.identity(self.dim)
        for _ in range(k):
            out = self.compose(out)
        return out


def permutation_to_orthogonal(p: ModePermutation) -> OrthogonalMatrix:
    """0/1 matrix R with R_{p(i),i} = 1, so that U_R gamma_i U_R^dag = gamma_{p(i)}."""
    mat = np.zeros((p.dim, p.dim))
    for i in range(1, p.dim + 1):
        mat[p(i) - 1, i - 1] = 1.0
    return OrthogonalMatrix(mat)


def submatrix_det(r: OrthogonalMatrix, rows: IndexSet, cols: IndexSet) -> float:
    """det of the submatrix on (sorted) rows and columns; LU with partial pivoting."""
    if len(rows) != len(cols):
        raise ValueError(f"need |rows| = |cols|, got {len(rows)} and {len(cols)}")
    if len(rows) == 0:
        raise ValueError("need at least one row/column")
    for idx in (*rows, *cols):
        if not 1 <= idx <= r.dim:
            raise ValueError(f"index {idx} out of range for dim {r.dim}")
    sub = r.entries[np.ix_([i - 1 for i in sorted(rows)], [j - 1 for j in sorted(cols)])]
    return float(np.linalg.det(sub))


def visibility(r: OrthogonalMatrix, a: IndexSet, b: IndexSet) -> float:
    """|det(R_{A,B})|; in [0, 1] for orthogonal R."""
    return abs(submatrix_det(r, a, b))


def build_flat_block(l: int, family: str = "auto") -> FlatBlock:
    """Orthogonal LxL block with entries bounded away from zero.

    family "hadamard": Kronecker power of the 2x2 rotation by pi/4; requires L
    a power of two; all entries +-1/sqrt(L).  family "aij": the reflection
    with (2-L)/L on the diagonal and 2/L elsewhere (for L=3 this is the
    almost Hadamard matrix with -1/3 diagonal and 2/3 off-diagonal).  "auto"
    picks hadamard for powers of two and aij otherwise.  The aij family's
    off-diagonal entries decay like 1/L, weaker than the 1/sqrt(L) flatness
    the hadamard family achieves; min_abs_entry records what was actually
    built and every visibility downstream is computed from the entries.
    """
    if l < 1:
        raise ValueError("block size must be positive")
    if family not in ("auto", "hadamard", "aij"):
        raise ValueError(f"unknown block family {family!r}")
    is_pow2 = l & (l - 1) == 0
    if family == "auto":
        family = "hadamard" if is_pow2 else "aij"
    if l == 1:
        return FlatBlock(1, np.array([[1.0]]))
    if family == "hadamard":
        if not is_pow2:
            raise ValueError(f"hadamard blocks need a power-of-two size, got {l}")
        signs = np.array([[1, -1], [1, 1]], dtype=np.int64)
        mat = np.array([[1]], dtype=np.int64)
        while mat.shape[0] < l:
            mat = np.kron(signs, mat)
        return FlatBlock(l, mat * (l ** -0.5))
    mat = np.full((l, l), 2.0 / l)
    np.fill_diagonal(mat, -(l - 2.0) / l)
    return FlatBlock(l, mat)


def block_diagonal(blocks: Sequence[FlatBlock], clusters: Sequence[IndexSet], dim: int) -> OrthogonalMatrix:
    """Embed one block per cluster (acting on the cluster's sorted mode indices)."""
    if len(blocks) != len(clusters):
        raise ValueError("need one block per cluster")
    mat = np.eye(dim)
    seen: set = set()
    for block, cluster in zip(blocks, clusters):
        if block.size != len(cluster):
            raise ValueError(f"block size {block.size} != cluster size {len(cluster)}")
        if seen & set(cluster):
            raise ValueError("clusters overlap")
        seen |= set(cluster)
        idx = [i - 1 for i in sorted(cluster)]
        mat[np.ix_(idx, idx)] = block.entries
    return OrthogonalMatrix(mat)


def compose_setting(
    resh: ModePermutation, sup: OrthogonalMatrix, pair: ModePermutation
) -> OrthogonalMatrix:
    """R of the round unitary U_resh U_sup U_pair: R_resh R_sup R_pair."""
    if resh.dim != sup.dim or pair.dim != sup.dim:
        raise ValueError("dimension mismatch between reshuffle, superposition and pairing")
    return permutation_to_orthogonal(resh) @ sup @ permutation_to_orthogonal(pair)


def random_orthogonal(dim: int, rng: np.random.Generator) -> OrthogonalMatrix:
    """Haar-ish random orthogonal matrix via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    return OrthogonalMatrix(q)
