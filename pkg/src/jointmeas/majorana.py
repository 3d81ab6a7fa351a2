"""Exact algebra of Majorana index sets and monomials.

A Majorana monomial over an even subset ``A`` of the mode indices ``1..2N`` is
the Hermitian operator ``i^{|A|/2} * prod_{i in A} gamma_i`` with the factors
arranged in increasing index order.  This module manipulates only the index
sets and the exact fourth-root-of-unity phases produced by products; nothing
here touches floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple

IndexSet = Tuple[int, ...]

# Exact values of i**k for k = 0..3.  Components are 0/+-1 so the complex
# values are exact in floating point as well.
_QUARTER_PHASES = (1 + 0j, 1j, -1 + 0j, -1j)


@dataclass(frozen=True)
class ModeCount:
    """Number of fermionic modes N; there are 2N Majorana modes."""

    n_fermionic: int

    def __post_init__(self):
        if self.n_fermionic < 1:
            raise ValueError(f"need at least one fermionic mode, got {self.n_fermionic}")

    @property
    def n_majorana(self) -> int:
        return 2 * self.n_fermionic


def index_set(indices: Iterable[int]) -> IndexSet:
    """Canonicalize ``indices`` to a strictly increasing tuple.

    Duplicates are rejected rather than cancelled: a repeated index in a
    monomial description is almost always a caller bug.
    """
    out = tuple(sorted(indices))
    for x, y in zip(out, out[1:]):
        if x == y:
            raise ValueError(f"duplicate index {x}")
    if out and out[0] < 1:
        raise ValueError(f"indices are 1-based, got {out[0]}")
    return out


def check_range(a: IndexSet, n: ModeCount) -> None:
    if a and a[-1] > n.n_majorana:
        raise ValueError(f"index {a[-1]} out of range for 2N={n.n_majorana}")


@dataclass(frozen=True)
class SignedTerm:
    """A canonical monomial times an exact phase ``i**phase_quarter``."""

    phase_quarter: int
    indices: IndexSet

    @property
    def phase(self) -> complex:
        return _QUARTER_PHASES[self.phase_quarter % 4]


def symmetric_difference(a: IndexSet, b: IndexSet) -> IndexSet:
    return tuple(sorted(set(a) ^ set(b)))


def _crossings(a: IndexSet, b: IndexSet) -> int:
    """Number of pairs (x in a, y in b) with x > y.

    This is the number of anticommutations needed to merge the ordered word
    ``a + b`` into a single ordered word (equal indices end up adjacent and
    cancel via gamma^2 = 1 without an extra sign).
    """
    count = 0
    j = 0
    for x in a:
        while j < len(b) and b[j] < x:
            j += 1
        count += j
    return count


def commutes(a: IndexSet, b: IndexSet, n: ModeCount | None = None) -> bool:
    """True iff gamma_A gamma_B = gamma_B gamma_A, i.e. |A||B| + |A and B| is even."""
    if n is not None:
        check_range(a, n)
        check_range(b, n)
    overlap = len(set(a) & set(b))
    return (len(a) * len(b) + overlap) % 2 == 0


def monomial_product(a: IndexSet, b: IndexSet, n: ModeCount | None = None) -> SignedTerm:
    """Product of canonical monomials: gamma_A gamma_B = phase * gamma_{A xor B}.

    Both sets must be even-sized (the canonical convention only defines
    monomials for even sets).  The phase is i^{|A and B|} * (-1)^{crossings},
    always one of {1, i, -1, -i}.
    """
    if len(a) % 2 or len(b) % 2:
        raise ValueError("monomial_product is defined for even-sized sets only")
    if n is not None:
        check_range(a, n)
        check_range(b, n)
    overlap = len(set(a) & set(b))
    quarter = (overlap + 2 * _crossings(a, b)) % 4
    return SignedTerm(quarter, symmetric_difference(a, b))
