import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointmeas import dense
from jointmeas.majorana import (
    ModeCount,
    commutes,
    index_set,
    monomial_product,
    symmetric_difference,
)


def even_subsets(d):
    for k in range(0, d + 1, 2):
        yield from (index_set(c) for c in itertools.combinations(range(1, d + 1), k))


def test_mode_count_validation():
    assert ModeCount(3).n_majorana == 6
    with pytest.raises(ValueError):
        ModeCount(0)


def test_index_set_canonicalization():
    assert index_set([3, 1]) == (1, 3)
    with pytest.raises(ValueError):
        index_set([1, 1])
    with pytest.raises(ValueError):
        index_set([0, 2])


@pytest.mark.parametrize(
    "a,b,expected",
    [
        ((1, 2), (1, 2), True),
        ((1, 2), (2, 3), False),
        ((1, 2), (3, 4), True),
    ],
)
def test_commutes_examples(a, b, expected):
    assert commutes(a, b, ModeCount(2)) is expected


def test_commutes_range_check():
    with pytest.raises(ValueError):
        commutes((1, 2), (2, 9), ModeCount(2))


@pytest.mark.parametrize(
    "a,b,phase,result",
    [
        ((1, 2), (1, 2), 1, ()),
        ((1, 2), (3, 4), 1, (1, 2, 3, 4)),
        ((), (1, 4), 1, (1, 4)),
    ],
)
def test_monomial_product_examples(a, b, phase, result):
    term = monomial_product(a, b)
    assert term.phase == phase
    assert term.indices == result


def test_monomial_product_rejects_odd():
    with pytest.raises(ValueError):
        monomial_product((1,), (1, 2))


@pytest.mark.parametrize(
    "a,b,expected",
    [
        ((1, 2), (1, 2), ()),
        ((1, 2), (2, 3), (1, 3)),
        ((1, 2, 5, 6), (5, 6, 7, 8), (1, 2, 7, 8)),
    ],
)
def test_symmetric_difference_examples(a, b, expected):
    assert symmetric_difference(a, b) == expected


def test_self_product_is_identity():
    for a in even_subsets(6):
        term = monomial_product(a, a)
        assert term.indices == ()
        assert term.phase == 1


@given(
    st.sets(st.integers(min_value=1, max_value=8), max_size=8),
    st.sets(st.integers(min_value=1, max_value=8), max_size=8),
)
def test_commutation_matches_product_phases(sa, sb):
    if len(sa) % 2 or len(sb) % 2:
        return
    a, b = index_set(sa), index_set(sb)
    ab = monomial_product(a, b)
    ba = monomial_product(b, a)
    sign = (-1) ** (len(a) * len(b) + len(sa & sb))
    assert ab.indices == ba.indices
    assert ab.phase == sign * ba.phase
    assert commutes(a, b) == (ab.phase == ba.phase)


@pytest.mark.parametrize("n_f", [1, 2, 3])
def test_phases_match_dense_matrices(n_f):
    n = ModeCount(n_f)
    subsets = list(even_subsets(2 * n_f))
    mats = {a: dense.dense_monomial(n, a) for a in subsets}
    for a in subsets:
        for b in subsets:
            term = monomial_product(a, b)
            assert np.max(np.abs(mats[a] @ mats[b] - term.phase * mats[term.indices])) < 1e-12


@pytest.mark.parametrize("n_f", [1, 2, 3])
def test_dense_monomials_hermitian_involutions(n_f):
    n = ModeCount(n_f)
    dim = 2**n_f
    for a in even_subsets(2 * n_f):
        m = dense.dense_monomial(n, a)
        assert np.max(np.abs(m - m.conj().T)) < 1e-12
        vals = np.linalg.eigvalsh(m)
        assert np.max(np.abs(np.abs(vals) - 1.0)) < 1e-12
