import numpy as np
import pytest

from jointmeas import dense
from jointmeas.flo import (
    FlatBlock,
    ModePermutation,
    OrthogonalMatrix,
    block_diagonal,
    build_flat_block,
    compose_setting,
    permutation_to_orthogonal,
    random_orthogonal,
    submatrix_det,
    visibility,
)
from jointmeas.majorana import ModeCount, index_set


def test_orthogonality_validated():
    OrthogonalMatrix(np.eye(3))
    with pytest.raises(ValueError):
        OrthogonalMatrix(np.eye(3) * 1.001)


def test_submatrix_det_examples():
    ident = OrthogonalMatrix.identity(6)
    assert submatrix_det(ident, (1, 3), (1, 3)) == 1.0
    assert submatrix_det(ident, (1, 2), (3, 4)) == 0.0
    block = build_flat_block(3, "aij")
    mat = np.eye(6)
    mat[:3, :3] = block.entries
    r = OrthogonalMatrix(mat)
    assert abs(submatrix_det(r, (1,), (2,)) - 2.0 / 3.0) < 1e-15


def test_submatrix_det_errors():
    ident = OrthogonalMatrix.identity(4)
    with pytest.raises(ValueError):
        submatrix_det(ident, (1, 2), (1,))
    with pytest.raises(ValueError):
        submatrix_det(ident, (1, 9), (1, 2))


def test_visibility_examples():
    ident = OrthogonalMatrix.identity(6)
    assert visibility(ident, (1, 2), (1, 2)) == 1.0
    p = permutation_to_orthogonal(ModePermutation((3, 4, 1, 2, 5, 6)))
    assert abs(visibility(p, (3, 4), (1, 2)) - 1.0) < 1e-15


def test_visibility_bounded_for_orthogonal():
    rng = np.random.default_rng(5)
    r = random_orthogonal(8, rng)
    for _ in range(50):
        k = int(rng.integers(1, 5))
        rows = index_set((rng.choice(8, size=k, replace=False) + 1).tolist())
        cols = index_set((rng.choice(8, size=k, replace=False) + 1).tolist())
        assert 0.0 <= visibility(r, rows, cols) <= 1.0 + 1e-12


@pytest.mark.parametrize("size", [1, 2, 4, 8, 16])
def test_flat_block_hadamard_family(size):
    block = build_flat_block(size, "auto")
    if size == 1:
        assert block.entries[0, 0] == 1.0
        return
    assert block.min_abs_entry == size**-0.5
    assert np.max(np.abs(np.abs(block.entries) - size**-0.5)) == 0.0


def test_flat_block_almost_hadamard():
    block = build_flat_block(3)
    assert np.allclose(np.diag(block.entries), -1.0 / 3.0)
    off = block.entries[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 2.0 / 3.0)
    assert np.max(np.abs(block.entries.T @ block.entries - np.eye(3))) < 1e-12


def test_flat_block_general_aij():
    block = build_flat_block(5)
    assert abs(block.entries[0, 0] + 3.0 / 5.0) < 1e-15
    assert abs(block.entries[0, 1] - 2.0 / 5.0) < 1e-15
    assert block.min_abs_entry == pytest.approx(2.0 / 5.0)


def test_flat_block_errors():
    with pytest.raises(ValueError):
        build_flat_block(0)
    with pytest.raises(ValueError):
        build_flat_block(3, "hadamard")
    with pytest.raises(ValueError):
        build_flat_block(4, "nonsense")


def test_permutation_ops():
    p = ModePermutation((2, 3, 1, 4))
    assert p(1) == 2
    assert p.inverse()(2) == 1
    assert p.compose(p.inverse()) == ModePermutation.identity(4)
    assert p.power(3) == ModePermutation.identity(4)
    with pytest.raises(ValueError):
        ModePermutation((1, 1, 2))


def test_permutation_matrix_is_doubly_stochastic_binary():
    p = ModePermutation((4, 1, 3, 2, 6, 5))
    mat = permutation_to_orthogonal(p).entries
    assert set(np.unique(mat)) == {0.0, 1.0}
    assert np.all(mat.sum(axis=0) == 1.0)
    assert np.all(mat.sum(axis=1) == 1.0)


def test_permutation_orientation_against_dense_oracle():
    rng = np.random.default_rng(6)
    n = ModeCount(3)
    for _ in range(5):
        images = tuple(int(x) for x in rng.permutation(6) + 1)
        p = ModePermutation(images)
        u = dense.flo_unitary(n, permutation_to_orthogonal(p).entries)
        for i in range(1, 7):
            conj = u @ dense.jw_gamma(n, i) @ u.conj().T
            assert np.max(np.abs(conj - dense.jw_gamma(n, p(i)))) < 1e-9


def test_compose_setting_order_and_identity():
    ident = ModePermutation.identity(6)
    assert np.allclose(
        compose_setting(ident, OrthogonalMatrix.identity(6), ident).entries, np.eye(6)
    )
    rng = np.random.default_rng(7)
    resh = ModePermutation(tuple(int(x) for x in rng.permutation(6) + 1))
    pair = ModePermutation(tuple(int(x) for x in rng.permutation(6) + 1))
    sup = random_orthogonal(6, rng)
    composed = compose_setting(resh, sup, pair)
    manual = (
        permutation_to_orthogonal(resh).entries
        @ sup.entries
        @ permutation_to_orthogonal(pair).entries
    )
    assert np.max(np.abs(composed.entries - manual)) == 0.0


def test_compose_setting_block_diagonal_case():
    blocks = [build_flat_block(3), build_flat_block(3)]
    clusters = [(1, 2, 3), (4, 5, 6)]
    sup = block_diagonal(blocks, clusters, 6)
    ident = ModePermutation.identity(6)
    composed = compose_setting(ident, sup, ident)
    assert np.allclose(composed.entries[:3, :3], blocks[0].entries)
    assert np.allclose(composed.entries[3:, 3:], blocks[1].entries)
    assert np.allclose(composed.entries[:3, 3:], 0.0)


def test_compose_setting_dimension_mismatch():
    with pytest.raises(ValueError):
        compose_setting(
            ModePermutation.identity(4),
            OrthogonalMatrix.identity(6),
            ModePermutation.identity(6),
        )
