"""Exact brute-force reference at small mode counts.

Dense Jordan-Wigner matrices, statevector actions, FLO unitary synthesis,
ground states of ingested Hamiltonians, and exact enumeration of the
measurement protocol's outcome distribution.  Everything here is written for
obviousness, not speed; the rest of the package pins its sign conventions
against this module.

Qubit ``j`` (1-based) carries Majorana modes ``2j-1`` and ``2j``.  Basis
states are indexed with qubit 1 as the most significant bit, matching the
Kronecker-product order ``op_1 (x) op_2 (x) ...``.
"""

from __future__ import annotations

import itertools
from typing import Dict, Sequence, Tuple

import numpy as np

from .majorana import IndexSet, ModeCount, index_set

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)

OPERATOR_CAP = 8       # dense 2^N x 2^N matrices
FLO_CAP = 10           # composed FLO unitaries (needed up to 9 grid qubits)
STATEVECTOR_CAP = 16   # matrix-free statevector actions
ENUMERATION_CAP = 4    # exact protocol enumeration over 2^{2N} subsets


def _check_cap(n: int, cap: int, what: str) -> None:
    if n > cap:
        raise ValueError(f"{what} capped at N={cap}, got N={n}")


def _jw_gamma_raw(nq: int, i: int) -> np.ndarray:
    if not 1 <= i <= 2 * nq:
        raise ValueError(f"mode index {i} out of range for 2N={2 * nq}")
    j = (i + 1) // 2
    head = _X if i % 2 else _Y
    op = np.eye(1, dtype=complex)
    for k in range(1, nq + 1):
        if k < j:
            op = np.kron(op, _Z)
        elif k == j:
            op = np.kron(op, head)
        else:
            op = np.kron(op, _I2)
    return op


def jw_gamma(n: ModeCount, i: int) -> np.ndarray:
    """Dense Jordan-Wigner matrix of the i-th Majorana operator."""
    _check_cap(n.n_fermionic, OPERATOR_CAP, "dense operators")
    return _jw_gamma_raw(n.n_fermionic, i)


def dense_monomial(n: ModeCount, a: IndexSet) -> np.ndarray:
    """Dense matrix of the canonical monomial i^{|A|/2} prod gamma_i."""
    if len(a) % 2:
        raise ValueError("canonical monomials are defined for even-sized sets")
    op = np.eye(2**n.n_fermionic, dtype=complex) * (1j) ** (len(a) // 2)
    for i in a:
        op = op @ jw_gamma(n, i)
    return op


def apply_gamma(psi: np.ndarray, i: int, n: ModeCount) -> np.ndarray:
    """Matrix-free gamma_i acting on a statevector (or on matrix columns)."""
    nq = n.n_fermionic
    _check_cap(nq, STATEVECTOR_CAP, "statevector actions")
    j = (i + 1) // 2
    z = np.arange(psi.shape[0])
    flip = z ^ (1 << (nq - j))
    # Z-string parity over qubits 1..j-1 (bits above position nq-j).
    string = np.bitwise_count((z >> (nq - j + 1)).astype(np.uint64)).astype(np.int64)
    phase = np.where(string % 2 == 0, 1.0 + 0j, -1.0 + 0j)
    if i % 2 == 0:
        # Y head: <z|gamma_{2j}|z'> = i(-1)^{z'_j} at the source bit z'_j.
        src_bit = (flip >> (nq - j)) & 1
        phase = phase * np.where(src_bit == 1, -1j, 1j)
    if psi.ndim == 2:
        return phase[:, None] * psi[flip, :]
    return phase * psi[flip]


def apply_monomial(psi: np.ndarray, a: IndexSet, n: ModeCount) -> np.ndarray:
    """Matrix-free gamma_A acting on a statevector, canonical phase included."""
    if len(a) % 2:
        raise ValueError("canonical monomials are defined for even-sized sets")
    out = psi
    for i in reversed(a):
        out = apply_gamma(out, i, n)
    return (1j) ** (len(a) // 2) * out


def conjugate_statevector(psi: np.ndarray, x: IndexSet, n: ModeCount) -> np.ndarray:
    """(prod_{i in X} gamma_i)|psi>, any |X|; callers never consume the global phase."""
    out = psi
    for i in reversed(x):
        out = apply_gamma(out, i, n)
    return out


_GAMMA_CACHE: Dict[Tuple[int, int], np.ndarray] = {}


def _gamma_matrix_cached(n: ModeCount, i: int) -> np.ndarray:
    key = (n.n_fermionic, i)
    if key not in _GAMMA_CACHE:
        _check_cap(n.n_fermionic, FLO_CAP, "dense gamma matrices")
        g = _jw_gamma_raw(n.n_fermionic, i)
        g.flags.writeable = False
        _GAMMA_CACHE[key] = g
    return _GAMMA_CACHE[key]


def flo_unitary(n: ModeCount, r: np.ndarray) -> np.ndarray:
    """A unitary U with U gamma_i U^dag = sum_j R_{ji} gamma_j (global phase free).

    Synthesized as a product of two-mode rotations exp(phi gamma_a gamma_b)
    from a Givens reduction of R, with one gamma_1 parity factor when
    det R = -1.
    """
    nq = n.n_fermionic
    _check_cap(nq, FLO_CAP, "FLO unitaries")
    d = 2 * nq
    r = np.asarray(r, dtype=float)
    if r.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} orthogonal matrix, got {r.shape}")
    if np.max(np.abs(r.T @ r - np.eye(d))) > 1e-8:
        raise ValueError("matrix is not orthogonal")

    m = r.copy()
    u = np.eye(2**nq, dtype=complex)
    if np.linalg.det(m) < 0:
        # R = M R_{gamma_1} with R_{gamma_1} = diag(1,-1,...,-1), so U = U_M gamma_1.
        m = m @ np.diag([1.0] + [-1.0] * (d - 1))
        u = _gamma_matrix_cached(n, 1).copy()

    rotations = []  # (a, b, theta): plane rotation applied to m during reduction
    for col in range(d):
        for row in range(d - 1, col, -1):
            x, y = m[row - 1, col], m[row, col]
            if abs(y) < 1e-14:
                continue
            theta = float(np.arctan2(y, x))
            g = np.eye(d)
            g[row - 1, row - 1] = g[row, row] = np.cos(theta)
            g[row - 1, row] = np.sin(theta)
            g[row, row - 1] = -np.sin(theta)
            m = g @ m
            rotations.append((row - 1, row, theta))
    # m is now orthogonal upper triangular, hence diag(+-1) with det +1; clear
    # the -1 entries (an even number) pairwise with half-turn rotations.
    negs = [k for k in range(d) if m[k, k] < 0]
    for a, b in zip(negs[0::2], negs[1::2]):
        rotations.append((a, b, np.pi))

    # (prod G_k) M' = I, so M' = G_1^T G_2^T ... and U = prod_k U_{G_k^T} in the
    # same order.  U_{G(a,b,theta)^T} = exp(-(theta/2) gamma_a gamma_b) under
    # the column convention U g_a U^dag = cos(t) g_a - sin(t) g_b for G(a,b,t).
    for a, b, theta in reversed(rotations):
        gab = _gamma_matrix_cached(n, a + 1) @ _gamma_matrix_cached(n, b + 1)
        u = (np.cos(theta / 2) * np.eye(2**nq) - np.sin(theta / 2) * gab) @ u
    return u


def assemble_hamiltonian(spec) -> np.ndarray:
    """Dense JW matrix of a HamiltonianSpec (each gamma_A is a signed permutation)."""
    n = spec.n
    nq = n.n_fermionic
    _check_cap(nq, 12, "dense Hamiltonian assembly")
    dim = 2**nq
    h = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for a, coeff in spec.terms.items():
        h += coeff * apply_monomial(eye, a, n)
    h += spec.constant * eye
    if np.max(np.abs(h - h.conj().T)) > 1e-9:
        raise ValueError("assembled Hamiltonian is not Hermitian; check the coefficient file")
    return h


def ground_state(spec) -> Tuple[float, np.ndarray]:
    """Lowest eigenpair of the JW matrix of the Hamiltonian."""
    nq = spec.n.n_fermionic
    if nq <= 10:
        h = assemble_hamiltonian(spec)
        vals, vecs = np.linalg.eigh(h)
        energy, vec = float(vals[0]), vecs[:, 0]
    elif nq <= STATEVECTOR_CAP:
        from scipy.sparse.linalg import LinearOperator, eigsh

        dim = 2**nq
        terms = list(spec.terms.items())

        def matvec(v):
            out = spec.constant * v
            for a, coeff in terms:
                out = out + coeff * apply_monomial(v, a, spec.n)
            return out

        op = LinearOperator((dim, dim), matvec=matvec, dtype=complex)
        vals, vecs = eigsh(op, k=1, which="SA")
        energy, vec = float(vals[0]), vecs[:, 0]
    else:
        raise ValueError(f"ground_state capped at N={STATEVECTOR_CAP}, got N={nq}")
    vec = vec / np.linalg.norm(vec)
    residual = np.linalg.norm(_apply_spec(spec, vec) - energy * vec)
    if residual > 1e-8:
        raise ArithmeticError(f"eigenpair residual {residual:.2e} above 1e-8")
    return energy, vec


def _apply_spec(spec, v: np.ndarray) -> np.ndarray:
    out = spec.constant * v
    for a, coeff in spec.terms.items():
        out = out + coeff * apply_monomial(v, a, spec.n)
    return out


def expectation_statevector(psi: np.ndarray, a: IndexSet, n: ModeCount) -> float:
    """<psi| gamma_A |psi> (real for even A)."""
    return float(np.real(np.vdot(psi, apply_monomial(psi, a, n))))


def q_of_basis_state(z: int, nq: int) -> Tuple[int, ...]:
    """Pair outcomes (q_1..q_N) of basis state z; q_i = 2 n_i - 1."""
    return tuple(1 if (z >> (nq - i)) & 1 else -1 for i in range(1, nq + 1))


def exact_outcome_distribution(
    r: np.ndarray,
    b_qubits: Sequence[int],
    rho: np.ndarray,
    a: IndexSet,
    n: ModeCount,
) -> Dict[int, float]:
    """Exact distribution of e_A under protocol steps (i)-(iv).

    Naive enumeration over all 2^{2N} subsets X and all basis outcomes; this
    is the canonical oracle and is deliberately free of shortcuts.  ``rho``
    may be a statevector or a density matrix.  ``b_qubits`` lists the measured
    standard pairs (1-based qubit indices) defining B.
    """
    nq = n.n_fermionic
    _check_cap(nq, ENUMERATION_CAP, "protocol enumeration")
    d = 2 * nq
    b_modes = index_set(itertools.chain.from_iterable((2 * i - 1, 2 * i) for i in b_qubits))
    if len(b_modes) != len(a):
        raise ValueError("need |B| = |A| measured Majorana modes")
    sub = r[np.ix_([i - 1 for i in a], [i - 1 for i in b_modes])]
    s_ab = 1.0 if float(np.linalg.det(sub)) >= 0 else -1.0

    u_dag = flo_unitary(n, r).conj().T
    prob = {1: 0.0, -1: 0.0}
    for x_bits in range(2**d):
        x = tuple(i for i in range(1, d + 1) if (x_bits >> (i - 1)) & 1)
        if rho.ndim == 1:
            psi2 = u_dag @ conjugate_statevector(rho, x, n)
            p_z = np.abs(psi2) ** 2
        else:
            rho1 = conjugate_statevector(conjugate_statevector(rho, x, n).conj().T, x, n).conj().T
            rho2 = u_dag @ rho1 @ u_dag.conj().T
            p_z = np.real(np.diag(rho2))
        sign_x = -1.0 if len(set(a) & set(x)) % 2 else 1.0
        for z in range(2**nq):
            if p_z[z] < 1e-300:
                continue
            q = q_of_basis_state(z, nq)
            q_prod = 1.0
            for i in b_qubits:
                q_prod *= q[i - 1]
            e = s_ab * sign_x * q_prod
            prob[int(e)] += float(p_z[z]) / 2**d
    return prob
