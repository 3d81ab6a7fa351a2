#!/usr/bin/env python3
"""Generate the vendored molecular Hamiltonian files in src/jointmeas/data/.

Self-contained electronic-structure pipeline for molecules whose basis sets
contain only s-type Gaussians (H2 in STO-3G / 6-31G, H4 chain in STO-3G):
closed-form integrals, restricted Hartree-Fock, spin-orbital integrals in the
molecular-orbital basis, and the Majorana decomposition

    H = constant + sum_A h_A gamma_A,   gamma_A = i^{|A|/2} prod_{i in A} gamma_i

with 1-based Majorana indices, spin-orbitals interleaved (alpha, beta, ...),
and a_p = (gamma_{2p-1} + i gamma_{2p}) / 2.

The reference energy stored in each file is the full-CI ground energy computed
here in the fixed-particle-number determinant basis (Slater rules via direct
operator application), which is independent of the package's Jordan-Wigner
diagonalization path.

This script is provenance tooling, not part of the installed package.
"""

from __future__ import annotations

import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.special import erf

ANGSTROM_TO_BOHR = 1.8897261245650618

STO3G_H = [(3.42525091, 0.15432897), (0.62391373, 0.53532814), (0.16885540, 0.44463454)]
G631_H_INNER = [(18.7311370, 0.03349460), (2.8253937, 0.23472695), (0.6401217, 0.81375733)]
G631_H_OUTER = [(0.1612778, 1.0)]


def boys0(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-12
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 3.0, 0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe)))


class Shell:
    """A contracted s-type Gaussian: exponents and normalized coefficients."""

    def __init__(self, center, primitives):
        self.center = np.asarray(center, dtype=float)
        self.exps = np.array([a for a, _ in primitives])
        coeffs = np.array([c for _, c in primitives])
        norms = (2.0 * self.exps / np.pi) ** 0.75
        self.coeffs = coeffs * norms
        self_overlap = 0.0
        for ai, ci in zip(self.exps, self.coeffs):
            for aj, cj in zip(self.exps, self.coeffs):
                self_overlap += ci * cj * (np.pi / (ai + aj)) ** 1.5
        self.coeffs /= math.sqrt(self_overlap)


def _pair_terms(sh1, sh2):
    ab2 = float(np.dot(sh1.center - sh2.center, sh1.center - sh2.center))
    for a, ca in zip(sh1.exps, sh1.coeffs):
        for b, cb in zip(sh2.exps, sh2.coeffs):
            p = a + b
            pre = ca * cb * math.exp(-a * b / p * ab2)
            center = (a * sh1.center + b * sh2.center) / p
            yield a, b, p, pre, center, ab2


def overlap(sh1, sh2):
    return sum(pre * (np.pi / p) ** 1.5 for _, _, p, pre, _, _ in _pair_terms(sh1, sh2))


def kinetic(sh1, sh2):
    total = 0.0
    for a, b, p, pre, _, ab2 in _pair_terms(sh1, sh2):
        mu = a * b / p
        total += pre * mu * (3.0 - 2.0 * mu * ab2) * (np.pi / p) ** 1.5
    return total


def nuclear(sh1, sh2, charges):
    total = 0.0
    for _, _, p, pre, center, _ in _pair_terms(sh1, sh2):
        for z, pos in charges:
            pc2 = float(np.dot(center - pos, center - pos))
            total += -z * pre * 2.0 * np.pi / p * float(boys0(p * pc2))
    return total


def eri(sh1, sh2, sh3, sh4):
    total = 0.0
    for _, _, p, pre12, cp, _ in _pair_terms(sh1, sh2):
        for _, _, q, pre34, cq, _ in _pair_terms(sh3, sh4):
            pq2 = float(np.dot(cp - cq, cp - cq))
            total += (
                pre12
                * pre34
                * 2.0
                * np.pi**2.5
                / (p * q * math.sqrt(p + q))
                * float(boys0(p * q / (p + q) * pq2))
            )
    return total


def rhf(shells, charges, n_electrons):
    n = len(shells)
    s = np.array([[overlap(a, b) for b in shells] for a in shells])
    t = np.array([[kinetic(a, b) for b in shells] for a in shells])
    v = np.array([[nuclear(a, b, charges) for b in shells] for a in shells])
    hcore = t + v
    g = np.zeros((n, n, n, n))
    for i, j, k, l in itertools.product(range(n), repeat=4):
        g[i, j, k, l] = eri(shells[i], shells[j], shells[k], shells[l])

    e_nuc = 0.0
    for (z1, p1), (z2, p2) in itertools.combinations(charges, 2):
        e_nuc += z1 * z2 / float(np.linalg.norm(p1 - p2))

    vals, vecs = np.linalg.eigh(s)
    x = vecs @ np.diag(vals**-0.5) @ vecs.T
    n_occ = n_electrons // 2
    dm = np.zeros((n, n))
    energy = 0.0
    for _ in range(300):
        fock = hcore + np.einsum("ls,mnls->mn", dm, g) - 0.5 * np.einsum("ls,mlns->mn", dm, g)
        fp = x.T @ fock @ x
        mo_e, cp = np.linalg.eigh(fp)
        c = x @ cp
        dm_new = 2.0 * c[:, :n_occ] @ c[:, :n_occ].T
        e_new = 0.5 * np.einsum("mn,mn->", dm_new, hcore + fock) + e_nuc
        if abs(e_new - energy) < 1e-13 and np.max(np.abs(dm_new - dm)) < 1e-11:
            dm, energy = dm_new, e_new
            break
        dm, energy = dm_new, e_new
    return energy, e_nuc, c, hcore, g


def spin_orbital_integrals(c, hcore, g):
    """MO-basis one-body h[p,q] and antisymmetrized-ready <pq|rs> over spin orbitals."""
    h_mo = c.T @ hcore @ c
    g_mo = np.einsum("mi,nj,mnls,lk,so->ijko", c, c, g, c, c, optimize=True)
    n_spatial = h_mo.shape[0]
    n_so = 2 * n_spatial
    h_so = np.zeros((n_so, n_so))
    for p, q in itertools.product(range(n_so), repeat=2):
        if p % 2 == q % 2:
            h_so[p, q] = h_mo[p // 2, q // 2]
    # physicist <pq|rs> = (pr|qs) chemist, with spin deltas (p,r) and (q,s)
    v_so = np.zeros((n_so, n_so, n_so, n_so))
    for p, q, r, s in itertools.product(range(n_so), repeat=4):
        if p % 2 == r % 2 and q % 2 == s % 2:
            v_so[p, q, r, s] = g_mo[p // 2, r // 2, q // 2, s // 2]
    return h_so, v_so


def fci_ground_energy(h_so, v_so, n_electrons, e_nuc):
    """Full CI in the fixed-particle-number determinant basis (bitmask operators)."""
    n_so = h_so.shape[0]

    def annihilate(mask, p):
        if not (mask >> p) & 1:
            return None
        sign = -1.0 if bin(mask & ((1 << p) - 1)).count("1") % 2 else 1.0
        return mask & ~(1 << p), sign

    def create(mask, p):
        if (mask >> p) & 1:
            return None
        sign = -1.0 if bin(mask & ((1 << p) - 1)).count("1") % 2 else 1.0
        return mask | (1 << p), sign

    dets = [sum(1 << p for p in occ) for occ in itertools.combinations(range(n_so), n_electrons)]
    index = {mask: i for i, mask in enumerate(dets)}
    dim = len(dets)
    ham = np.zeros((dim, dim))
    for col, mask in enumerate(dets):
        for p, q in itertools.product(range(n_so), repeat=2):
            if h_so[p, q] == 0.0:
                continue
            step = annihilate(mask, q)
            if step is None:
                continue
            m1, s1 = step
            step = create(m1, p)
            if step is None:
                continue
            m2, s2 = step
            ham[index[m2], col] += h_so[p, q] * s1 * s2
        for p, q, r, s in itertools.product(range(n_so), repeat=4):
            # 0.5 <pq|rs> a+_p a+_q a_s a_r, rightmost operator applied first
            coeff = 0.5 * v_so[p, q, r, s]
            if coeff == 0.0:
                continue
            step = annihilate(mask, r)
            if step is None:
                continue
            m1, s1 = step
            step = annihilate(m1, s)
            if step is None:
                continue
            m2, s2 = step
            step = create(m2, q)
            if step is None:
                continue
            m3, s3 = step
            step = create(m3, p)
            if step is None:
                continue
            m4, s4 = step
            ham[index[m4], col] += coeff * s1 * s2 * s3 * s4
    return float(np.linalg.eigh(ham)[0][0]) + e_nuc


def _ordered_product(t1, t2):
    """Product of ordered Majorana words: sign and the merged even/odd word."""
    crossings = 0
    j = 0
    for x in t1:
        k = j
        while k < len(t2) and t2[k] < x:
            k += 1
        crossings += k
    merged = sorted(t1 + t2)
    out = []
    i = 0
    while i < len(merged):
        if i + 1 < len(merged) and merged[i] == merged[i + 1]:
            i += 2
            continue
        out.append(merged[i])
        i += 1
    return (-1.0 if crossings % 2 else 1.0), tuple(out)


def majorana_terms(h_so, v_so, e_nuc):
    """Expand the second-quantized Hamiltonian into canonical Majorana terms."""
    n_so = h_so.shape[0]
    # a_p and a_p^dag as lists of (coeff, majorana-word)
    def ladder(p, dagger):
        lo, hi = 2 * p + 1, 2 * p + 2
        sign = -0.5j if dagger else 0.5j
        return [(0.5, (lo,)), (sign, (hi,))]

    acc = {(): complex(e_nuc)}

    def add_product(prefactor, factors):
        words = [(prefactor, ())]
        for factor in factors:
            new = []
            for coeff, word in words:
                for fc, fw in factor:
                    sign, merged = _ordered_product(word, fw)
                    new.append((coeff * fc * sign, merged))
            words = new
        for coeff, word in words:
            acc[word] = acc.get(word, 0.0) + coeff

    for p, q in itertools.product(range(n_so), repeat=2):
        if h_so[p, q] != 0.0:
            add_product(h_so[p, q], [ladder(p, True), ladder(q, False)])
    for p, q, r, s in itertools.product(range(n_so), repeat=4):
        coeff = 0.5 * v_so[p, q, r, s]
        if coeff != 0.0:
            add_product(
                coeff, [ladder(p, True), ladder(q, True), ladder(s, False), ladder(r, False)]
            )

    constant = acc.pop((), 0.0)
    assert abs(constant.imag) < 1e-10
    terms = {}
    for word, coeff in acc.items():
        # c * prod(gamma) = (c / i^{k/2}) gamma_word under the canonical convention
        h_a = coeff * (-1j) ** (len(word) // 2)
        assert len(word) % 2 == 0, word
        assert abs(h_a.imag) < 1e-10, (word, h_a)
        if abs(h_a.real) > 1e-12:
            terms[word] = float(h_a.real)
    return float(constant.real), terms


def check_chemistry_structure(terms):
    for word in terms:
        odd = sum(1 for i in word if i % 2)
        assert len(word) in (2, 4), word
        assert (len(word), odd) in ((2, 1), (4, 2)), word


def build_molecule(name, basis_name, atoms_angstrom, shell_builder, n_electrons):
    charges = [(1.0, np.array(pos) * ANGSTROM_TO_BOHR) for pos in atoms_angstrom]
    shells = shell_builder([pos for _, pos in charges])
    e_rhf, e_nuc, c, hcore, g = rhf(shells, charges, n_electrons)
    h_so, v_so = spin_orbital_integrals(c, hcore, g)
    e_fci = fci_ground_energy(h_so, v_so, n_electrons, e_nuc)
    constant, terms = majorana_terms(h_so, v_so, e_nuc)
    check_chemistry_structure(terms)
    n_modes = h_so.shape[0]
    print(f"{name}/{basis_name}: {n_modes} spin-orbitals, {len(terms)} Majorana terms")
    print(f"  RHF = {e_rhf:.8f} Ha,  FCI = {e_fci:.8f} Ha")
    doc = {
        "schema_version": 1,
        "n_modes": n_modes,
        "constant": constant,
        "terms": [
            {"indices": list(a), "coeff": coeff}
            for a, coeff in sorted(terms.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ],
        "reference_energy": e_fci,
        "metadata": {
            "molecule": name,
            "basis": basis_name,
            "geometry_angstrom": [["H", list(map(float, pos))] for pos in atoms_angstrom],
            "n_electrons": n_electrons,
            "scf_energy": e_rhf,
            "reference_method": "FCI (determinant basis, Slater rules)",
            "generator": "scripts/make_molecule_files.py",
            "orbital_order": "interleaved spin (alpha, beta) per spatial MO; 1-based Majorana indices",
        },
    }
    return doc


def h_sto3g_shells(centers):
    return [Shell(c, STO3G_H) for c in centers]


def h_631g_shells(centers):
    shells = []
    for c in centers:
        shells.append(Shell(c, G631_H_INNER))
        shells.append(Shell(c, G631_H_OUTER))
    return shells


def main():
    out_dir = Path(__file__).resolve().parent.parent / "src" / "jointmeas" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (
            "h2_631g.json",
            build_molecule(
                "H2", "6-31G", [(0.0, 0.0, 0.0), (0.0, 0.0, 0.7414)], h_631g_shells, 2
            ),
        ),
        (
            "h2_sto3g.json",
            build_molecule(
                "H2", "STO-3G", [(0.0, 0.0, 0.0), (0.0, 0.0, 0.7414)], h_sto3g_shells, 2
            ),
        ),
        (
            "h4_sto3g.json",
            build_molecule(
                "H4",
                "STO-3G",
                [(0.0, 0.0, 0.9 * k) for k in range(4)],
                h_sto3g_shells,
                4,
            ),
        ),
    ]
    for filename, doc in jobs:
        path = out_dir / filename
        path.write_text(json.dumps(doc, indent=1, allow_nan=False))
        print(f"  wrote {path}")


if __name__ == "__main__":
    sys.exit(main())
