"""Exhaustive self-verification suites.

Each check exercises one exactly-decidable claim: the closed form of the
noisy-measurement distribution against brute-force enumeration, the coverage
guarantees of the setting families, the agreement of every covariance-simulator
sign convention with the dense oracle, and the closed-form variance against
enumerated estimator moments.  The CLI `verify` command runs them all and
reports machine-readable results; the acceptance tests assert them.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import dense, gaussian
from .estimation import (
    CoefficientTable,
    HamiltonianSpec,
    StatevectorExpectationOracle,
    VisibilityCache,
    analytic_variance,
    sample_complexity,
    uniform_coefficients,
)
from .flo import random_orthogonal
from .majorana import ModeCount, index_set
from .schemes import (
    SettingFamily,
    build_pair_scheme,
    build_physical_scheme,
    build_quadruple_scheme_prime,
    coverage_check,
)

CLOSED_FORM_TOL = 1e-10
SIGN_PIN_TOL = 1e-9
VARIANCE_TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    details: Dict[str, object] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "details": self.details,
        }


def _timed(name: str, fn: Callable[[], Tuple[bool, Dict[str, object]]]) -> CheckResult:
    start = time.perf_counter()
    passed, details = fn()
    return CheckResult(name, passed, time.perf_counter() - start, details)


def check_outcome_distribution(n_values: Tuple[int, ...] = (2, 3), trials_per_n: int = 25, seed: int = 42) -> CheckResult:
    """Enumerated protocol distribution == (1 + x eta <gamma_A>)/2, exactly."""

    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        count = 0
        for n_f in n_values:
            if n_f > dense.ENUMERATION_CAP:
                raise ValueError(f"protocol enumeration capped at N={dense.ENUMERATION_CAP}")
            n = ModeCount(n_f)
            d = 2 * n_f
            for _ in range(trials_per_n):
                r = random_orthogonal(d, rng)
                psi = rng.standard_normal(2**n_f) + 1j * rng.standard_normal(2**n_f)
                psi /= np.linalg.norm(psi)
                k = int(rng.integers(1, n_f + 1))
                a = index_set((rng.choice(d, size=2 * k, replace=False) + 1).tolist())
                b_qubits = sorted((rng.choice(n_f, size=k, replace=False) + 1).tolist())
                dist = dense.exact_outcome_distribution(r.entries, b_qubits, psi, a, n)
                b_modes = index_set(
                    itertools.chain.from_iterable((2 * i - 1, 2 * i) for i in b_qubits)
                )
                eta = abs(
                    np.linalg.det(
                        r.entries[np.ix_([i - 1 for i in a], [j - 1 for j in b_modes])]
                    )
                )
                truth = dense.expectation_statevector(psi, a, n)
                for x in (1, -1):
                    worst = max(worst, abs(dist[x] - 0.5 * (1.0 + x * eta * truth)))
                count += 1
        return worst < CLOSED_FORM_TOL, {"triples": count, "max_deviation": worst, "tolerance": CLOSED_FORM_TOL}

    return _timed("outcome_distribution_closed_form", run)


def check_pair_coverage(l_values: Tuple[int, ...] = (2, 4, 6)) -> CheckResult:
    def run():
        details = {}
        ok = True
        for big_l in l_values:
            rep = coverage_check(build_pair_scheme(big_l * (big_l + 1)), "pairs")
            details[f"L={big_l}"] = {"targets": rep.n_targets, "uncovered": len(rep.uncovered)}
            ok &= rep.ok
        return ok, details

    return _timed("pair_scheme_coverage", run)


def check_quadruple_coverage() -> CheckResult:
    def run():
        rep = coverage_check(build_quadruple_scheme_prime(28), "quadruples")
        return rep.ok, {
            "grid": "7x4",
            "targets": rep.n_targets,
            "uncovered": len(rep.uncovered),
            "min_best_visibility": rep.min_best_visibility,
        }

    return _timed("prime7_quadruple_coverage", run)


def check_physical_coverage(l_values: Tuple[int, ...] = (3, 4, 5)) -> CheckResult:
    def run():
        details = {}
        ok = True
        for big_l in l_values:
            rep = coverage_check(build_physical_scheme(2 * big_l * big_l), "chemistry")
            details[f"L={big_l}"] = {"targets": rep.n_targets, "uncovered": len(rep.uncovered)}
            ok &= rep.ok
        return ok, details

    return _timed("physical_chemistry_coverage", run)


def check_sign_pinning(states_per_n: int = 5, seed: int = 5) -> CheckResult:
    """Gaussian expectations, conjugations, and FLO evolutions vs dense oracle."""

    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        states = 0
        for n_f in (1, 2, 3, 4):
            n = ModeCount(n_f)
            d = 2 * n_f
            evens = [
                index_set(c)
                for k in range(2, d + 1, 2)
                for c in itertools.combinations(range(1, d + 1), k)
            ]
            for _ in range(states_per_n):
                occ = rng.integers(0, 2, size=n_f).tolist()
                r1 = random_orthogonal(d, rng)
                r2 = random_orthogonal(d, rng)
                state = gaussian.apply_orthogonal(
                    gaussian.apply_orthogonal(gaussian.init_fock(occ), r1), r2
                )
                z = 0
                for i, bit in enumerate(occ, start=1):
                    if bit:
                        z |= 1 << (n_f - i)
                psi = np.zeros(2**n_f, dtype=complex)
                psi[z] = 1.0
                u = dense.flo_unitary(n, r2.entries @ r1.entries)
                psi = u @ psi
                x = index_set((rng.choice(d, size=int(rng.integers(0, d + 1)), replace=False) + 1).tolist())
                state_c = gaussian.conjugate_monomial(state, x)
                psi_c = dense.conjugate_statevector(psi, x, n)
                psi_c = psi_c / np.linalg.norm(psi_c)
                for a in evens:
                    worst = max(
                        worst,
                        abs(gaussian.expectation(state, a) - dense.expectation_statevector(psi, a, n)),
                        abs(gaussian.expectation(state_c, a) - dense.expectation_statevector(psi_c, a, n)),
                    )
                states += 1
        return worst < SIGN_PIN_TOL, {
            "states": states,
            "max_deviation": worst,
            "tolerance": SIGN_PIN_TOL,
        }

    return _timed("sign_convention_pinning", run)


def check_randomized_dilution(seed: int = 8) -> CheckResult:
    """Effective visibility of the round-randomized parent at N=2, by enumeration.

    With rounds drawn uniformly and coin flips for inconsistent rounds,
    E[e_A] = (1/K) sum_{r: A in M^(r)} eta^{(r)}_A <gamma_A>.
    """

    def run():
        fam = build_pair_scheme(4)  # embeds 2N=4 into the L=2 grid (6 modes)
        n = fam.mode_count
        rng = np.random.default_rng(seed)
        psi = rng.standard_normal(2**n.n_fermionic) + 1j * rng.standard_normal(2**n.n_fermionic)
        psi /= np.linalg.norm(psi)
        targets = [index_set(p) for p in itertools.combinations(range(1, 7), 2)]
        cache = VisibilityCache.build(fam, targets)
        worst = 0.0
        for a in targets:
            mean_e = 0.0
            for setting in fam.settings:
                key = (setting.round_index, a)
                if key not in cache.eta:
                    continue  # coin flip branch has zero mean, exactly
                dist = dense.exact_outcome_distribution(
                    setting.composed.entries,
                    [(m + 1) // 2 for m in cache.target_pairs[key][0::2]],
                    psi,
                    a,
                    n,
                )
                mean_e += (dist[1] - dist[-1]) / fam.n_settings
            eta_eff = cache.effective_visibility(a)
            truth = dense.expectation_statevector(psi, a, n)
            worst = max(worst, abs(mean_e - eta_eff * truth))
            k_a = len(cache.rounds_of(a))
            etas = [cache.eta[(r, a)] for r in cache.rounds_of(a)]
            if etas and max(etas) - min(etas) < 1e-12:
                worst = max(worst, abs(eta_eff - k_a / fam.n_settings * etas[0]))
        return worst < CLOSED_FORM_TOL, {"targets": len(targets), "max_deviation": worst}

    return _timed("randomized_scheme_dilution", run)


def toy_chemistry_spec(n_fermionic: int, seed: int) -> HamiltonianSpec:
    """Random chemistry-structured Hamiltonian on n_fermionic modes."""
    rng = np.random.default_rng(seed)
    d = 2 * n_fermionic
    odds = range(1, d + 1, 2)
    evens = range(2, d + 1, 2)
    terms = {}
    for o in odds:
        for e in evens:
            terms[index_set((o, e))] = float(rng.normal())
    for oo in itertools.combinations(odds, 2):
        for ee in itertools.combinations(evens, 2):
            terms[index_set(oo + ee)] = float(rng.normal())
    return HamiltonianSpec(n=ModeCount(n_fermionic), terms=terms, constant=float(rng.normal()))


def enumerate_estimator_moments(
    h: HamiltonianSpec,
    family: SettingFamily,
    cache: VisibilityCache,
    table: CoefficientTable,
    psi_physical: np.ndarray,
) -> Tuple[float, float]:
    """Exact (mean, variance) of the K-round single-shot estimator by enumeration.

    Enumerates every monomial draw X and every pair outcome with its Born
    probability; feasible up to 4 grid qubits.
    """
    nq = family.n_modes // 2
    if nq > dense.ENUMERATION_CAP:
        raise ValueError(f"estimator enumeration capped at {dense.ENUMERATION_CAP} grid qubits")
    n_grid = ModeCount(nq)
    aux_qubits = nq - family.n_physical // 2
    vac = np.zeros(2**aux_qubits, dtype=complex)
    vac[0] = 1.0
    psi_grid = np.kron(psi_physical / np.linalg.norm(psi_physical), vac)
    terms = h.nonzero_terms()
    d = family.n_modes
    mean_total = h.constant
    var_total = 0.0
    for setting in family.settings:
        r = setting.round_index
        u_dag = dense.flo_unitary(n_grid, setting.composed.entries).conj().T
        members = []
        for a in terms:
            key = (r, a)
            if key not in cache.eta:
                continue
            members.append(
                (
                    set(a),
                    h.terms[a] * table.get(r, a) / cache.eta[key],
                    1.0 if cache.nu[key] >= 0 else -1.0,
                    [(m + 1) // 2 for m in cache.target_pairs[key][0::2]],
                )
            )
        e1 = e2 = 0.0
        for x_bits in range(2**d):
            x = tuple(i for i in range(1, d + 1) if (x_bits >> (i - 1)) & 1)
            v = u_dag @ dense.conjugate_statevector(psi_grid, x, n_grid)
            p_z = np.abs(v) ** 2
            for z in range(2**nq):
                if p_z[z] < 1e-300:
                    continue
                q = dense.q_of_basis_state(z, nq)
                val = 0.0
                for aset, weight, sign, b_qubits in members:
                    e = sign if len(aset & set(x)) % 2 == 0 else -sign
                    for m in b_qubits:
                        e *= q[m - 1]
                    val += weight * e
                pr = float(p_z[z]) / 2**d
                e1 += pr * val
                e2 += pr * val * val
        mean_total += e1
        var_total += e2 - e1 * e1
    return mean_total, var_total


def check_variance_formula(seed: int = 19) -> CheckResult:
    """Analytic variance equals enumerated estimator variance on a toy spec."""

    def run():
        h = toy_chemistry_spec(3, seed)
        fam = build_physical_scheme(6)
        cache = VisibilityCache.build(fam, h.nonzero_terms())
        table = uniform_coefficients(h, fam, cache)
        rng = np.random.default_rng(seed + 1)
        psi = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        psi /= np.linalg.norm(psi)
        oracle = StatevectorExpectationOracle(psi, 6, fam.n_modes)
        analytic = analytic_variance(h, fam, cache, table, oracle)
        mean, variance = enumerate_estimator_moments(h, fam, cache, table, psi)
        truth = h.constant + sum(h.terms[a] * oracle(a) for a in h.nonzero_terms())
        dev_mean = abs(mean - truth)
        dev_var = abs(variance - analytic)
        return dev_var < VARIANCE_TOL and dev_mean < VARIANCE_TOL, {
            "analytic_variance": analytic,
            "enumerated_variance": variance,
            "mean_deviation": dev_mean,
            "variance_deviation": dev_var,
            "tolerance": VARIANCE_TOL,
        }

    return _timed("variance_formula_enumerated", run)


def check_sample_complexity() -> CheckResult:
    def run():
        value = sample_complexity(1.0, 0.1, 0.01, 1)
        return value == 1060, {"value": value, "expected": 1060}

    return _timed("sample_complexity_closed_form", run)


def check_mc_unbiasedness(shots: int = 30000, seed: int = 2024) -> CheckResult:
    """Shared-shot pair estimation on a random Gaussian state, all within 5 sigma."""

    def run():
        from .gaussian import expectation, random_gaussian_state
        from .sampling import estimate_monomials

        rng = np.random.default_rng(seed)
        state = random_gaussian_state(ModeCount(6), rng)
        family = build_pair_scheme(12)
        targets = [index_set(p) for p in itertools.combinations(range(1, 13), 2)]
        res = estimate_monomials(state, family, targets, shots, np.random.default_rng(seed + 1))
        worst = max(
            abs(est - expectation(state, a)) / se
            for a, est, se in zip(res.targets, res.estimates, res.std_errors)
        )
        return worst < 5.0, {"targets": len(targets), "shots": shots, "worst_z": worst}

    return _timed("monte_carlo_unbiasedness", run)


def check_mc_variance(shots: int = 40000, seed: int = 11) -> CheckResult:
    """Empirical estimator variance vs the closed form on a vendored molecule."""

    def run():
        from .hamio import load_vendored
        from .sampling import estimate_hamiltonian

        h = load_vendored("h2_sto3g").spec
        _, psi = dense.ground_state(h)
        family = build_physical_scheme(h.n.n_majorana)
        cache = VisibilityCache.build(family, h.nonzero_terms())
        table = uniform_coefficients(h, family, cache)
        oracle = StatevectorExpectationOracle(psi, h.n.n_majorana, family.n_modes)
        analytic = analytic_variance(h, family, cache, table, oracle)
        mc = estimate_hamiltonian(psi, family, h, cache, table, shots, np.random.default_rng(seed))
        z = abs(mc.variance - analytic) / mc.variance_std_error
        return z < 3.0, {
            "analytic_variance": analytic,
            "empirical_variance": mc.variance,
            "sigma": z,
            "shots": shots,
        }

    return _timed("monte_carlo_variance", run)


def check_optimization_dominance(random_specs: int = 5) -> CheckResult:
    """Optimized coefficients never beat uniform the wrong way (slack 1e-9)."""

    def run():
        from .estimation import optimize_coefficients
        from .hamio import load_vendored

        worst_slack = -float("inf")
        worst_residual = 0.0
        cases = []
        specs = [("h2_sto3g", -1, load_vendored("h2_sto3g").spec)]
        for k in range(random_specs):
            specs.append((f"random{k}", k, toy_chemistry_spec(2, seed=500 + k)))
        for name, k, h in specs:
            family = build_physical_scheme(h.n.n_majorana)
            cache = VisibilityCache.build(family, h.nonzero_terms())
            if k >= 0:
                rng = np.random.default_rng(600 + k)
                psi = rng.standard_normal(2**h.n.n_fermionic) + 1j * rng.standard_normal(
                    2**h.n.n_fermionic
                )
                psi /= np.linalg.norm(psi)
            else:
                _, psi = dense.ground_state(h)
            oracle = StatevectorExpectationOracle(psi, h.n.n_majorana, family.n_modes)
            var_u = analytic_variance(h, family, cache, uniform_coefficients(h, family, cache), oracle)
            table = optimize_coefficients(h, family, cache, oracle)
            var_o = analytic_variance(h, family, cache, table, oracle)
            worst_slack = max(worst_slack, var_o - var_u)
            for a in h.nonzero_terms():
                total = sum(table.get(r, a) for r in range(1, family.n_settings + 1))
                worst_residual = max(worst_residual, abs(total - 1.0))
            cases.append(name)
        ok = worst_slack <= 1e-9 and worst_residual < 1e-10
        return ok, {
            "cases": cases,
            "max_slack": worst_slack,
            "max_constraint_residual": worst_residual,
        }

    return _timed("optimization_dominance", run)


def check_benchmark_variance() -> CheckResult:
    """Uniform/optimized variance of H2 (8 qubits) with 3x3 almost-Hadamard blocks."""

    def run():
        from .estimation import optimize_coefficients
        from .hamio import load_vendored

        h = load_vendored("h2_631g").spec
        _, psi = dense.ground_state(h)
        family = build_physical_scheme(h.n.n_majorana, block_family="aij")
        cache = VisibilityCache.build(family, h.nonzero_terms())
        oracle = StatevectorExpectationOracle(psi, h.n.n_majorana, family.n_modes)
        var_u = analytic_variance(h, family, cache, uniform_coefficients(h, family, cache), oracle)
        var_o = analytic_variance(
            h, family, cache, optimize_coefficients(h, family, cache, oracle), oracle
        )
        ok = abs(var_u - 63.3) <= 0.15 * 63.3 and abs(var_o - 49.5) <= 0.15 * 49.5
        return ok, {
            "uniform_variance": var_u,
            "uniform_target": 63.3,
            "optimized_variance": var_o,
            "optimized_target": 49.5,
            "tolerance": "15%",
        }

    return _timed("benchmark_variance_targets", run)


def check_determinism(seed: int = 123) -> CheckResult:
    """Identical seeds produce byte-identical result documents."""

    def run():
        import json

        from .hamio import load_vendored
        from .sampling import estimate_hamiltonian

        h = load_vendored("h2_sto3g").spec
        _, psi = dense.ground_state(h)
        family = build_physical_scheme(h.n.n_majorana)
        cache = VisibilityCache.build(family, h.nonzero_terms())
        table = uniform_coefficients(h, family, cache)
        docs = [
            json.dumps(
                estimate_hamiltonian(
                    psi, family, h, cache, table, 2000, np.random.default_rng(seed)
                ).as_dict(),
                sort_keys=True,
            )
            for _ in range(2)
        ]
        return docs[0] == docs[1], {"bytes": len(docs[0])}

    return _timed("deterministic_reports", run)


ALL_CHECKS: Tuple[Tuple[str, Callable[[], CheckResult]], ...] = (
    ("outcome-dist", check_outcome_distribution),
    ("pair-coverage", check_pair_coverage),
    ("quad-coverage", check_quadruple_coverage),
    ("physical-coverage", check_physical_coverage),
    ("sign-pinning", check_sign_pinning),
    ("dilution", check_randomized_dilution),
    ("variance-formula", check_variance_formula),
    ("sample-complexity", check_sample_complexity),
    ("mc-unbiasedness", check_mc_unbiasedness),
    ("mc-variance", check_mc_variance),
    ("dominance", check_optimization_dominance),
    ("benchmark-variance", check_benchmark_variance),
    ("determinism", check_determinism),
)


def run_all(names: Optional[List[str]] = None) -> List[CheckResult]:
    selected = ALL_CHECKS if not names else tuple(
        (key, fn) for key, fn in ALL_CHECKS if key in set(names)
    )
    if names and len(selected) != len(set(names)):
        known = [key for key, _ in ALL_CHECKS]
        raise ValueError(f"unknown check name; known checks: {known}")
    return [fn() for _, fn in selected]
