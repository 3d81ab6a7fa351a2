import itertools

import numpy as np
import pytest

from jointmeas import dense
from jointmeas.estimation import (
    StatevectorExpectationOracle,
    VisibilityCache,
    uniform_coefficients,
)
from jointmeas.gaussian import expectation, random_gaussian_state
from jointmeas.majorana import ModeCount, index_set
from jointmeas.sampling import (
    _gamma_action_masks,
    estimate_hamiltonian,
    estimate_monomials,
    run_experiment,
)
from jointmeas.schemes import (
    build_pair_scheme,
    build_physical_scheme,
    build_quadruple_scheme_prime,
    build_random_partition_scheme,
)
from jointmeas.verify import toy_chemistry_spec


def test_gamma_action_masks_match_oracle():
    # the batched (flip, phase) masks must reproduce gamma_X on statevectors
    rng = np.random.default_rng(0)
    nq = 3
    n = ModeCount(nq)
    psi = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    x_masks = np.arange(2**6, dtype=np.uint64)
    f_mask, m_mask = _gamma_action_masks(x_masks, nq)
    zidx = np.arange(8, dtype=np.uint64)
    for xm in range(2**6):
        x = tuple(i for i in range(1, 7) if (xm >> (i - 1)) & 1)
        direct = dense.conjugate_statevector(psi, x, n)
        src = zidx ^ f_mask[xm]
        signs = 1.0 - 2.0 * (np.bitwise_count(src & m_mask[xm]) & np.uint64(1)).astype(float)
        batched = signs * psi[src.astype(np.int64)]
        # equality up to one global phase
        overlap = np.vdot(direct, batched)
        assert abs(abs(overlap) - np.linalg.norm(direct) * np.linalg.norm(batched)) < 1e-10
        ratio = batched / direct
        assert np.max(np.abs(ratio - ratio[0])) < 1e-10


def test_monomial_estimates_within_error_bars():
    rng = np.random.default_rng(12)
    state = random_gaussian_state(ModeCount(6), rng)
    fam = build_pair_scheme(12)
    targets = [index_set(p) for p in itertools.combinations(range(1, 13), 2)]
    res = estimate_monomials(state, fam, targets, shots=60000, rng=np.random.default_rng(1))
    for a, est, se in zip(res.targets, res.estimates, res.std_errors):
        assert abs(est - expectation(state, a)) < 5 * se + 1e-12


def test_monomial_estimates_statevector_source():
    # same protocol through the dense statevector path
    rng = np.random.default_rng(13)
    n_f = 2
    psi = rng.standard_normal(2**n_f) + 1j * rng.standard_normal(2**n_f)
    psi /= np.linalg.norm(psi)
    fam = build_pair_scheme(2 * n_f)
    targets = [index_set(p) for p in itertools.combinations(range(1, 2 * n_f + 1), 2)]
    res = estimate_monomials(psi, fam, targets, shots=60000, rng=np.random.default_rng(2))
    n = ModeCount(n_f)
    for a, est, se in zip(res.targets, res.estimates, res.std_errors):
        truth = dense.expectation_statevector(psi, a, n)
        assert abs(est - truth) < 5 * se + 1e-12


def test_fallback_kernel_gives_identical_pipeline_results(monkeypatch):
    # the numpy fallback selected at import must reproduce the compiled
    # kernel's results exactly, not just statistically
    import jointmeas.sampling as sampling
    from jointmeas.kernels import _gauss_py

    state = random_gaussian_state(ModeCount(6), np.random.default_rng(8))
    fam = build_pair_scheme(12)
    targets = [(1, 2), (2, 9), (4, 11)]
    res_compiled = estimate_monomials(state, fam, targets, shots=30000, rng=np.random.default_rng(9))
    monkeypatch.setattr(sampling.kernels, "sample_rotated_shots", _gauss_py.sample_rotated_shots)
    res_fallback = estimate_monomials(state, fam, targets, shots=30000, rng=np.random.default_rng(9))
    assert res_compiled.estimates == res_fallback.estimates


def test_thread_count_does_not_change_results(monkeypatch):
    rng_state = np.random.default_rng(3)
    state = random_gaussian_state(ModeCount(6), rng_state)
    fam = build_pair_scheme(12)
    targets = [(1, 2), (3, 7), (5, 11)]
    monkeypatch.setenv("JM_THREADS", "1")
    res1 = estimate_monomials(state, fam, targets, shots=70000, rng=np.random.default_rng(4))
    monkeypatch.setenv("JM_THREADS", "3")
    res2 = estimate_monomials(state, fam, targets, shots=70000, rng=np.random.default_rng(4))
    assert res1.estimates == res2.estimates


def test_hamiltonian_estimator_unbiased_small():
    h = toy_chemistry_spec(2, seed=31)
    fam = build_physical_scheme(4)
    cache = VisibilityCache.build(fam, h.nonzero_terms())
    table = uniform_coefficients(h, fam, cache)
    rng = np.random.default_rng(32)
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    psi /= np.linalg.norm(psi)
    oracle = StatevectorExpectationOracle(psi, 4, fam.n_modes)
    truth = h.constant + sum(h.terms[a] * oracle(a) for a in h.nonzero_terms())
    res = estimate_hamiltonian(psi, fam, h, cache, table, shots=40000, rng=np.random.default_rng(33))
    assert abs(res.mean - truth) < 5 * res.std_error_of_mean


def test_run_experiment_dispatch():
    h = toy_chemistry_spec(2, seed=41)
    fam = build_physical_scheme(4)
    rng = np.random.default_rng(42)
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    psi /= np.linalg.norm(psi)
    ham_result = run_experiment(psi, fam, h, shots=500, rng=np.random.default_rng(1))
    assert ham_result.shots == 500
    mono_result = run_experiment(psi, fam, [(1, 2)], shots=500, rng=np.random.default_rng(1))
    assert mono_result.shots == 500
    with pytest.raises(ValueError):
        run_experiment(psi, fam, h, shots=0, rng=np.random.default_rng(1))


def test_source_shape_mismatches_rejected():
    fam = build_physical_scheme(6)
    with pytest.raises(ValueError):
        estimate_monomials(
            random_gaussian_state(ModeCount(5), np.random.default_rng(1)),
            fam,
            [(1, 2)],
            shots=10,
            rng=np.random.default_rng(2),
        )
    with pytest.raises(ValueError):
        estimate_monomials(
            np.ones(16, dtype=complex) / 4.0, fam, [(1, 2)], shots=10, rng=np.random.default_rng(2)
        )
    with pytest.raises(TypeError):
        estimate_monomials("not a state", fam, [(1, 2)], shots=10, rng=np.random.default_rng(2))


def test_uncovered_target_rejected():
    fam = build_physical_scheme(6)
    state = random_gaussian_state(ModeCount(3), np.random.default_rng(5))
    with pytest.raises(ValueError):
        estimate_monomials(state, fam, [(1, 3)], shots=10, rng=np.random.default_rng(6))


def test_quadruple_estimates_via_prime_scheme():
    # end-to-end: 7-setting scheme, shared shots, quadruple targets at (7,4)
    rng = np.random.default_rng(55)
    fam = build_quadruple_scheme_prime(28)
    state = random_gaussian_state(ModeCount(14), rng)
    quads = []
    pick = np.random.default_rng(56)
    while len(quads) < 12:
        a = index_set((pick.choice(28, size=4, replace=False) + 1).tolist())
        if a not in quads:
            quads.append(a)
    res = estimate_monomials(state, fam, quads, shots=200000, rng=np.random.default_rng(57))
    for a, est, se in zip(res.targets, res.estimates, res.std_errors):
        assert abs(est - expectation(state, a)) < 5 * se + 1e-12


def test_estimates_via_random_partition_scheme():
    from jointmeas.estimation import VisibilityCache as VC

    rng = np.random.default_rng(60)
    fam = build_random_partition_scheme(20, count=9, seed=4, check_coverage=False)
    state = random_gaussian_state(ModeCount(10), rng)
    # keep only targets the drawn partitions actually cover
    candidates = [index_set(p) for p in itertools.combinations(range(1, 21), 2)][:40]
    cache = VC.build(fam, candidates)
    targets = [a for a in candidates if cache.effective_visibility(a) > 0][:20]
    assert targets
    res = estimate_monomials(state, fam, targets, shots=150000, rng=np.random.default_rng(61), cache=cache)
    for a, est, se in zip(res.targets, res.estimates, res.std_errors):
        assert abs(est - expectation(state, a)) < 5 * se + 1e-12
