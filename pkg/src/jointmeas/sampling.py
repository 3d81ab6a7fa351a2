"""Batched protocol simulation and experiment orchestration.

Round sampling produces, per shot, the drawn monomial mask X and the packed
pair outcomes; post-processing for every requested observable then reads the
same shot (the whole point of the parent measurement).  Gaussian states run
through the covariance kernel; arbitrary statevectors run through a batched
dense path where the joint pair measurement is a computational-basis
measurement.

All randomness flows from the caller's generator in a fixed order, so results
are reproducible bit-for-bit from a single seed.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .dense import FLO_CAP, flo_unitary
from .estimation import (
    CoefficientTable,
    HamiltonianSpec,
    VisibilityCache,
)
from .gaussian import GaussianState, extend_with_vacuum
from .majorana import IndexSet, ModeCount, index_set
from .schemes import MeasurementSetting, SettingFamily

StateLike = Union[GaussianState, np.ndarray]

BLOCK_SHOTS = 1 << 16


def _worker_count() -> int:
    """Parallel workers for shot blocks; JM_THREADS caps it (default 1)."""
    try:
        return max(1, int(os.environ.get("JM_THREADS", "1")))
    except ValueError:
        return 1


def _split_blocks(shots: int, rng: np.random.Generator) -> List[Tuple[int, np.random.Generator]]:
    """Fixed-size blocks with spawned child generators.

    The split depends only on the shot count, so results are bit-identical
    for any worker count.
    """
    n_blocks = (shots + BLOCK_SHOTS - 1) // BLOCK_SHOTS
    children = rng.spawn(n_blocks)
    sizes = [min(BLOCK_SHOTS, shots - i * BLOCK_SHOTS) for i in range(n_blocks)]
    return list(zip(sizes, children))


def _map_blocks(blocks, fn: Callable) -> list:
    workers = _worker_count()
    if workers == 1 or len(blocks) == 1:
        return [fn(size, child) for size, child in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def _term_mask(indices: IndexSet) -> np.uint64:
    m = 0
    for i in indices:
        m |= 1 << (i - 1)
    return np.uint64(m)


def _qubit_mask(b: IndexSet) -> np.uint64:
    m = 0
    for mode in b[0::2]:
        m |= 1 << ((mode + 1) // 2 - 1)
    return np.uint64(m)


def _parity(masks: np.ndarray, against: np.uint64) -> np.ndarray:
    return (np.bitwise_count(masks & against) & np.uint64(1)).astype(np.int64)


def term_outcomes(
    x_masks: np.ndarray, qneg_masks: np.ndarray, a_mask: np.uint64, bq_mask: np.uint64, s_ab: float
) -> np.ndarray:
    """Vectorized step (iv): e = s_AB (-1)^{|A n X|} prod_{i in B'} q_i per shot."""
    par = _parity(x_masks, a_mask) ^ _parity(qneg_masks, bq_mask)
    return s_ab * (1.0 - 2.0 * par)


class _GaussianSource:
    def __init__(self, state: GaussianState, family: SettingFamily):
        if state.n_modes != family.n_physical:
            raise ValueError(
                f"state has {state.n_modes} modes, family expects {family.n_physical} physical modes"
            )
        self.state = extend_with_vacuum(state, (family.n_modes - family.n_physical) // 2)
        self.n_modes = family.n_modes

    def sample_round(
        self, setting: MeasurementSetting, x_masks: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        uniforms = rng.random((x_masks.shape[0], self.n_modes // 2))
        return kernels.sample_rotated_shots(
            self.state.cov, setting.composed.entries, x_masks, uniforms
        )


class _StatevectorSource:
    def __init__(self, psi: np.ndarray, family: SettingFamily):
        n_phys_qubits = family.n_physical // 2
        if psi.shape[0] != 2**n_phys_qubits:
            raise ValueError(
                f"statevector length {psi.shape[0]} does not match {n_phys_qubits} physical qubits"
            )
        self.nq = family.n_modes // 2
        if self.nq > FLO_CAP:
            raise ValueError(f"dense protocol sampling capped at {FLO_CAP} grid qubits, got {self.nq}")
        aux_qubits = self.nq - n_phys_qubits
        vac = np.zeros(2**aux_qubits, dtype=complex)
        vac[0] = 1.0
        psi = np.asarray(psi, dtype=complex)
        self.psi = np.kron(psi / np.linalg.norm(psi), vac)
        self._u_dag: Dict[int, np.ndarray] = {}

    def _u_dagger(self, setting: MeasurementSetting) -> np.ndarray:
        r = setting.round_index
        if r not in self._u_dag:
            u = flo_unitary(ModeCount(self.nq), setting.composed.entries)
            self._u_dag[r] = u.conj().T
        return self._u_dag[r]

    def warm(self, family: SettingFamily) -> None:
        for setting in family.settings:
            self._u_dagger(setting)

    def sample_round(
        self, setting: MeasurementSetting, x_masks: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        uniforms = rng.random(x_masks.shape[0])
        return _sample_statevector_shots(
            self.psi, self._u_dagger(setting), x_masks, uniforms, self.nq
        )


def _gamma_action_masks(x_masks: np.ndarray, nq: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per shot: basis-index flip mask and (-1)-phase mask of the gamma_X action.

    gamma_X maps |z> to phase(z) |z xor F| with phase(z) = (-1)^{popcount(z & M)}
    up to a z-independent factor, where for qubit j: F has the qubit-j bit set
    iff exactly one of modes 2j-1, 2j is in X, and M has it set iff the number
    of X modes on later qubits is odd xor (mode 2j in X).
    """
    f_mask = np.zeros_like(x_masks)
    m_mask = np.zeros_like(x_masks)
    one = np.uint64(1)
    for j in range(1, nq + 1):
        pos = np.uint64(nq - j)
        two_bits = (x_masks >> np.uint64(2 * j - 2)) & np.uint64(3)
        exactly_one = ((two_bits == 1) | (two_bits == 2)).astype(np.uint64)
        f_mask |= exactly_one << pos
        tail_parity = np.bitwise_count(x_masks >> np.uint64(2 * j)) & one
        y_bit = (x_masks >> np.uint64(2 * j - 1)) & one
        m_mask |= ((tail_parity ^ y_bit) & one) << pos
    return f_mask, m_mask


def _sample_statevector_shots(
    psi: np.ndarray,
    u_dag: np.ndarray,
    x_masks: np.ndarray,
    uniforms: np.ndarray,
    nq: int,
    chunk: int = 2048,
) -> np.ndarray:
    dim = psi.shape[0]
    n_shots = x_masks.shape[0]
    f_mask, m_mask = _gamma_action_masks(x_masks, nq)
    zidx = np.arange(dim, dtype=np.uint64)
    out = np.zeros(n_shots, dtype=np.uint64)
    ut = np.ascontiguousarray(u_dag.T)
    for lo in range(0, n_shots, chunk):
        hi = min(lo + chunk, n_shots)
        src = zidx[None, :] ^ f_mask[lo:hi, None]
        signs = 1.0 - 2.0 * (np.bitwise_count(src & m_mask[lo:hi, None]) & np.uint64(1)).astype(float)
        w = signs * psi[src.astype(np.int64)]
        psi2 = w @ ut
        prob = np.abs(psi2) ** 2
        prob /= prob.sum(axis=1, keepdims=True)
        cum = np.cumsum(prob, axis=1)
        z = np.minimum((cum < uniforms[lo:hi, None]).sum(axis=1), dim - 1).astype(np.uint64)
        qneg = np.zeros(hi - lo, dtype=np.uint64)
        for j in range(1, nq + 1):
            bit = (z >> np.uint64(nq - j)) & np.uint64(1)
            qneg |= (bit ^ np.uint64(1)) << np.uint64(j - 1)
        out[lo:hi] = qneg
    return out


def make_source(state: StateLike, family: SettingFamily):
    if isinstance(state, GaussianState):
        return _GaussianSource(state, family)
    if isinstance(state, np.ndarray):
        return _StatevectorSource(state, family)
    raise TypeError(f"unsupported state source {type(state).__name__}")


@dataclass(frozen=True)
class MonomialEstimates:
    """Shared-shot estimates of a target list under the round-randomized scheme."""

    targets: Tuple[IndexSet, ...]
    estimates: Tuple[float, ...]
    std_errors: Tuple[float, ...]
    effective_visibility: Tuple[float, ...]
    shots: int

    def as_dict(self) -> dict:
        return {
            "shots": self.shots,
            "terms": [
                {
                    "indices": list(a),
                    "estimate": est,
                    "std_error": se,
                    "effective_visibility": eta,
                }
                for a, est, se, eta in zip(
                    self.targets, self.estimates, self.std_errors, self.effective_visibility
                )
            ],
        }


def estimate_monomials(
    state: StateLike,
    family: SettingFamily,
    targets: Sequence[IndexSet],
    shots: int,
    rng: np.random.Generator,
    cache: Optional[VisibilityCache] = None,
) -> MonomialEstimates:
    """Round-randomized joint estimation: every shot feeds every target.

    Each shot draws a round uniformly from the family; targets inconsistent
    with the drawn round contribute fair coins (their sum is drawn binomially,
    which is distribution-identical).  Estimates divide by the diluted
    visibility (1/K) sum_r eta^{(r)}.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    targets = tuple(index_set(t) for t in targets)
    if cache is None:
        cache = VisibilityCache.build(family, targets)
    k = family.n_settings
    eta_eff = []
    for a in targets:
        eta = cache.effective_visibility(a)
        if eta <= 0.0:
            raise ValueError(f"target {a} is consistent with no round; cannot estimate")
        eta_eff.append(eta)

    d = family.n_modes
    source = make_source(state, family)
    if isinstance(source, _StatevectorSource):
        source.warm(family)
    term_masks = [_term_mask(a) for a in targets]
    round_info: Dict[Tuple[int, int], Tuple[float, np.uint64]] = {}
    for r in range(1, k + 1):
        for t, a in enumerate(targets):
            key = (r, a)
            if key in cache.eta:
                s_ab = 1.0 if cache.nu[key] >= 0 else -1.0
                round_info[(r, t)] = (s_ab, _qubit_mask(cache.target_pairs[key]))

    def run_block(n_b: int, brng: np.random.Generator) -> np.ndarray:
        rounds = brng.integers(0, k, size=n_b)
        sums = np.zeros(len(targets))
        for r in range(1, k + 1):
            n_r = int(np.sum(rounds == r - 1))
            if n_r == 0:
                continue
            x_masks = brng.integers(0, 2**d, size=n_r, dtype=np.uint64)
            qneg = source.sample_round(family.setting(r), x_masks, brng)
            for t in range(len(targets)):
                info = round_info.get((r, t))
                if info is not None:
                    e = term_outcomes(x_masks, qneg, term_masks[t], info[1], info[0])
                    sums[t] += float(e.sum())
                else:
                    # Coin flips have a binomial sum; sampling it directly is
                    # distribution-identical to per-shot coins.
                    heads = brng.binomial(n_r, 0.5)
                    sums[t] += float(2 * heads - n_r)
        return sums

    e_sums = np.zeros(len(targets))
    for partial in _map_blocks(_split_blocks(shots, rng), run_block):
        e_sums += partial
    mean_e = e_sums / shots
    eta_arr = np.array(eta_eff)
    estimates = mean_e / eta_arr
    variances = np.maximum(1.0 - mean_e**2, 0.0) / eta_arr**2
    std_errors = np.sqrt(variances / shots)
    return MonomialEstimates(
        targets=targets,
        estimates=tuple(float(x) for x in estimates),
        std_errors=tuple(float(x) for x in std_errors),
        effective_visibility=tuple(float(x) for x in eta_arr),
        shots=shots,
    )


@dataclass(frozen=True)
class HamiltonianEstimate:
    """Monte Carlo summary of the K-round single-shot energy estimator."""

    mean: float
    variance: float          # unbiased sample variance of the single-shot estimator
    fourth_central_moment: float
    shots: int               # number of estimator samples (each consumes K rounds)
    rounds_per_shot: int

    @property
    def std_error_of_mean(self) -> float:
        return float(np.sqrt(self.variance / self.shots))

    @property
    def variance_std_error(self) -> float:
        """Standard error of the sample variance, from the fourth moment."""
        n = self.shots
        return float(np.sqrt(max(self.fourth_central_moment - self.variance**2 * (n - 3) / (n - 1), 0.0) / n))

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "fourth_central_moment": self.fourth_central_moment,
            "shots": self.shots,
            "rounds_per_shot": self.rounds_per_shot,
        }


def estimate_hamiltonian(
    state: StateLike,
    family: SettingFamily,
    h: HamiltonianSpec,
    cache: VisibilityCache,
    table: CoefficientTable,
    shots: int,
    rng: np.random.Generator,
) -> HamiltonianEstimate:
    """Sample the single-shot estimator `shots` times with deterministic round cycling."""
    if shots < 1:
        raise ValueError("need at least one shot")
    terms = h.nonzero_terms()
    table.validate(terms, cache)
    d = family.n_modes
    source = make_source(state, family)
    if isinstance(source, _StatevectorSource):
        source.warm(family)
    members: Dict[int, List[Tuple[float, np.uint64, np.uint64, float]]] = {}
    for r in range(1, family.n_settings + 1):
        rows = []
        for a in terms:
            key = (r, a)
            if key not in cache.eta:
                continue
            weight = h.terms[a] * table.get(r, a) / cache.eta[key]
            if weight == 0.0:
                continue
            s_ab = 1.0 if cache.nu[key] >= 0 else -1.0
            rows.append((weight, _term_mask(a), _qubit_mask(cache.target_pairs[key]), s_ab))
        members[r] = rows

    def run_block(n_b: int, brng: np.random.Generator) -> np.ndarray:
        vals = np.full(n_b, h.constant)
        for r in range(1, family.n_settings + 1):
            x_masks = brng.integers(0, 2**d, size=n_b, dtype=np.uint64)
            qneg = source.sample_round(family.setting(r), x_masks, brng)
            for weight, a_mask, bq_mask, s_ab in members[r]:
                vals += weight * term_outcomes(x_masks, qneg, a_mask, bq_mask, s_ab)
        return vals

    values = np.concatenate(_map_blocks(_split_blocks(shots, rng), run_block))
    mean = float(values.mean())
    centered = values - mean
    variance = float(centered @ centered / (shots - 1)) if shots > 1 else 0.0
    m4 = float(np.mean(centered**4))
    return HamiltonianEstimate(
        mean=mean,
        variance=variance,
        fourth_central_moment=m4,
        shots=shots,
        rounds_per_shot=family.n_settings,
    )


def run_experiment(
    state: StateLike,
    family: SettingFamily,
    target: Union[HamiltonianSpec, Sequence[IndexSet]],
    shots: int,
    rng: np.random.Generator,
    cache: Optional[VisibilityCache] = None,
    table: Optional[CoefficientTable] = None,
):
    """Dispatch: Hamiltonian targets cycle rounds deterministically, monomial
    target lists use the round-randomized parent."""
    if shots < 1:
        raise ValueError("need at least one shot")
    if isinstance(target, HamiltonianSpec):
        if cache is None:
            cache = VisibilityCache.build(family, target.nonzero_terms())
        if table is None:
            from .estimation import uniform_coefficients

            table = uniform_coefficients(target, family, cache)
        return estimate_hamiltonian(state, family, target, cache, table, shots, rng)
    return estimate_monomials(state, family, target, shots, rng, cache=cache)
