"""Outcome post-processing, estimators, analytic variance, coefficient choice.

The single-shot Hamiltonian estimator over K rounds is

    H_hat = constant + sum_r sum_A h_A alpha_A^{(r)} gamma_hat_A^{(r)},

with gamma_hat_A^{(r)} = e_A^{(r)} / eta_A^{(r)} when A is consistent with
round r and 0 otherwise, and round coefficients summing to one over the
rounds that contain A.  Rounds draw independent randomness, so the estimator
variance is the sum of per-round quadratic forms alpha^T C alpha whose
covariance entries close over the signed visibilities nu and the state
expectations of symmetric differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dense import expectation_statevector
from .gaussian import GaussianState, expectation as gaussian_expectation
from .majorana import IndexSet, ModeCount, index_set, symmetric_difference
from .schemes import MeasurementSetting, SettingFamily

ALPHA_CONSTRAINT_TOL = 1e-10
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ShotRecord:
    """One protocol run: the round, the sampled monomial X, the pair outcomes q."""

    round_index: int
    x: IndexSet
    q: Tuple[int, ...]


@dataclass(frozen=True)
class HamiltonianSpec:
    """A linear combination of even Majorana monomials plus a constant offset."""

    n: ModeCount
    terms: Mapping[IndexSet, float]
    constant: float = 0.0

    def __post_init__(self):
        canon: Dict[IndexSet, float] = {}
        for a, coeff in dict(self.terms).items():
            a = index_set(a)
            if len(a) % 2:
                raise ValueError(f"odd-sized term {a}")
            if a and a[-1] > self.n.n_majorana:
                raise ValueError(f"term {a} out of range for 2N={self.n.n_majorana}")
            if a in canon:
                raise ValueError(f"duplicate term {a}")
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient for term {a}")
            canon[a] = float(coeff)
        if not math.isfinite(self.constant):
            raise ValueError("non-finite constant offset")
        object.__setattr__(self, "terms", canon)

    @property
    def is_chemistry(self) -> bool:
        """True iff every term is a one-odd-one-even pair or a two-odd-two-even quadruple."""
        for a in self.terms:
            odd = sum(1 for i in a if i % 2)
            if len(a) == 2 and odd != 1:
                return False
            if len(a) == 4 and odd != 2:
                return False
            if len(a) not in (2, 4):
                return False
        return True

    def nonzero_terms(self) -> Tuple[IndexSet, ...]:
        return tuple(sorted((a for a, c in self.terms.items() if c != 0.0), key=lambda t: (len(t), t)))


class GaussianExpectationOracle:
    """tr(rho gamma_A) on a Gaussian state via Pfaffians, memoized."""

    def __init__(self, state: GaussianState):
        self.state = state
        self._cache: Dict[IndexSet, float] = {}

    def __call__(self, a: IndexSet) -> float:
        a = index_set(a)
        if a not in self._cache:
            self._cache[a] = gaussian_expectation(self.state, a)
        return self._cache[a]


class StatevectorExpectationOracle:
    """tr(rho gamma_A) on (physical statevector) x (vacuum auxiliaries), memoized.

    The auxiliary block factors out exactly: a term's auxiliary part must be a
    union of standard pairs (each contributing -1 in the vacuum), anything
    else has zero expectation.
    """

    def __init__(self, psi: np.ndarray, n_physical_modes: int, n_total_modes: int):
        if n_physical_modes % 2 or n_total_modes % 2 or n_total_modes < n_physical_modes:
            raise ValueError("mode counts must be even with total >= physical")
        if psi.shape[0] != 2 ** (n_physical_modes // 2):
            raise ValueError("statevector length does not match the physical mode count")
        self.psi = psi
        self.n_physical = n_physical_modes
        self.n_total = n_total_modes
        self._n = ModeCount(n_physical_modes // 2)
        self._cache: Dict[IndexSet, float] = {}

    def __call__(self, a: IndexSet) -> float:
        a = index_set(a)
        if a in self._cache:
            return self._cache[a]
        if a and a[-1] > self.n_total:
            raise ValueError(f"term {a} out of range for 2N={self.n_total}")
        phys = tuple(i for i in a if i <= self.n_physical)
        aux = tuple(i for i in a if i > self.n_physical)
        val = 0.0
        if len(phys) % 2 == 0:
            factor = 1.0
            for lo, hi in zip(aux[0::2], aux[1::2]):
                if hi != lo + 1 or lo % 2 == 0:
                    factor = 0.0
                    break
                factor *= -1.0
            if len(aux) % 2:
                factor = 0.0
            if factor != 0.0:
                val = factor * expectation_statevector(self.psi, phys, self._n)
        self._cache[a] = val
        return val


ExpectationOracle = Callable[[IndexSet], float]


@dataclass
class VisibilityCache:
    """Signed visibilities nu, magnitudes eta, and target pairs f(A) per (round, term)."""

    family: SettingFamily
    terms: Tuple[IndexSet, ...]
    eta: Dict[Tuple[int, IndexSet], float]
    nu: Dict[Tuple[int, IndexSet], float]
    target_pairs: Dict[Tuple[int, IndexSet], IndexSet]

    @classmethod
    def build(cls, family: SettingFamily, terms: Iterable[IndexSet]) -> "VisibilityCache":
        terms = tuple(index_set(t) for t in terms)
        eta: Dict[Tuple[int, IndexSet], float] = {}
        nu: Dict[Tuple[int, IndexSet], float] = {}
        fmap: Dict[Tuple[int, IndexSet], IndexSet] = {}
        for setting in family.settings:
            r = setting.round_index
            for a in terms:
                if not setting.consistent(a):
                    continue
                b = setting.select_target_pairs(a)
                val = setting.signed_visibility(a, b)
                if val == 0.0:
                    continue
                eta[(r, a)] = abs(val)
                nu[(r, a)] = val
                fmap[(r, a)] = b
        return cls(family=family, terms=terms, eta=eta, nu=nu, target_pairs=fmap)

    def in_round(self, r: int, a: IndexSet) -> bool:
        return (r, a) in self.eta

    def rounds_of(self, a: IndexSet) -> Tuple[int, ...]:
        return tuple(s.round_index for s in self.family.settings if (s.round_index, a) in self.eta)

    def effective_visibility(self, a: IndexSet) -> float:
        """Visibility of the round-randomized parent: (1/K) sum_r eta_A^{(r)}."""
        k = self.family.n_settings
        return sum(self.eta.get((r, a), 0.0) for r in range(1, k + 1)) / k


@dataclass(frozen=True)
class CoefficientTable:
    """Round coefficients alpha_A^{(r)}; absent entries are zero."""

    alpha: Mapping[Tuple[int, IndexSet], float]
    notes: Tuple[str, ...] = ()

    def get(self, r: int, a: IndexSet) -> float:
        return self.alpha.get((r, a), 0.0)

    def validate(self, terms: Iterable[IndexSet], cache: VisibilityCache) -> None:
        for a in terms:
            rounds = cache.rounds_of(a)
            total = sum(self.get(r, a) for r in rounds)
            if abs(total - 1.0) > ALPHA_CONSTRAINT_TOL:
                raise ValueError(f"coefficients for {a} sum to {total}, not 1")
            for r in range(1, cache.family.n_settings + 1):
                if r not in rounds and self.get(r, a) != 0.0:
                    raise ValueError(f"nonzero coefficient for {a} outside its rounds")


def postprocess(
    shot: ShotRecord,
    setting: MeasurementSetting,
    a: IndexSet,
    cache: VisibilityCache,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """e_A for one shot: s_AB (-1)^{|A geq X|} prod_{i in B'} q_i, or a fair coin."""
    a = index_set(a)
    key = (shot.round_index, a)
    if key not in cache.eta:
        if setting.consistent(a):
            raise KeyError(f"visibility cache is missing consistent term {a} in round {shot.round_index}")
        if rng is None:
            raise ValueError("rng is required for the coin-flip branch of inconsistent terms")
        return int(2 * rng.integers(0, 2) - 1)
    b = cache.target_pairs[key]
    sign = 1 if cache.nu[key] >= 0 else -1
    if len(set(a) & set(shot.x)) % 2:
        sign = -sign
    for m in b[0::2]:
        qubit = (m + 1) // 2
        sign *= shot.q[qubit - 1]
    return int(sign)


def gamma_estimate(e_a: float, eta: float) -> float:
    """Unbiased single-shot estimate e_A / eta_A."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"visibility must be in (0, 1], got {eta}")
    return e_a / eta


def hamiltonian_single_shot(
    shots: Sequence[ShotRecord],
    h: HamiltonianSpec,
    family: SettingFamily,
    cache: VisibilityCache,
    table: CoefficientTable,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """The K-round single-shot energy estimate from one ShotRecord per round."""
    terms = h.nonzero_terms()
    table.validate(terms, cache)
    by_round = {s.round_index: s for s in shots}
    if sorted(by_round) != list(range(1, family.n_settings + 1)):
        raise ValueError("need exactly one shot per round")
    total = h.constant
    for r in range(1, family.n_settings + 1):
        shot = by_round[r]
        setting = family.setting(r)
        for a in terms:
            key = (r, a)
            if key not in cache.eta:
                continue
            e = postprocess(shot, setting, a, cache, rng)
            total += h.terms[a] * table.get(r, a) * e / cache.eta[key]
    return float(total)


def covariance_entry(
    r: int,
    a: IndexSet,
    a2: IndexSet,
    cache: VisibilityCache,
    oracle: ExpectationOracle,
) -> float:
    """Cov(gamma_hat_A, gamma_hat_A') within round r.

    Uses the closed form: the second moment is (1/nu_A)^2 on the diagonal and
    delta_{|A xor A'|, |f(A) xor f(A')|} nu_{A xor A'} / (nu_A nu_A') times the
    state expectation of gamma_{A xor A'} off the diagonal.
    """
    a, a2 = index_set(a), index_set(a2)
    key, key2 = (r, a), (r, a2)
    if key not in cache.nu or key2 not in cache.nu:
        raise KeyError(f"terms must both be consistent with round {r}")
    mean_product = oracle(a) * oracle(a2)
    if a == a2:
        return (1.0 / cache.nu[key]) ** 2 - mean_product
    sym = symmetric_difference(a, a2)
    fsym = symmetric_difference(cache.target_pairs[key], cache.target_pairs[key2])
    if len(sym) != len(fsym) or not fsym:
        return -mean_product
    from .flo import submatrix_det

    nu_sym = submatrix_det(cache.family.setting(r).composed, sym, fsym)
    return nu_sym / (cache.nu[key] * cache.nu[key2]) * oracle(sym) - mean_product


def _mask(indices: IndexSet) -> int:
    m = 0
    for i in indices:
        m |= 1 << (i - 1)
    return m


def _mask_to_indices(mask: int) -> IndexSet:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def round_covariance_block(
    r: int,
    terms: Sequence[IndexSet],
    cache: VisibilityCache,
    oracle: ExpectationOracle,
) -> Tuple[List[int], np.ndarray]:
    """Vectorized Cov(gamma_hat, gamma_hat) block over the round's member terms.

    Returns the indices (into ``terms``) of the members of round r and their
    covariance matrix; agrees entrywise with :func:`covariance_entry`.
    """
    members = [i for i, a in enumerate(terms) if (r, a) in cache.eta]
    m = len(members)
    if m == 0:
        return members, np.zeros((0, 0))
    composed = cache.family.setting(r).composed
    a_masks = np.array([_mask(terms[i]) for i in members], dtype=np.uint64)
    f_masks = np.array([_mask(cache.target_pairs[(r, terms[i])]) for i in members], dtype=np.uint64)
    nu = np.array([cache.nu[(r, terms[i])] for i in members])
    g = np.array([oracle(terms[i]) for i in members])

    d_a = np.bitwise_count(a_masks[:, None] ^ a_masks[None, :])
    d_f = np.bitwise_count(f_masks[:, None] ^ f_masks[None, :])
    cov = np.zeros((m, m))

    ii, jj = np.nonzero(np.triu(d_a == d_f, k=1))
    by_size: Dict[int, List[Tuple[int, int, IndexSet, IndexSet]]] = {}
    for i, j in zip(ii.tolist(), jj.tolist()):
        sym = _mask_to_indices(int(a_masks[i] ^ a_masks[j]))
        fsym = _mask_to_indices(int(f_masks[i] ^ f_masks[j]))
        by_size.setdefault(len(sym), []).append((i, j, sym, fsym))
    entries = composed.entries
    expect_cache: Dict[int, float] = {}
    for size, items in by_size.items():
        subs = np.empty((len(items), size, size))
        for t, (_, _, sym, fsym) in enumerate(items):
            subs[t] = entries[np.ix_([x - 1 for x in sym], [x - 1 for x in fsym])]
        dets = np.linalg.det(subs)
        for t, (i, j, sym, _) in enumerate(items):
            mask = int(a_masks[i] ^ a_masks[j])
            if mask not in expect_cache:
                expect_cache[mask] = oracle(sym)
            val = dets[t] / (nu[i] * nu[j]) * expect_cache[mask]
            cov[i, j] = val
            cov[j, i] = val
    cov -= np.outer(g, g)
    np.fill_diagonal(cov, 1.0 / nu**2 - g**2)
    return members, cov


def analytic_variance(
    h: HamiltonianSpec,
    family: SettingFamily,
    cache: VisibilityCache,
    table: CoefficientTable,
    oracle: ExpectationOracle,
) -> float:
    """Var[H_hat] = sum_r alpha^T (h h^T . Cov^{(r)}) alpha over the member terms."""
    terms = h.nonzero_terms()
    table.validate(terms, cache)
    total = 0.0
    for setting in family.settings:
        r = setting.round_index
        members, cov = round_covariance_block(r, terms, cache, oracle)
        if not members:
            continue
        hvec = np.array([h.terms[terms[i]] for i in members])
        avec = np.array([table.get(r, terms[i]) for i in members])
        w = hvec * avec
        total += float(w @ cov @ w)
    return total


def uniform_coefficients(
    h: HamiltonianSpec, family: SettingFamily, cache: Optional[VisibilityCache] = None
) -> CoefficientTable:
    """alpha_A^{(r)} = 1/f_A over the f_A rounds containing A, zero elsewhere."""
    terms = h.nonzero_terms()
    if cache is None:
        cache = VisibilityCache.build(family, terms)
    alpha: Dict[Tuple[int, IndexSet], float] = {}
    for a in terms:
        rounds = cache.rounds_of(a)
        if not rounds:
            raise ValueError(
                f"term {a} is consistent with no round; run coverage_check on the family"
            )
        for r in rounds:
            alpha[(r, a)] = 1.0 / len(rounds)
    return CoefficientTable(alpha)


def optimize_coefficients(
    h: HamiltonianSpec,
    family: SettingFamily,
    cache: VisibilityCache,
    oracle: ExpectationOracle,
) -> CoefficientTable:
    """Variance-minimizing coefficients alpha^{(r)} = D^{(r)} (sum_r D^{(r)})^{-1} 1.

    D^{(r)} is half the inverse of the h-weighted covariance block, taken on
    the round's member terms and zero elsewhere.  Ill-conditioned blocks fall
    back to pseudo-inverses; a singular sum falls back to uniform
    coefficients.  Both fallbacks are recorded in the table notes.
    """
    terms = h.nonzero_terms()
    n = len(terms)
    notes: List[str] = []
    d_sum = np.zeros((n, n))
    d_blocks: List[Tuple[List[int], np.ndarray]] = []
    for setting in family.settings:
        r = setting.round_index
        members, cov = round_covariance_block(r, terms, cache, oracle)
        if not members:
            d_blocks.append((members, np.zeros((0, 0))))
            continue
        hvec = np.array([h.terms[terms[i]] for i in members])
        c_block = np.outer(hvec, hvec) * cov
        if np.linalg.cond(c_block) > CONDITION_LIMIT:
            notes.append(f"round {r}: ill-conditioned covariance block, used pseudo-inverse")
            d_block = 0.5 * np.linalg.pinv(c_block, hermitian=True)
        else:
            d_block = 0.5 * np.linalg.inv(c_block)
        d_block = 0.5 * (d_block + d_block.T)
        d_blocks.append((members, d_block))
        idx = np.array(members)
        d_sum[np.ix_(idx, idx)] += d_block
    uncovered = [terms[i] for i in range(n) if not cache.rounds_of(terms[i])]
    if uncovered:
        raise ValueError(f"terms consistent with no round: {uncovered[:3]}...")
    try:
        if np.linalg.cond(d_sum) > CONDITION_LIMIT:
            raise np.linalg.LinAlgError("singular coefficient system")
        mu = np.linalg.solve(d_sum, np.ones(n))
    except np.linalg.LinAlgError:
        fallback = uniform_coefficients(h, family, cache)
        return CoefficientTable(
            dict(fallback.alpha), notes=tuple(notes) + ("singular system: uniform fallback",)
        )
    alpha: Dict[Tuple[int, IndexSet], float] = {}
    totals = np.zeros(n)
    for setting, (members, d_block) in zip(family.settings, d_blocks):
        if not members:
            continue
        idx = np.array(members)
        avec = d_block @ mu[idx]
        totals[idx] += avec
        for pos, i in enumerate(members):
            alpha[(setting.round_index, terms[i])] = float(avec[pos])
    # Absorb the last floating-point dust so the table invariant holds exactly.
    err = np.max(np.abs(totals - 1.0)) if n else 0.0
    if err > ALPHA_CONSTRAINT_TOL:
        for i, a in enumerate(terms):
            rounds = cache.rounds_of(a)
            scale = totals[i]
            if abs(scale) < 1e-6:
                fallback = uniform_coefficients(h, family, cache)
                return CoefficientTable(
                    dict(fallback.alpha),
                    notes=tuple(notes) + ("degenerate constraint row: uniform fallback",),
                )
            for r in rounds:
                alpha[(r, a)] = alpha[(r, a)] / scale
        notes.append(f"renormalized coefficient sums (max residual {err:.2e})")
    return CoefficientTable(alpha, notes=tuple(notes))


def sample_complexity(eta: float, epsilon: float, delta: float, set_size: int) -> int:
    """Shots guaranteeing all |set_size| estimates within epsilon at confidence 1-delta."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"visibility must be in (0, 1], got {eta}")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if set_size < 1:
        raise ValueError("set size must be at least 1")
    return math.ceil(2.0 / (eta**2 * epsilon**2) * math.log(2.0 * set_size / delta))


def median_of_means(samples: Sequence[float], groups: int) -> float:
    """Median of the means of `groups` contiguous equal-size chunks.

    The remainder after equal division is discarded.
    """
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    if groups < 1:
        raise ValueError("need at least one group")
    size = len(samples) // groups
    if size == 0:
        raise ValueError(f"cannot split {len(samples)} samples into {groups} groups")
    arr = np.asarray(samples, dtype=float)[: size * groups].reshape(groups, size)
    return float(np.median(arr.mean(axis=1)))
