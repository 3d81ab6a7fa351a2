"""Construction of the measurement-setting families.

Four families are built here:

* ``pairs2``: two settings on an (L+1) x L grid (L even) covering all mode
  pairs.  Clusters are grid rows; the pairing shifts the 2c-th column down by
  c, connecting every pair of rows exactly once; the second setting reshuffles
  column c down by c-1, which splits every co-row pair.
* ``quad7``: seven settings on an l x k grid (l >= 7 prime, k >= 4 even).
  Setting a reshuffles by the a-th iterate of the column-shift permutation
  with pairwise-distinct shift distances (0, 1, ..., k-1); every quadruple of
  modes lands in four distinct rows in at least one setting.
* ``rand9``: seeded uniformly random equal-size partitions with fresh
  pairings; coverage is checked, never assumed.
* ``physical4``: four settings on an L x 2L grid whose columns alternate odd
  and even mode indices.  Clusters are the odd/even halves of each row; the
  pairing shifts the l-th even column down by l-1, coupling every even
  cluster to every odd cluster exactly once.  Round 2 additionally shifts the
  l-th odd column down by l-1, round 3 the l-th even column down by l-1, and
  round 4 applies both.

Mode indices are laid out row-major (top-left origin), so column parity
matches mode-index parity on the physical grid.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .flo import (
    FlatBlock,
    ModePermutation,
    OrthogonalMatrix,
    block_diagonal,
    build_flat_block,
    compose_setting,
    submatrix_det,
)
from .majorana import IndexSet, ModeCount, index_set

SCHEME_KINDS = ("pairs2", "quad7", "rand9", "physical4")
FAMILY_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GridLayout:
    """Row-major rectangular arrangement of the 2N mode indices."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")

    @property
    def n_modes(self) -> int:
        return self.rows * self.cols

    def mode_at(self, row: int, col: int) -> int:
        if not (1 <= row <= self.rows and 1 <= col <= self.cols):
            raise ValueError(f"cell ({row},{col}) outside {self.rows}x{self.cols} grid")
        return (row - 1) * self.cols + col

    def cell_of(self, mode: int) -> Tuple[int, int]:
        if not 1 <= mode <= self.n_modes:
            raise ValueError(f"mode {mode} outside grid")
        return ((mode - 1) // self.cols + 1, (mode - 1) % self.cols + 1)


@dataclass(frozen=True)
class ClusterPartition:
    """Disjoint clusters covering 1..2N, with optional parity labels."""

    clusters: Tuple[IndexSet, ...]
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        seen: set = set()
        for cl in self.clusters:
            if seen & set(cl):
                raise ValueError("clusters overlap")
            seen |= set(cl)
        if seen != set(range(1, len(seen) + 1)):
            raise ValueError("clusters must partition 1..2N")
        if self.labels is not None and len(self.labels) != len(self.clusters):
            raise ValueError("need one label per cluster")
        lookup = {}
        for ci, cl in enumerate(self.clusters):
            for mode in cl:
                lookup[mode] = ci
        object.__setattr__(self, "_cluster_of", lookup)

    @property
    def n_modes(self) -> int:
        return sum(len(cl) for cl in self.clusters)

    def cluster_of(self, mode: int) -> int:
        return self._cluster_of[mode]


@dataclass(frozen=True)
class CouplingEdge:
    """One standard measured pair and where its endpoints land in the round."""

    qubit: int                 # standard pair index m, measuring gamma_{2m-1,2m}
    modes: Tuple[int, int]     # (sigma(pi(2m-1)), sigma(pi(2m)))


@dataclass(frozen=True)
class MeasurementSetting:
    """One measurement round: layout, effective clusters, permutations, R."""

    round_index: int
    layout: GridLayout
    partition: ClusterPartition
    pairing: ModePermutation
    reshuffle: ModePermutation
    blocks: Tuple[FlatBlock, ...]
    composed: OrthogonalMatrix
    coupling: Dict[FrozenSet[int], CouplingEdge]

    @property
    def n_modes(self) -> int:
        return self.pairing.dim

    def cluster_of(self, mode: int) -> int:
        return self.partition.cluster_of(mode)

    def _cluster_matchings(self, a: IndexSet) -> List[Tuple[FrozenSet[int], ...]]:
        """Perfect matchings of A's clusters realizable with coupling edges."""
        clusters = [self.cluster_of(i) for i in a]
        if len(set(clusters)) != len(clusters):
            return []
        out: List[Tuple[FrozenSet[int], ...]] = []

        def recurse(remaining: Tuple[int, ...], chosen: Tuple[FrozenSet[int], ...]):
            if not remaining:
                out.append(chosen)
                return
            first, rest = remaining[0], remaining[1:]
            for pos, partner in enumerate(rest):
                key = frozenset((first, partner))
                if key in self.coupling:
                    recurse(rest[:pos] + rest[pos + 1 :], chosen + (key,))

        recurse(tuple(clusters), ())
        return out

    def consistent(self, a: IndexSet) -> bool:
        """True iff A's elements sit in distinct clusters that the pairing can couple.

        For every family and target class in this package the coupling
        matching exists whenever the clusters are distinct, but the stronger
        check keeps "consistent implies positive visibility" true uniformly.
        """
        if len(a) % 2:
            raise ValueError("consistency is defined for even-sized sets")
        if len(a) == 0:
            return True
        return bool(self._cluster_matchings(a))

    def select_target_pairs(self, a: IndexSet) -> IndexSet:
        """The measured-pair set B = f(A) maximizing |det R_{A,B}|.

        Ties are broken toward the lexicographically smallest B.
        """
        if len(a) not in (2, 4):
            raise ValueError("target-pair selection is defined for |A| in {2, 4}")
        matchings = self._cluster_matchings(a)
        if not matchings:
            raise ValueError(f"{a} is not consistent with setting {self.round_index}")
        best: Optional[IndexSet] = None
        best_nu = -1.0
        for matching in matchings:
            qubits = sorted(self.coupling[key].qubit for key in matching)
            b = index_set(itertools.chain.from_iterable((2 * m - 1, 2 * m) for m in qubits))
            nu = abs(submatrix_det(self.composed, a, b))
            tol = 1e-12 * max(1.0, best_nu)
            if best is None or nu > best_nu + tol:
                best, best_nu = b, nu
            elif abs(nu - best_nu) <= tol and b < best:
                best = b
        return best

    def signed_visibility(self, a: IndexSet, b: Optional[IndexSet] = None) -> float:
        """nu_A = det(R_{A, f(A)}) with its sign."""
        if b is None:
            b = self.select_target_pairs(a)
        return submatrix_det(self.composed, a, b)


@dataclass(frozen=True)
class SettingFamily:
    """A complete scheme: its settings plus the embedding bookkeeping."""

    kind: str
    settings: Tuple[MeasurementSetting, ...]
    n_modes: int                    # grid modes, auxiliaries included
    n_physical: int                 # requested physical Majorana modes
    aux_modes: IndexSet
    block_family: str
    coverage_notes: Tuple[str, ...] = ()

    @property
    def n_settings(self) -> int:
        return len(self.settings)

    @property
    def mode_count(self) -> ModeCount:
        return ModeCount(self.n_modes // 2)

    def setting(self, round_index: int) -> MeasurementSetting:
        return self.settings[round_index - 1]

    def to_json(self) -> str:
        doc = {
            "schema_version": FAMILY_SCHEMA_VERSION,
            "kind": self.kind,
            "n_modes": self.n_modes,
            "n_physical": self.n_physical,
            "aux_modes": list(self.aux_modes),
            "block_family": self.block_family,
            "settings": [
                {
                    "round_index": s.round_index,
                    "layout": {"rows": s.layout.rows, "cols": s.layout.cols},
                    "clusters": [list(cl) for cl in s.partition.clusters],
                    "labels": list(s.partition.labels) if s.partition.labels else None,
                    "pairing": list(s.pairing.images),
                    "reshuffle": list(s.reshuffle.images),
                    "blocks": [
                        {"size": b.size, "entries": [float(x) for x in b.entries.ravel()]}
                        for b in s.blocks
                    ],
                }
                for s in self.settings
            ],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SettingFamily":
        doc = json.loads(text)
        if doc.get("schema_version") != FAMILY_SCHEMA_VERSION:
            raise ValueError(f"unsupported family schema version {doc.get('schema_version')}")
        settings = []
        for sdoc in doc["settings"]:
            layout = GridLayout(sdoc["layout"]["rows"], sdoc["layout"]["cols"])
            blocks = tuple(
                FlatBlock(b["size"], np.array(b["entries"]).reshape(b["size"], b["size"]))
                for b in sdoc["blocks"]
            )
            # Stored clusters are the effective (reshuffled) ones; rebuild from
            # the base clusters sigma^{-1}(Y) so construction stays one code path.
            sigma = ModePermutation(tuple(sdoc["reshuffle"]))
            inv = sigma.inverse()
            base = tuple(index_set(inv(i) for i in cl) for cl in sdoc["clusters"])
            labels = tuple(sdoc["labels"]) if sdoc["labels"] else None
            settings.append(
                _build_setting(
                    sdoc["round_index"],
                    layout,
                    base,
                    labels,
                    ModePermutation(tuple(sdoc["pairing"])),
                    sigma,
                    blocks,
                )
            )
        return cls(
            kind=doc["kind"],
            settings=tuple(settings),
            n_modes=doc["n_modes"],
            n_physical=doc["n_physical"],
            aux_modes=tuple(doc["aux_modes"]),
            block_family=doc["block_family"],
        )


def _column_shift(layout: GridLayout, shifts: Dict[int, int]) -> ModePermutation:
    """Cyclically shift each listed column downward by its distance."""
    images = list(range(1, layout.n_modes + 1))
    for col, dist in shifts.items():
        for row in range(1, layout.rows + 1):
            new_row = (row - 1 + dist) % layout.rows + 1
            images[layout.mode_at(row, col) - 1] = layout.mode_at(new_row, col)
    return ModePermutation(tuple(images))


def _build_setting(
    round_index: int,
    layout: GridLayout,
    base_clusters: Tuple[IndexSet, ...],
    labels: Optional[Tuple[str, ...]],
    pairing: ModePermutation,
    reshuffle: ModePermutation,
    blocks: Tuple[FlatBlock, ...],
) -> MeasurementSetting:
    d = layout.n_modes
    sup = block_diagonal(blocks, base_clusters, d)
    composed = compose_setting(reshuffle, sup, pairing)
    effective = tuple(index_set(reshuffle(i) for i in cl) for cl in base_clusters)
    partition = ClusterPartition(effective, labels)
    coupling: Dict[FrozenSet[int], CouplingEdge] = {}
    for m in range(1, d // 2 + 1):
        k = reshuffle(pairing(2 * m - 1))
        l = reshuffle(pairing(2 * m))
        ck, cl_ = partition.cluster_of(k), partition.cluster_of(l)
        if ck == cl_:
            raise ValueError(f"pairing endpoint pair ({k},{l}) falls inside one cluster")
        key = frozenset((ck, cl_))
        if key in coupling:
            raise ValueError("two pairings connect the same cluster pair")
        coupling[key] = CouplingEdge(qubit=m, modes=(k, l))
    return MeasurementSetting(
        round_index=round_index,
        layout=layout,
        partition=partition,
        pairing=pairing,
        reshuffle=reshuffle,
        blocks=blocks,
        composed=composed,
        coupling=coupling,
    )


def _as_n_physical(n) -> int:
    if isinstance(n, ModeCount):
        return n.n_majorana
    n = int(n)
    if n < 2 or n % 2:
        raise ValueError(f"need a positive even number of Majorana modes, got {n}")
    return n


def _is_prime(x: int) -> bool:
    if x < 2:
        return False
    return all(x % p for p in range(2, int(x**0.5) + 1))


def embed_modes(n_physical, scheme: str) -> Tuple[ModeCount, IndexSet]:
    """Smallest admissible grid for the scheme, plus the auxiliary mode indices.

    Auxiliary modes are appended after the physical ones, which preserves the
    odd/even interleaving on the physical grid.
    """
    n_phys = _as_n_physical(n_physical)
    if scheme in ("pairs2", "rand9"):
        l = 2
        while l * (l + 1) < n_phys:
            l += 2
        total = l * (l + 1)
    elif scheme == "quad7":
        l, k = _quad_grid(n_phys)
        total = l * k
    elif scheme == "physical4":
        l = 2
        while 2 * l * l < n_phys:
            l += 1
        total = 2 * l * l
    else:
        raise ValueError(f"unknown scheme kind {scheme!r}")
    aux = tuple(range(n_phys + 1, total + 1))
    return ModeCount(total // 2), aux


def _quad_grid(n_phys: int) -> Tuple[int, int]:
    """Smallest l x k grid with l >= 7 prime and k >= 4 even, k <= l - 1."""
    best: Optional[Tuple[int, int]] = None
    l = 7
    while True:
        if _is_prime(l):
            k = max(4, -(-n_phys // l))
            k += k % 2
            if k <= l - 1 and (best is None or l * k < best[0] * best[1]):
                best = (l, k)
            if best is not None and l > best[0] * best[1]:
                break
        l += 1
        if l > 4 * n_phys + 29:
            break
    if best is None:
        raise ValueError(f"no admissible prime grid for 2N={n_phys}")
    return best


def _row_clusters(layout: GridLayout) -> Tuple[IndexSet, ...]:
    return tuple(
        index_set(layout.mode_at(r, c) for c in range(1, layout.cols + 1))
        for r in range(1, layout.rows + 1)
    )


def build_pair_scheme(n, block_family: str = "auto") -> SettingFamily:
    """K=2 settings covering all Majorana pairs on the (L+1) x L grid."""
    n_phys = _as_n_physical(n)
    mode_count, aux = embed_modes(n_phys, "pairs2")
    d = mode_count.n_majorana
    # Solve L from d = L(L+1).
    big_l = int((np.sqrt(4 * d + 1) - 1) / 2 + 0.5)
    assert big_l * (big_l + 1) == d
    layout = GridLayout(rows=big_l + 1, cols=big_l)
    clusters = _row_clusters(layout)
    block = build_flat_block(big_l, block_family)
    blocks = tuple(block for _ in clusters)
    pairing = _column_shift(layout, {2 * c: c for c in range(1, big_l // 2 + 1)})
    settings = (
        _build_setting(1, layout, clusters, None, pairing, ModePermutation.identity(d), blocks),
        _build_setting(
            2,
            layout,
            clusters,
            None,
            pairing,
            _column_shift(layout, {c: c - 1 for c in range(2, big_l + 1)}),
            blocks,
        ),
    )
    return SettingFamily("pairs2", settings, d, n_phys, aux, block_family)


def build_quadruple_scheme_prime(n, block_family: str = "auto") -> SettingFamily:
    """K=7 settings; any quadruple sits in 4 distinct rows of some setting."""
    n_phys = _as_n_physical(n)
    mode_count, aux = embed_modes(n_phys, "quad7")
    d = mode_count.n_majorana
    l, k = _quad_grid(n_phys)
    layout = GridLayout(rows=l, cols=k)
    clusters = _row_clusters(layout)
    block = build_flat_block(k, block_family)
    blocks = tuple(block for _ in clusters)
    pairing = _column_shift(layout, {2 * c: c for c in range(1, k // 2 + 1)})
    shift = _column_shift(layout, {c: c - 1 for c in range(2, k + 1)})
    settings = tuple(
        _build_setting(a + 1, layout, clusters, None, pairing, shift.power(a), blocks)
        for a in range(7)
    )
    return SettingFamily("quad7", settings, d, n_phys, aux, block_family)


def build_physical_scheme(n, block_family: str = "auto") -> SettingFamily:
    """The 4-round scheme for chemistry-structured Hamiltonians (L x 2L grid)."""
    n_phys = _as_n_physical(n)
    mode_count, aux = embed_modes(n_phys, "physical4")
    d = mode_count.n_majorana
    big_l = int(np.sqrt(d // 2) + 0.5)
    assert 2 * big_l * big_l == d
    layout = GridLayout(rows=big_l, cols=2 * big_l)
    clusters: List[IndexSet] = []
    labels: List[str] = []
    for row in range(1, big_l + 1):
        clusters.append(index_set(layout.mode_at(row, 2 * c - 1) for c in range(1, big_l + 1)))
        labels.append(f"O{row}")
        clusters.append(index_set(layout.mode_at(row, 2 * c) for c in range(1, big_l + 1)))
        labels.append(f"E{row}")
    block = build_flat_block(big_l, block_family)
    blocks = tuple(block for _ in clusters)
    even_shift = {2 * c: c - 1 for c in range(1, big_l + 1)}
    odd_shift = {2 * c - 1: c - 1 for c in range(1, big_l + 1)}
    pairing = _column_shift(layout, even_shift)
    sigma2 = _column_shift(layout, odd_shift)
    sigma3 = _column_shift(layout, even_shift)
    sigma4 = sigma2.compose(sigma3)
    settings = tuple(
        _build_setting(r, layout, tuple(clusters), tuple(labels), pairing, sigma, blocks)
        for r, sigma in enumerate(
            (ModePermutation.identity(d), sigma2, sigma3, sigma4), start=1
        )
    )
    return SettingFamily("physical4", settings, d, n_phys, aux, block_family)


def build_random_partition_scheme(
    n, count: int, seed: int, block_family: str = "auto", check_coverage: bool = True
) -> SettingFamily:
    """`count` settings with seeded random equal-size partitions and fresh pairings."""
    if count < 1:
        raise ValueError("need at least one setting")
    n_phys = _as_n_physical(n)
    mode_count, aux = embed_modes(n_phys, "rand9")
    d = mode_count.n_majorana
    big_l = int((np.sqrt(4 * d + 1) - 1) / 2 + 0.5)
    layout = GridLayout(rows=big_l + 1, cols=big_l)
    block = build_flat_block(big_l, block_family)
    rng = np.random.default_rng(seed)
    settings = []
    for r in range(1, count + 1):
        perm = rng.permutation(d) + 1
        clusters = tuple(
            index_set(perm[big_l * a : big_l * (a + 1)].tolist()) for a in range(big_l + 1)
        )
        images = [0] * d
        stacks = {a: list(rng.permutation(list(cl))) for a, cl in enumerate(clusters)}
        for m, (a, b) in enumerate(itertools.combinations(range(big_l + 1), 2), start=1):
            images[2 * m - 2] = int(stacks[a].pop())
            images[2 * m - 1] = int(stacks[b].pop())
        pairing = ModePermutation(tuple(images))
        settings.append(
            _build_setting(
                r,
                layout,
                clusters,
                None,
                pairing,
                ModePermutation.identity(d),
                tuple(block for _ in clusters),
            )
        )
    notes: Tuple[str, ...] = ()
    family = SettingFamily("rand9", tuple(settings), d, n_phys, aux, block_family)
    if check_coverage:
        report = coverage_check(family, "quadruples")
        if report.uncovered:
            notes = (
                f"{len(report.uncovered)} of {report.n_targets} quadruples uncovered "
                f"with count={count}, seed={seed}",
            )
        family = SettingFamily(
            "rand9", tuple(settings), d, n_phys, aux, block_family, coverage_notes=notes
        )
    return family


def build_family(kind: str, n, block_family: str = "auto", seed: int = 0, count: int = 9) -> SettingFamily:
    if kind == "pairs2":
        return build_pair_scheme(n, block_family)
    if kind == "quad7":
        return build_quadruple_scheme_prime(n, block_family)
    if kind == "rand9":
        return build_random_partition_scheme(n, count, seed, block_family)
    if kind == "physical4":
        return build_physical_scheme(n, block_family)
    raise ValueError(f"unknown scheme kind {kind!r}")


@dataclass(frozen=True)
class CoverageReport:
    kind: str
    targets: str
    n_targets: int
    uncovered: Tuple[IndexSet, ...]
    min_best_visibility: float

    @property
    def ok(self) -> bool:
        return not self.uncovered


def _coverage_targets(family: SettingFamily, targets: str) -> List[IndexSet]:
    d = family.n_modes
    if targets == "pairs":
        return [pair for pair in itertools.combinations(range(1, d + 1), 2)]
    if targets == "quadruples":
        return [quad for quad in itertools.combinations(range(1, d + 1), 4)]
    if targets == "chemistry":
        odds = range(1, d + 1, 2)
        evens = range(2, d + 1, 2)
        pairs = [index_set((o, e)) for o in odds for e in evens]
        quads = [
            index_set(oo + ee)
            for oo in itertools.combinations(odds, 2)
            for ee in itertools.combinations(evens, 2)
        ]
        return pairs + quads
    raise ValueError(f"unknown coverage target class {targets!r}")


def coverage_check(family: SettingFamily, targets: str) -> CoverageReport:
    """Enumerate the target class; report uncovered sets and the worst best-visibility."""
    uncovered: List[IndexSet] = []
    min_best = float("inf")
    target_list = _coverage_targets(family, targets)
    for a in target_list:
        best = 0.0
        for setting in family.settings:
            if setting.consistent(a):
                b = setting.select_target_pairs(a)
                best = max(best, abs(submatrix_det(setting.composed, a, b)))
        if best <= 0.0:
            uncovered.append(a)
        else:
            min_best = min(min_best, best)
    if not target_list:
        min_best = 0.0
    return CoverageReport(
        kind=family.kind,
        targets=targets,
        n_targets=len(target_list),
        uncovered=tuple(uncovered),
        min_best_visibility=0.0 if min_best == float("inf") else min_best,
    )
