"""Sparsity graph of the covariance and sufficient conditions for a null moment."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import HermitianCovariance, MultiIndex, check_dimensions


@dataclass(frozen=True)
class SparsityStructure:
    """Bipartite graph between the supports ``N`` (of n) and ``M`` (of m).

    ``S_N[h]`` holds the ``k`` in ``M`` with ``sigma[h][k] != 0`` and ``S_M[k]``
    the ``h`` in ``N`` with the same property.  The partitions are the
    connected components induced on each side.
    """

    N: tuple[int, ...]
    M: tuple[int, ...]
    S_N: dict[int, frozenset[int]]
    S_M: dict[int, frozenset[int]]
    partition_M: tuple[tuple[int, ...], ...]
    partition_N: tuple[tuple[int, ...], ...]

    def block_of(self, k: int) -> int:
        for r, block in enumerate(self.partition_M):
            if k in block:
                return r
        raise KeyError(k)

    def block_n_indices(self, block: tuple[int, ...]) -> tuple[int, ...]:
        """The ``h`` in ``N`` whose (nonempty) neighborhood lies inside ``block``."""
        members = set(block)
        return tuple(h for h in self.N if self.S_N[h] and self.S_N[h] <= members)


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # smaller label wins so roots are deterministic
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx

    def blocks(self):
        groups: dict[int, list[int]] = {}
        for x in self.parent:
            groups.setdefault(self.find(x), []).append(x)
        return tuple(sorted(tuple(sorted(g)) for g in groups.values()))


def _induced_partition(side, neighborhoods):
    uf = _UnionFind(side)
    for nbrs in neighborhoods:
        nbrs = sorted(nbrs)
        for x in nbrs[1:]:
            uf.union(nbrs[0], x)
    return uf.blocks()


def build_sparsity(alpha: MultiIndex, sigma: HermitianCovariance | None) -> SparsityStructure:
    """Neighborhoods and induced partitions; ``sigma=None`` means fully dense."""
    check_dimensions(alpha, sigma)
    N = alpha.support_n
    M = alpha.support_m

    def nonzero(h, k):
        return sigma is None or not sigma.is_structural_zero(h, k)

    S_N = {h: frozenset(k for k in M if nonzero(h, k)) for h in N}
    S_M = {k: frozenset(h for h in N if nonzero(h, k)) for k in M}
    partition_M = _induced_partition(M, S_N.values())
    partition_N = _induced_partition(N, S_M.values())
    return SparsityStructure(N, M, S_N, S_M, partition_M, partition_N)


class NullReason(str, enum.Enum):
    DEGREE_IMBALANCE = "DegreeImbalance"
    EMPTY_NEIGHBORHOOD = "EmptyNeighborhood"
    BLOCK_IMBALANCE = "BlockImbalance"
    NOT_PROVABLY_NULL = "NotProvablyNull"


@dataclass(frozen=True)
class NullVerdict:
    """Outcome of the null-moment detector.

    The detector is sufficient only: ``is_provably_null=False`` does not
    mean the moment is nonzero.

    ``side``/``index`` are filled for an empty neighborhood (side ``"N"`` or
    ``"M"``, 0-based index).  ``block_id``/``block``/``n_sum``/``m_sum`` are
    filled for a block imbalance; ``n_sum``/``m_sum`` also carry the global
    totals for a degree imbalance.
    """

    reason: NullReason
    side: str | None = None
    index: int | None = None
    block_id: int | None = None
    block: tuple[int, ...] | None = None
    n_sum: int | None = None
    m_sum: int | None = None

    @property
    def is_provably_null(self) -> bool:
        return self.reason is not NullReason.NOT_PROVABLY_NULL

    def describe(self) -> str:
        r = self.reason
        if r is NullReason.DEGREE_IMBALANCE:
            return f"DegreeImbalance(sum n = {self.n_sum}, sum m = {self.m_sum})"
        if r is NullReason.EMPTY_NEIGHBORHOOD:
            return f"EmptyNeighborhood({self.side}, {self.index + 1})"
        if r is NullReason.BLOCK_IMBALANCE:
            members = "{" + ",".join(str(k + 1) for k in self.block) + "}"
            return f"BlockImbalance(block {members}: n-sum {self.n_sum} != m-sum {self.m_sum})"
        return "NotProvablyNull"


def null_verdict(
    alpha: MultiIndex,
    sigma: HermitianCovariance | None,
    structure: SparsityStructure | None = None,
) -> NullVerdict:
    """First firing condition among: degree imbalance, empty neighborhood, block imbalance."""
    check_dimensions(alpha, sigma)
    n_total, m_total = alpha.total_degrees()
    if n_total != m_total:
        return NullVerdict(NullReason.DEGREE_IMBALANCE, n_sum=n_total, m_sum=m_total)

    s = structure if structure is not None else build_sparsity(alpha, sigma)
    for h in s.N:
        if not s.S_N[h]:
            return NullVerdict(NullReason.EMPTY_NEIGHBORHOOD, side="N", index=h)
    for k in s.M:
        if not s.S_M[k]:
            return NullVerdict(NullReason.EMPTY_NEIGHBORHOOD, side="M", index=k)

    for r, block in enumerate(s.partition_M):
        n_sum = sum(alpha.n[h] for h in s.block_n_indices(block))
        m_sum = sum(alpha.m[k] for k in block)
        if n_sum != m_sum:
            return NullVerdict(
                NullReason.BLOCK_IMBALANCE, block_id=r, block=block, n_sum=n_sum, m_sum=m_sum
            )
    return NullVerdict(NullReason.NOT_PROVABLY_NULL)


def mirrored_block_imbalance(alpha: MultiIndex, sigma: HermitianCovariance | None) -> bool:
    """Block test with the roles of ``N`` and ``M`` exchanged.

    Not used by :func:`null_verdict`; kept to check empirically that it never
    fires where the ``M``-side test stays silent.
    """
    s = build_sparsity(alpha, sigma)
    if any(not s.S_M[k] for k in s.M):
        return False
    for block in s.partition_N:
        members = set(block)
        m_sum = sum(alpha.m[k] for k in s.M if s.S_M[k] and s.S_M[k] <= members)
        n_sum = sum(alpha.n[h] for h in block)
        if n_sum != m_sum:
            return True
    return False
