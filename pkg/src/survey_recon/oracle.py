"""Ground truth at desk scale.

Two independent routes to the residual distribution at the root of a fixed
tree MRF: the exact distributional recursion over children, and brute-force
enumeration of every boundary configuration with direct partition sums.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Sequence

from .core import (
    BudgetExceeded,
    ModelContradiction,
    PotentialMatrix,
    ProbVec,
    VectorDistribution,
    bp_update,
    uniform_over_basis,
)

DEFAULT_BOUNDARY_BUDGET = 3**16
BUDGET_ENV = "SURVEY_RECON_BUDGET"


def boundary_budget(explicit: int | None = None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get(BUDGET_ENV)
    return int(env) if env else DEFAULT_BOUNDARY_BUDGET


class ResidualDistribution(VectorDistribution):
    """Law of the root's conditional marginal given a random boundary."""

    __slots__ = ()

    @classmethod
    def single_vertex(cls, q: int) -> "ResidualDistribution":
        # the boundary is the root itself
        return cls(uniform_over_basis(q))


@dataclass(frozen=True, eq=False)
class TreeInstance:
    """A fixed tree MRF: each edge carries its potential and child subtree."""

    q: int
    edges: tuple[tuple[PotentialMatrix, "TreeInstance"], ...] = ()

    def __post_init__(self):
        depths = {child.depth for _, child in self.edges}
        if len(depths) > 1:
            raise ValueError("all leaves must sit on the same level")
        for psi, child in self.edges:
            if psi.shape != (self.q, child.q):
                raise ValueError("potential shape does not match the domains")

    @property
    def depth(self) -> int:
        return 1 if not self.edges else 1 + self.edges[0][1].depth

    @property
    def n_leaves(self) -> int:
        return 1 if not self.edges else sum(c.n_leaves for _, c in self.edges)

    @classmethod
    def complete(cls, q: int, degree: int, depth: int, potential: PotentialMatrix) -> "TreeInstance":
        node = cls(q)
        for _ in range(depth - 1):
            node = cls(q, tuple((potential, node) for _ in range(degree)))
        return node

    @classmethod
    def from_levels(cls, q: int, levels: Sequence[tuple[int, Sequence[PotentialMatrix]]]) -> "TreeInstance":
        """``levels[0]`` describes the root's edges, ``levels[-1]`` the last internal level."""
        node = cls(q)
        for degree, pots in reversed(levels):
            if len(pots) != degree:
                raise ValueError("need one potential per edge")
            node = cls(q, tuple((p, node) for p in pots))
        return node


def residual_exact(
    children: Sequence[ResidualDistribution], potentials: Sequence[PotentialMatrix]
) -> ResidualDistribution:
    """One step of the exact recursion, enumerating ordered support tuples."""
    if len(children) != len(potentials) or not children:
        raise ValueError("need equally many (>= 1) children and potentials")
    acc: dict[ProbVec, Fraction] = {}
    for combo in product(*(c.support for c in children)):
        weight = Fraction(1)
        for _, w in combo:
            weight *= w
        f, norm = bp_update(potentials, [v for v, _ in combo])
        if norm == 0:
            continue
        eta = ProbVec.trusted(tuple(x / norm for x in f))
        acc[eta] = acc.get(eta, 0) + weight * norm
    total = sum(acc.values())
    if total == 0:
        raise ModelContradiction("every child combination is inconsistent")
    return ResidualDistribution._trusted({v: w / total for v, w in acc.items()})


def residual_of_tree(tree: TreeInstance) -> ResidualDistribution:
    @lru_cache(maxsize=None)
    def go(node: TreeInstance) -> ResidualDistribution:
        if not node.edges:
            return ResidualDistribution.single_vertex(node.q)
        return residual_exact([go(c) for _, c in node.edges], [p for p, _ in node.edges])

    return go(tree)


def _leaves(tree: TreeInstance) -> list[TreeInstance]:
    if not tree.edges:
        return [tree]
    out = []
    for _, child in tree.edges:
        out.extend(_leaves(child))
    return out


def _partition_vector(tree: TreeInstance, boundary: Sequence[int] | None) -> list[Fraction]:
    """``Z(root = a, L)`` for every a; ``boundary=None`` leaves the leaves free."""
    pos = 0

    def go(node):
        nonlocal pos
        if not node.edges:
            if boundary is None:
                return [Fraction(1)] * node.q
            val = boundary[pos]
            pos += 1
            return [Fraction(int(a == val)) for a in range(node.q)]
        z = [Fraction(1)] * node.q
        for psi, child in node.edges:
            zc = go(child)
            for a in range(node.q):
                z[a] *= sum(psi.rows[a][b] * zc[b] for b in range(child.q))
        return z

    return go(tree)


def brute_force_residual(tree: TreeInstance, budget: int | None = None) -> ResidualDistribution:
    """Enumerate every boundary ``L``; weight ``eta_T(L)`` by ``Z_T(L) / Z_T``."""
    leaves = _leaves(tree)
    n_boundaries = 1
    for leaf in leaves:
        n_boundaries *= leaf.q
    limit = boundary_budget(budget)
    if n_boundaries > limit:
        raise BudgetExceeded(f"{n_boundaries} boundaries exceed the budget of {limit}")
    acc: dict[ProbVec, Fraction] = {}
    z_total = Fraction(0)
    for boundary in product(*(range(leaf.q) for leaf in leaves)):
        z = _partition_vector(tree, boundary)
        z_l = sum(z)
        if z_l == 0:
            continue
        z_total += z_l
        eta = ProbVec.trusted(tuple(v / z_l for v in z))
        acc[eta] = acc.get(eta, 0) + z_l
    if z_total == 0:
        raise ModelContradiction("partition function vanishes")
    return ResidualDistribution._trusted({v: w / z_total for v, w in acc.items()})


def root_marginal_exact(tree: TreeInstance) -> ProbVec:
    z = _partition_vector(tree, None)
    total = sum(z)
    if total == 0:
        raise ModelContradiction("partition function vanishes")
    return ProbVec.trusted(tuple(v / total for v in z))


def depth_monotonicity_check(trees: Sequence[TreeInstance], a: int, b: int, budget: int | None = None) -> list[Fraction]:
    """``E_L |P(a|L)/pi(a) - P(b|L)/pi(b)|`` for each tree (caller orders by depth)."""
    out = []
    for tree in trees:
        pi = root_marginal_exact(tree)
        if pi[a] == 0 or pi[b] == 0:
            raise ValueError(f"root marginal vanishes at {a if pi[a] == 0 else b}")
        dist = brute_force_residual(tree, budget)
        out.append(dist.expect(lambda eta: abs(eta[a] / pi[a] - eta[b] / pi[b])))
    return out
