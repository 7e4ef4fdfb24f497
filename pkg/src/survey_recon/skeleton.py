"""Skeletons and surveys of distributions over probability vectors.

A skeleton is a finite base set plus a rule for writing every point of its
convex hull as a convex combination of base points. Here the rule is the
exact LP that minimises ``sum_i alpha_i * d_TV(S_i, eta)``; coefficients are
computed lazily per query vector and memoised on the skeleton.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from itertools import combinations_with_replacement, permutations
from pathlib import Path
from typing import Iterable, Sequence

from .core import (
    ProbVec,
    SymmetryGroup,
    VectorDistribution,
    as_rational,
    format_rational,
    g_tv,
)
from .exact_lp import LpProblem, LpStatus, solve

Decomposition = tuple[tuple[int, Fraction], ...]


class Skeleton:
    """Ordered base set of distinct probability vectors.

    With ``symmetric=True`` the base set must be closed under every colour
    permutation and decompositions are made permutation-equivariant.
    """

    def __init__(self, base_set: Iterable, *, symmetric: bool = False, name: str = ""):
        vecs = tuple(v if isinstance(v, ProbVec) else ProbVec(v) for v in base_set)
        if not vecs:
            raise ValueError("empty base set")
        if len({len(v) for v in vecs}) != 1:
            raise ValueError("base vectors of mixed dimension")
        index = {}
        for i, v in enumerate(vecs):
            if v in index:
                raise ValueError(f"duplicate base vector {v!r}")
            index[v] = i
        self.base_set = vecs
        self.index = index
        self.q = len(vecs[0])
        self.symmetric = symmetric
        self.name = name
        self._cache: dict[ProbVec, Decomposition] = {}
        self._perm_index: dict[tuple[int, ...], list[int]] = {}
        if symmetric:
            if self.q > 7:
                raise ValueError("symmetric mode enumerates q! permutations; q <= 7 only")
            for g in SymmetryGroup.full(self.q).generators:
                for v in vecs:
                    if v.permuted(g) not in index:
                        raise ValueError(f"base set not closed under permutations: {v!r}")

    @classmethod
    def natural(cls, vectors: Iterable) -> "Skeleton":
        """Skeleton whose base set is exactly the given support (no hull requirement)."""
        return cls(vectors, name="natural")

    def __len__(self) -> int:
        return len(self.base_set)

    def __iter__(self):
        return iter(self.base_set)

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"<Skeleton{tag} n={len(self)} q={self.q}{' sym' if self.symmetric else ''}>"

    @property
    def covers_simplex(self) -> bool:
        return all(ProbVec.basis(self.q, a) in self.index for a in range(self.q))

    def union(self, other: "Skeleton", name: str = "") -> "Skeleton":
        vecs = list(self.base_set)
        vecs += [v for v in other.base_set if v not in self.index]
        return Skeleton(vecs, symmetric=self.symmetric and other.symmetric, name=name or f"{self.name}+{other.name}")

    def _permutation_map(self, perm: tuple[int, ...]) -> list[int]:
        table = self._perm_index.get(perm)
        if table is None:
            table = [self.index[v.permuted(perm)] for v in self.base_set]
            self._perm_index[perm] = table
        return table

    def decompose(self, eta: ProbVec) -> Decomposition:
        if not isinstance(eta, ProbVec):
            eta = ProbVec(eta)
        hit = self._cache.get(eta)
        if hit is not None:
            return hit
        if eta in self.index:
            out = ((self.index[eta], Fraction(1)),)
        elif self.symmetric:
            out = self._decompose_equivariant(eta)
        else:
            out = _tv_decomposition(self.base_set, eta)
        self._cache[eta] = out
        return out

    def _canonical(self, eta: ProbVec) -> ProbVec:
        order = sorted(range(self.q), key=lambda a: (-eta[a], a))
        return ProbVec.trusted(tuple(eta[a] for a in order))

    def _spread(self, src: ProbVec, dec: Decomposition, dst: ProbVec) -> Decomposition:
        """Average ``dec`` (a decomposition of ``src``) over every relabelling taking src to dst."""
        perms = [p for p in permutations(range(self.q)) if src.permuted(p) == dst]
        acc: dict[int, Fraction] = {}
        share = Fraction(1, len(perms))
        for p in perms:
            table = self._permutation_map(p)
            for i, c in dec:
                j = table[i]
                acc[j] = acc.get(j, 0) + c * share
        return tuple(sorted((i, c) for i, c in acc.items() if c))

    def _decompose_equivariant(self, eta: ProbVec) -> Decomposition:
        rep = self._canonical(eta)
        base = self._cache.get(rep)
        if base is None:
            # symmetrise over the stabiliser so rep's own answer is invariant too
            base = self._spread(rep, _tv_decomposition(self.base_set, rep), rep)
            self._cache[rep] = base
        return base if rep == eta else self._spread(rep, base, eta)

    def prefetch(self, vectors: Iterable[ProbVec], workers: int = 1) -> None:
        """Fill the decomposition cache, optionally in worker processes."""
        todo = [v for v in vectors if v not in self._cache and v not in self.index]
        if self.symmetric:
            pending = list(dict.fromkeys(r for r in map(self._canonical, todo) if r not in self._cache and r not in self.index))
        else:
            pending = todo
        if workers > 1 and len(pending) > 4 * workers:
            chunk = math.ceil(len(pending) / (4 * workers))
            with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(self.base_set,)) as ex:
                for vec, dec in zip(pending, ex.map(_worker_decompose, pending, chunksize=chunk)):
                    self._cache[vec] = self._spread(vec, dec, vec) if self.symmetric else dec
        for v in todo:
            self.decompose(v)

    def to_text(self) -> str:
        lines = [f"# skeleton {self.name} q={self.q} n={len(self)}"]
        lines += [" ".join(format_rational(x) for x in v) for v in self.base_set]
        return "\n".join(lines) + "\n"


_WORKER_BASE: tuple[ProbVec, ...] = ()


def _init_worker(base_set):
    global _WORKER_BASE
    _WORKER_BASE = base_set


def _worker_decompose(eta):
    return _tv_decomposition(_WORKER_BASE, eta)


def _tv_decomposition(base_set: Sequence[ProbVec], eta: ProbVec) -> Decomposition:
    """TV-cost-minimal convex decomposition via column generation.

    Starts from the nearest base points, prices every column with the
    restricted duals and adds violators until none remain, so the result is
    optimal over the full base set.
    """
    n, q = len(base_set), len(eta)
    costs = [g_tv(s, eta) for s in base_set]
    by_distance = sorted(range(n), key=lambda i: (costs[i], i))
    k = min(n, 3 * q)
    active = sorted(by_distance[:k])
    while True:
        problem = LpProblem(
            tuple(costs[i] for i in active),
            tuple(tuple(base_set[i][a] for i in active) for a in range(q)),
            tuple(eta),
        )
        sol = solve(problem)
        if sol.status is LpStatus.INFEASIBLE:
            if k >= n:
                raise ValueError(f"{eta!r} lies outside the hull of the base set")
            k = min(n, 2 * k)
            active = sorted(set(active) | set(by_distance[:k]))
            continue
        if sol.status is not LpStatus.OPTIMAL:
            raise RuntimeError("decomposition LP cannot be unbounded")
        y = sol.duals
        in_active = set(active)
        entering = [
            i
            for i in range(n)
            if i not in in_active and costs[i] < sum(ya * sa for ya, sa in zip(y, base_set[i]) if sa)
        ]
        if not entering:
            return tuple((active[j], v) for j, v in enumerate(sol.values) if v)
        active = sorted(in_active | set(entering))


def decompose(eta, skeleton: Skeleton) -> Decomposition:
    return skeleton.decompose(eta)


class Survey(VectorDistribution):
    """Distribution on a skeleton's base set (``skeleton=None``: its own support)."""

    __slots__ = ("skeleton",)

    def __init__(self, items, skeleton: Skeleton | None = None, *, normalize: bool = False):
        super().__init__(items, normalize=normalize)
        if skeleton is not None and any(v not in skeleton.index for v in self._w):
            raise ValueError("survey support is not inside the skeleton's base set")
        self.skeleton = skeleton

    @classmethod
    def _trusted(cls, weights, skeleton: Skeleton | None = None):
        obj = cls.__new__(cls)
        obj._w = weights
        obj.skeleton = skeleton
        return obj

    @classmethod
    def from_distribution(cls, dist: VectorDistribution) -> "Survey":
        return cls._trusted(dict(dist.items()), None)

    def indexed_support(self) -> list[tuple[int, Fraction]]:
        if self.skeleton is None:
            raise ValueError("survey on its natural support has no skeleton indices")
        return sorted((self.skeleton.index[v], w) for v, w in self._w.items())


def survey_of(distribution: VectorDistribution, skeleton: Skeleton) -> Survey:
    acc: dict[ProbVec, Fraction] = {}
    base = skeleton.base_set
    for eta, w in distribution.items():
        for i, c in skeleton.decompose(eta):
            s = base[i]
            acc[s] = acc.get(s, 0) + w * c
    return Survey._trusted(acc, skeleton)


def resurvey(survey: VectorDistribution, new_skeleton: Skeleton) -> Survey:
    """Survey of a survey; by transitivity it surveys whatever the input surveyed."""
    return survey_of(survey, new_skeleton)


def mix(surveys: Sequence[VectorDistribution], probabilities: Sequence) -> Survey:
    probs = [as_rational(p) for p in probabilities]
    if len(probs) != len(surveys) or not surveys:
        raise ValueError("need one probability per survey")
    if any(p < 0 for p in probs) or sum(probs) != 1:
        raise ValueError("mixing probabilities must be nonnegative and sum to 1")
    acc: dict[ProbVec, Fraction] = {}
    for s, p in zip(surveys, probs):
        if not p:
            continue
        for v, w in s.items():
            acc[v] = acc.get(v, 0) + p * w
    skels = {id(getattr(s, "skeleton", None)) for s, p in zip(surveys, probs) if p}
    skel = getattr(surveys[0], "skeleton", None) if len(skels) == 1 else None
    if skel is not None and any(v not in skel.index for v in acc):
        skel = None
    return Survey._trusted(acc, skel)


def round_survey(survey: VectorDistribution, n: int, symmetry: SymmetryGroup | None) -> Survey:
    """Round non-basis weights down to multiples of ``1/n``; basis vectors absorb the rest.

    Only valid for colour-symmetric surveys: the removed mass is then
    symmetric and the uniform law on basis vectors surveys it.
    """
    if n < 1:
        raise ValueError("rounding denominator must be positive")
    if symmetry is None:
        raise ValueError("rounding is only defined for symmetric surveys")
    if not survey.is_orbit_constant(symmetry):
        raise ValueError("survey weights are not constant on colour orbits")
    q = survey.q
    basis = [ProbVec.basis(q, a) for a in range(q)]
    acc: dict[ProbVec, Fraction] = {}
    kept = Fraction(0)
    for v, w in survey.items():
        if v.is_basis():
            continue
        r = Fraction(math.floor(w * n), n)
        if r:
            acc[v] = r
            kept += r
    share = (1 - kept) / q
    if share:
        for e in basis:
            acc[e] = share
    skel = getattr(survey, "skeleton", None)
    if skel is not None and not skel.covers_simplex:
        skel = None
    return Survey._trusted(acc, skel)


# -- skeleton generators ------------------------------------------------------


def _compositions(total: int, parts: int):
    for cuts in combinations_with_replacement(range(total + 1), parts - 1):
        prev, out = 0, []
        for c in cuts:
            out.append(c - prev)
            prev = c
        out.append(total - prev)
        yield out


def make_grid_skeleton(q: int, m: int) -> Skeleton:
    """All probability vectors with entries in ``{0, 1/m, ..., 1}``."""
    if m < 1:
        raise ValueError("grid resolution must be >= 1")
    vecs = sorted({ProbVec.trusted(tuple(Fraction(c, m) for c in comp)) for comp in _compositions(m, q)}, reverse=True)
    return Skeleton(vecs, symmetric=True, name=f"grid{m}")


def make_star_skeleton(q: int, radii: Sequence) -> Skeleton:
    """Rays ``(1-t) u + t e_a`` from the uniform vector, plus basis and uniform."""
    u = Fraction(1, q)
    vecs: list[ProbVec] = [ProbVec.basis(q, a) for a in range(q)] + [ProbVec.uniform(q)]
    for t in radii:
        t = as_rational(t)
        if not 0 < t <= 1:
            raise ValueError("radii must lie in (0, 1]")
        for a in range(q):
            v = ProbVec.trusted(tuple((1 - t) * u + (t if b == a else 0) for b in range(q)))
            if v not in vecs:
                vecs.append(v)
    return Skeleton(vecs, symmetric=True, name="star")


def make_scaled_grid_skeleton(q: int, m: int, scale) -> Skeleton:
    """Grid of resolution ``m`` shrunk towards the uniform vector by ``scale``,
    plus the basis vectors so the whole simplex stays covered."""
    scale = as_rational(scale)
    if not 0 < scale <= 1:
        raise ValueError("scale must lie in (0, 1]")
    u = Fraction(1, q)
    vecs = [ProbVec.basis(q, a) for a in range(q)]
    seen = set(vecs)
    for v in make_grid_skeleton(q, m).base_set:
        w = ProbVec.trusted(tuple(u + scale * (x - u) for x in v))
        if w not in seen:
            seen.add(w)
            vecs.append(w)
    return Skeleton(vecs, symmetric=True, name=f"zoom{m}@{format_rational(scale)}")


def make_basis_skeleton(q: int) -> Skeleton:
    return Skeleton([ProbVec.basis(q, a) for a in range(q)], symmetric=True, name="basis")


def parse_skeleton_text(text: str, *, symmetric: bool = False, name: str = "file") -> Skeleton:
    vecs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vecs.append(ProbVec(line.split()))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return Skeleton(vecs, symmetric=symmetric, name=name)


def load_skeleton(path, *, symmetric: bool = False) -> Skeleton:
    path = Path(path)
    return parse_skeleton_text(path.read_text(encoding="utf-8"), symmetric=symmetric, name=path.stem)
