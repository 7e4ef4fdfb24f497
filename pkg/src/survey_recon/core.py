"""Exact rational model types and the belief-propagation update.

Everything here works on :class:`fractions.Fraction`; floats are rejected at
the boundary so that certified computations never pick up rounding error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from math import comb
from typing import Iterable, Iterator, Mapping, Sequence

Rational = Fraction


class ModelContradiction(ValueError):
    """All boundary configurations have zero weight."""


class BudgetExceeded(RuntimeError):
    """An enumeration would exceed its configured size guard."""


def as_rational(value) -> Fraction:
    """Exact conversion of ints, Fractions and decimal / ``num/den`` strings.

    Floats are refused: ``0.69`` as a float is not 69/100.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip().replace("_", ""))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {value!r}") from exc
    if isinstance(value, float):
        raise TypeError(f"float {value!r} refused; pass a string or Fraction")
    # numbers.Rational implementations such as gmpy2.mpq
    try:
        return Fraction(value.numerator, value.denominator)
    except AttributeError:
        raise TypeError(f"cannot convert {type(value).__name__} to a rational") from None


def format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def decimal_string(x: Fraction, digits: int = 12) -> str:
    """Informational decimal rendering with ``digits`` significant digits."""
    if x == 0:
        return "0"
    sign = "-" if x < 0 else ""
    x = abs(x)
    exp = 0
    while x >= 10:
        x /= 10
        exp += 1
    while x < 1:
        x *= 10
        exp -= 1
    mant = round(x * 10 ** (digits - 1))
    if mant == 10**digits:
        mant //= 10
        exp += 1
    s = str(mant)
    if -5 <= exp < digits:
        if exp >= 0:
            whole, frac = s[: exp + 1], s[exp + 1 :]
        else:
            whole, frac = "0", "0" * (-exp - 1) + s
        frac = frac.rstrip("0")
        return sign + whole + ("." + frac if frac else "")
    frac = s[1:].rstrip("0")
    return f"{sign}{s[0]}{'.' + frac if frac else ''}e{exp:+d}"


class ProbVec(tuple):
    """Probability vector over ``{0..q-1}`` with exact rational entries."""

    __slots__ = ()

    def __new__(cls, entries: Iterable) -> "ProbVec":
        vals = tuple(as_rational(e) for e in entries)
        if not vals:
            raise ValueError("empty probability vector")
        if any(v < 0 for v in vals):
            raise ValueError(f"negative entry in {vals}")
        if sum(vals) != 1:
            raise ValueError(f"entries sum to {sum(vals)}, not 1")
        return tuple.__new__(cls, vals)

    @classmethod
    def trusted(cls, vals: Sequence[Fraction]) -> "ProbVec":
        # hot-path constructor; caller guarantees the invariants
        return tuple.__new__(cls, vals)

    @classmethod
    def basis(cls, q: int, a: int) -> "ProbVec":
        return tuple.__new__(cls, tuple(Fraction(int(i == a)) for i in range(q)))

    @classmethod
    def uniform(cls, q: int) -> "ProbVec":
        return tuple.__new__(cls, (Fraction(1, q),) * q)

    @property
    def q(self) -> int:
        return len(self)

    def is_basis(self) -> bool:
        return max(self) == 1

    def permuted(self, perm: Sequence[int]) -> "ProbVec":
        """Relabel values: entry ``a`` moves to position ``perm[a]``."""
        out = [Fraction(0)] * len(self)
        for a, v in enumerate(self):
            out[perm[a]] = v
        return tuple.__new__(ProbVec, out)

    def __repr__(self) -> str:
        return "ProbVec(" + ", ".join(format_rational(v) for v in self) + ")"


def normalized(vec: Sequence[Fraction]) -> tuple[ProbVec, Fraction]:
    total = sum(vec)
    if total == 0:
        raise ZeroDivisionError("zero vector cannot be normalised")
    return ProbVec.trusted(tuple(v / total for v in vec)), total


@dataclass(frozen=True)
class PotentialMatrix:
    """Nonnegative edge potential indexed ``(parent value, child value)``."""

    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(as_rational(v) for v in r) for r in self.rows)
        if not rows or not rows[0]:
            raise ValueError("empty potential")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("ragged potential matrix")
        for r in rows:
            if any(v < 0 for v in r):
                raise ValueError("potential entries must be nonnegative")
            if not any(v > 0 for v in r):
                raise ValueError("every parent value needs a positive entry")
        object.__setattr__(self, "rows", rows)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0])

    def message(self, child: Sequence[Fraction]) -> tuple[Fraction, ...]:
        """``m[a] = sum_s Psi(a, s) * child[s]``."""
        return tuple(sum(p * c for p, c in zip(row, child) if p and c) for row in self.rows)

    def scaled(self, c) -> "PotentialMatrix":
        c = as_rational(c)
        if c <= 0:
            raise ValueError("scale must be positive")
        return PotentialMatrix(tuple(tuple(c * v for v in r) for r in self.rows))

    def is_symmetric_under(self, perm: Sequence[int]) -> bool:
        n = len(self.rows)
        return all(
            self.rows[perm[a]][perm[b]] == self.rows[a][b] for a in range(n) for b in range(n)
        )

    @classmethod
    def identity(cls, q: int) -> "PotentialMatrix":
        return cls(tuple(tuple(Fraction(int(a == b)) for b in range(q)) for a in range(q)))

    @classmethod
    def coloring(cls, q: int) -> "PotentialMatrix":
        return cls(tuple(tuple(Fraction(int(a != b)) for b in range(q)) for a in range(q)))


@dataclass(frozen=True)
class Channel:
    q: int
    matrix: PotentialMatrix
    lam: Fraction | None = None

    def __post_init__(self):
        if self.matrix.shape != (self.q, self.q):
            raise ValueError("channel matrix must be q x q")
        for r in self.matrix.rows:
            if sum(r) != 1:
                raise ValueError("channel rows must sum to 1")


def potts_channel(q: int, lam) -> Channel:
    """Symmetric q-state channel whose second eigenvalue is ``lam``."""
    if q < 2:
        raise ValueError("q must be at least 2")
    lam = as_rational(lam)
    if not Fraction(-1, q - 1) <= lam <= 1:
        raise ValueError(f"lambda={lam} outside [-1/(q-1), 1]")
    p = (1 - lam) * (q - 1) / q
    stay, move = 1 - p, p / (q - 1)
    rows = tuple(tuple(stay if a == b else move for b in range(q)) for a in range(q))
    return Channel(q, PotentialMatrix(rows), lam)


@dataclass(frozen=True)
class DegreeDistribution:
    """Offspring law as ``(degree, probability)`` atoms plus optional tail mass."""

    atoms: tuple[tuple[int, Fraction], ...]
    tail: Fraction = Fraction(0)

    def __post_init__(self):
        atoms = tuple((int(d), as_rational(p)) for d, p in self.atoms)
        tail = as_rational(self.tail)
        degs = [d for d, _ in atoms]
        if not atoms:
            raise ValueError("degree distribution needs at least one atom")
        if len(set(degs)) != len(degs):
            raise ValueError(f"duplicate degree in {degs}")
        if any(d < 1 for d in degs):
            raise ValueError("degrees must be >= 1")
        if any(p < 0 for _, p in atoms) or tail < 0:
            raise ValueError("negative probability")
        if sum(p for _, p in atoms) + tail != 1:
            raise ValueError("degree probabilities (plus tail) must sum to 1")
        atoms = tuple(sorted((d, p) for d, p in atoms if p > 0))
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def point(cls, d: int) -> "DegreeDistribution":
        return cls(((d, Fraction(1)),))

    @property
    def mean(self) -> Fraction:
        if self.tail:
            raise ValueError("mean undefined for a truncated distribution")
        return sum((d * p for d, p in self.atoms), Fraction(0))

    @property
    def max_degree(self) -> int:
        return max(d for d, _ in self.atoms)

    def binomial_moment(self, j: int) -> Fraction:
        """``E[C(d, j)]``."""
        return sum((comb(d, j) * p for d, p in self.atoms), Fraction(0))


@dataclass(frozen=True)
class LevelSpec:
    degree: DegreeDistribution
    potentials: tuple[tuple[PotentialMatrix, Fraction], ...]

    def __post_init__(self):
        pots = tuple((m, as_rational(p)) for m, p in self.potentials)
        if not pots:
            raise ValueError("level needs at least one potential")
        if sum(p for _, p in pots) != 1:
            raise ValueError("potential probabilities must sum to 1")
        if len({m.shape for m, _ in pots}) != 1:
            raise ValueError("potentials of one level must share a shape")
        object.__setattr__(self, "potentials", tuple((m, p) for m, p in pots if p > 0))

    @classmethod
    def single(cls, degree: DegreeDistribution, potential: PotentialMatrix) -> "LevelSpec":
        return cls(degree, ((potential, Fraction(1)),))


def bp_update(
    potentials: Sequence[PotentialMatrix], children: Sequence[Sequence[Fraction]]
) -> tuple[tuple[Fraction, ...], Fraction]:
    """Unnormalised BP message ``f`` at the parent and its norm ``sum_a f^a``.

    ``f^a = prod_i sum_s eta_i^s Psi_i(a, s)``. A zero norm means the children
    are inconsistent under hard constraints; callers drop such terms.
    """
    if len(potentials) != len(children) or not children:
        raise ValueError("need equally many (>= 1) potentials and children")
    f = None
    for psi, eta in zip(potentials, children):
        if psi.shape[1] != len(eta):
            raise ValueError("child dimension does not match potential")
        m = psi.message(eta)
        f = m if f is None else tuple(x * y for x, y in zip(f, m))
    return f, sum(f)


def g_sq(eta: Sequence[Fraction], q: int | None = None) -> Fraction:
    """``sum_a (eta^a - 1/q)^2``."""
    q = len(eta) if q is None else q
    if len(eta) != q:
        raise ValueError("dimension mismatch")
    u = Fraction(1, q)
    return sum(((v - u) ** 2 for v in eta), Fraction(0))


def g_tv(eta: Sequence[Fraction], pi: Sequence[Fraction]) -> Fraction:
    if len(eta) != len(pi):
        raise ValueError("dimension mismatch")
    return sum((abs(a - b) for a, b in zip(eta, pi)), Fraction(0)) / 2


@dataclass(frozen=True)
class SymmetryGroup:
    """Colour permutations under which a model is invariant."""

    q: int
    generators: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        for g in self.generators:
            if sorted(g) != list(range(self.q)):
                raise ValueError(f"{g} is not a permutation of 0..{self.q - 1}")

    @classmethod
    def full(cls, q: int) -> "SymmetryGroup":
        if q == 1:
            return cls(1, ())
        swap = (1, 0) + tuple(range(2, q))
        cycle = tuple((i + 1) % q for i in range(q))
        return cls(q, (swap, cycle))

    def elements(self) -> list[tuple[int, ...]]:
        """Closure of the generators (small q only)."""
        ident = tuple(range(self.q))
        seen = {ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for p in frontier:
                for g in self.generators:
                    c = tuple(g[p[i]] for i in range(self.q))
                    if c not in seen:
                        seen.add(c)
                        nxt.append(c)
            frontier = nxt
        return sorted(seen)

    def is_full(self) -> bool:
        return len(self.elements()) == len(list(permutations(range(self.q))))


class VectorDistribution:
    """Finitely supported distribution over probability vectors.

    Weights are exact, positive and sum to one; equal vectors are merged.
    """

    __slots__ = ("_w",)

    def __init__(self, items: Mapping | Iterable, *, normalize: bool = False):
        pairs = items.items() if isinstance(items, Mapping) else items
        acc: dict[ProbVec, Fraction] = {}
        for vec, w in pairs:
            w = as_rational(w)
            if w < 0:
                raise ValueError("negative weight")
            if w == 0:
                continue
            if not isinstance(vec, ProbVec):
                vec = ProbVec(vec)
            acc[vec] = acc.get(vec, 0) + w
        total = sum(acc.values())
        if not acc:
            raise ValueError("distribution has no mass")
        if normalize:
            if total != 1:
                acc = {v: w / total for v, w in acc.items()}
        elif total != 1:
            raise ValueError(f"weights sum to {total}, not 1")
        if len({len(v) for v in acc}) != 1:
            raise ValueError("vectors of mixed dimension")
        self._w = acc

    @classmethod
    def _trusted(cls, weights: dict[ProbVec, Fraction]):
        obj = cls.__new__(cls)
        obj._w = weights
        return obj

    @property
    def q(self) -> int:
        return len(next(iter(self._w)))

    def __len__(self) -> int:
        return len(self._w)

    def __iter__(self) -> Iterator[ProbVec]:
        return iter(self._w)

    def items(self):
        return self._w.items()

    def weight(self, vec) -> Fraction:
        return self._w.get(vec, Fraction(0))

    @property
    def support(self) -> tuple[tuple[ProbVec, Fraction], ...]:
        return tuple(sorted(self._w.items()))

    def mean(self) -> ProbVec:
        q = self.q
        acc = [Fraction(0)] * q
        for vec, w in self._w.items():
            for a in range(q):
                if vec[a]:
                    acc[a] += w * vec[a]
        return ProbVec.trusted(tuple(acc))

    def expect(self, fn) -> Fraction:
        return sum((w * fn(v) for v, w in self._w.items()), Fraction(0))

    def total_weight(self) -> Fraction:
        return sum(self._w.values(), Fraction(0))

    def is_orbit_constant(self, symmetry: SymmetryGroup) -> bool:
        for vec, w in self._w.items():
            for g in symmetry.generators:
                if self._w.get(vec.permuted(g), 0) != w:
                    return False
        return True

    def same_as(self, other: "VectorDistribution") -> bool:
        return self._w == other._w

    def __eq__(self, other):
        if not isinstance(other, VectorDistribution):
            return NotImplemented
        return self._w == other._w

    __hash__ = None

    def __repr__(self) -> str:
        body = ", ".join(f"{v!r}: {format_rational(w)}" for v, w in self.support[:6])
        more = ", ..." if len(self) > 6 else ""
        return f"{type(self).__name__}({{{body}{more}}})"


def uniform_over_basis(q: int) -> dict[ProbVec, Fraction]:
    return {ProbVec.basis(q, a): Fraction(1, q) for a in range(q)}
