"""Contraction certificates for the q-state Potts channel.

The one-step inequality bounds ``x_{n+1}`` by a polynomial in ``x_n`` and the
second moment ``z_n``, with ``0 <= z_n <= x_n``. Writing ``z = u x`` turns its
right-hand side into ``R(x, u) = sum c_ik x^i u^k`` with ``u`` in ``[0, 1]``.
Everything below works on that bivariate form in exact arithmetic:

* ``xn_step_bound`` maximises ``R(x, .)`` over ``u`` exactly (or by a
  rigorous rational upper bound when the maximiser is irrational);
* ``certify_contraction`` bounds ``sup R(x, u) / x`` over ``(0, x_hat]``
  by splitting ``x`` into subintervals, pushing every monomial to the
  endpoint that makes it largest, then maximising the result over ``u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import sympy

from .core import DegreeDistribution, as_rational, decimal_string, format_rational

# interval width for isolating irrational critical points
ROOT_EPS = Fraction(1, 10**40)
DEFAULT_SUBINTERVALS = 16
ENCLOSURE_WIDTH = Fraction(1, 10**9)

Poly1 = list  # coefficients, lowest degree first
Poly2 = dict  # {(i, k): c} for c * x**i * u**k


# -- small exact polynomial helpers -------------------------------------------


def _binomial_expand(a: Fraction, b: Fraction, j: int) -> Poly1:
    """Coefficients of ``(a + b u)^j`` in ``u``."""
    return [math.comb(j, k) * a ** (j - k) * b**k for k in range(j + 1)]


def poly_eval(coeffs: Sequence[Fraction], t: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def _upper_on_interval(coeffs: Sequence[Fraction], a: Fraction, b: Fraction) -> Fraction:
    # valid for 0 <= a <= t <= b: each monomial pushed to its worst endpoint
    return sum((c * (b**k if c > 0 else a**k) for k, c in enumerate(coeffs) if c), Fraction(0))


def _to_fraction(r) -> Fraction:
    r = sympy.Rational(r)
    return Fraction(int(r.p), int(r.q))


@dataclass(frozen=True)
class UnitMax:
    """Maximum of a univariate polynomial over ``[0, 1]``."""

    value: Fraction
    argmax: Fraction
    exact: bool  # False: ``value`` is a rigorous upper bound, argmax is an interval endpoint


def max_on_unit_interval(coeffs: Sequence[Fraction]) -> UnitMax:
    coeffs = [Fraction(c) for c in coeffs]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    best = max((UnitMax(poly_eval(coeffs, t), t, True) for t in (Fraction(0), Fraction(1))), key=lambda m: m.value)
    if len(coeffs) <= 2:
        return best
    deriv = [k * c for k, c in enumerate(coeffs)][1:]
    u = sympy.Symbol("u")
    poly = sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in reversed(deriv)], u, domain="QQ")
    for (lo, hi), _ in poly.intervals(inf=0, sup=1, eps=sympy.Rational(ROOT_EPS.numerator, ROOT_EPS.denominator)):
        a, b = _to_fraction(lo), _to_fraction(hi)
        if a == b:
            cand = UnitMax(poly_eval(coeffs, a), a, True)
        else:
            cand = UnitMax(_upper_on_interval(coeffs, a, b), b, False)
        if cand.value > best.value:
            best = cand
    return best


# -- the one-step inequality ----------------------------------------------------


@dataclass(frozen=True)
class ContractionProblem:
    q: int
    lam: Fraction
    degree: DegreeDistribution
    x_hat: Fraction

    def __post_init__(self):
        lam = as_rational(self.lam)
        x_hat = as_rational(self.x_hat)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "x_hat", x_hat)
        if self.q < 3:
            raise ValueError("the one-step inequality divides by q - 2; q >= 3 required")
        if not Fraction(-1, self.q - 1) <= lam <= 1:
            raise ValueError(f"lambda={lam} outside [-1/(q-1), 1]")
        if not 0 <= x_hat <= 1 - Fraction(1, self.q):
            raise ValueError(f"x_hat={x_hat} outside [0, 1 - 1/q]")
        if self.degree.tail:
            raise ValueError("degree distribution with tail mass has no finite d_max")

    @property
    def d_bar(self) -> Fraction:
        return self.degree.mean

    @property
    def d_max(self) -> int:
        return self.degree.max_degree

    def with_x_hat(self, x_hat) -> "ContractionProblem":
        return ContractionProblem(self.q, self.lam, self.degree, x_hat)


def _term_coefficients(q: int, lam: Fraction, j: int) -> Poly1:
    """``h_j(u)``: the bracketed j-term divided by ``x^j`` with ``z = u x``."""
    q_ = Fraction(q)
    a_w = 2 * (q_ - 1) / q_**2
    a = _binomial_expand(q_ * (q_ - 3 + lam) / (q_ - 1), -(q_**2) * lam / (q_ - 1), j)
    b_w = (q_ - 1) * (q_ - 2) / q_**2
    b = _binomial_expand(
        -q_ * (3 * q_ - 6 + 2 * lam) / ((q_ - 1) * (q_ - 2)),
        2 * q_**2 * lam / ((q_ - 1) * (q_ - 2)),
        j,
    )
    c = 2 * (q_ - 1) / q_ * (-q_ / (q_ - 1)) ** j
    out = [a_w * ai + b_w * bi for ai, bi in zip(a, b)]
    out[0] -= c
    return out


def step_polynomial(q: int, lam, degree: DegreeDistribution) -> Poly2:
    """Coefficients ``c_ik`` of ``R(x, u)``, the right-hand side with ``z = u x``."""
    lam = as_rational(lam)
    poly: Poly2 = {(1, 0): degree.mean * lam**2}
    for j in range(2, degree.max_degree + 1):
        w = degree.binomial_moment(j) * lam ** (2 * j)
        if not w:
            continue
        for k, h in enumerate(_term_coefficients(q, lam, j)):
            if h:
                poly[(j, k)] = poly.get((j, k), 0) + w * h
    return {key: c for key, c in poly.items() if c}


def _fix_x(poly: Poly2, x: Fraction) -> Poly1:
    deg_u = max((k for _, k in poly), default=0)
    out = [Fraction(0)] * (deg_u + 1)
    for (i, k), c in poly.items():
        out[k] += c * x**i
    return out


def xn_step_bound(problem: ContractionProblem, x) -> Fraction:
    """Upper bound on ``x_{n+1}`` given ``x_n = x``, maximised over ``z in [0, x]``."""
    x = as_rational(x)
    if not 0 <= x <= 1 - Fraction(1, problem.q):
        raise ValueError(f"x={x} outside [0, 1 - 1/q]")
    poly = step_polynomial(problem.q, problem.lam, problem.degree)
    return max_on_unit_interval(_fix_x(poly, x)).value


def xn_step_bound_per_term(problem: ContractionProblem, x) -> Fraction:
    """Looser variant: every j-term maximised over ``z`` on its own."""
    x = as_rational(x)
    lam = problem.lam
    total = problem.d_bar * lam**2 * x
    for j in range(2, problem.d_max + 1):
        w = problem.degree.binomial_moment(j) * lam ** (2 * j)
        if w:
            h = max_on_unit_interval(_term_coefficients(problem.q, lam, j)).value
            total += w * h * x**j
    return total


def corollary_bound(case: int, x, lam=None) -> Fraction:
    """Closed-form q=3 bounds: 1 (d=2), 2 (d=3), 3 (d=2 or 3 w.p. 1/2), 4 (d=3, lambda=-1/2)."""
    x = as_rational(x)
    if case == 4:
        return Fraction(3, 4) * x + Fraction(63, 32) * x**2 - Fraction(351, 256) * x**3
    if case not in (1, 2, 3):
        raise ValueError(f"case must be 1..4, got {case}")
    if lam is None:
        raise ValueError(f"case {case} needs lambda")
    lam = as_rational(lam)
    quad = lam**4 * x**2 * (2 * lam**2 + 4 * lam + 1)
    cubic = lam**6 * x**3 * (1 + lam) ** 3
    if case == 1:
        return 2 * lam**2 * x + Fraction(3, 2) * quad
    if case == 2:
        return 3 * lam**2 * x + Fraction(9, 2) * quad - Fraction(9, 2) * cubic
    return Fraction(5, 2) * lam**2 * x + 3 * quad - Fraction(9, 4) * cubic


# -- certification --------------------------------------------------------------


@dataclass(frozen=True)
class SubintervalBound:
    lo: Fraction
    hi: Fraction
    bound: Fraction
    argmax_u: Fraction
    exact: bool


@dataclass(frozen=True)
class Certificate:
    problem: ContractionProblem
    certified: bool
    factor: Fraction
    subintervals: int
    audit: tuple[SubintervalBound, ...] = ()
    naive_factor: Fraction | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def status(self) -> str:
        return "certified" if self.certified else "not-certified"

    def report(self) -> str:
        p = self.problem
        atoms = ", ".join(f"({d}, {format_rational(w)})" for d, w in p.degree.atoms)
        lines = [
            f"status: {self.status}",
            f"q: {p.q}",
            f"lambda: {format_rational(p.lam)}",
            f"degree: [{atoms}]",
            f"x_hat: {format_rational(p.x_hat)} ({decimal_string(p.x_hat)})",
            f"subintervals: {self.subintervals}",
            f"C: {format_rational(self.factor)} ({decimal_string(self.factor)})",
        ]
        if self.naive_factor is not None:
            lines.append(f"naive C: {format_rational(self.naive_factor)} ({decimal_string(self.naive_factor)})")
        lines += [f"note: {n}" for n in self.notes]
        if self.audit:
            lines.append("# lo_dec,hi_dec,bound_dec,argmax_u(z=u*x),exact,bound")
            for s in self.audit:
                lines.append(
                    f"{decimal_string(s.lo)},{decimal_string(s.hi)},{decimal_string(s.bound)},"
                    f"{format_rational(s.argmax_u)},{'yes' if s.exact else 'upper'},{format_rational(s.bound)}"
                )
        return "\n".join(lines) + "\n"


def ratio_polynomial(problem: ContractionProblem) -> Poly2:
    """``R(x, u) / x`` as ``{(i, k): c}``."""
    return {(i - 1, k): c for (i, k), c in step_polynomial(problem.q, problem.lam, problem.degree).items()}


def subinterval_bound(ratio: Poly2, lo: Fraction, hi: Fraction) -> SubintervalBound:
    """Upper bound on ``ratio(x, u)`` over ``[lo, hi] x [0, 1]``."""
    deg_u = max(k for _, k in ratio)
    g = [Fraction(0)] * (deg_u + 1)
    for (i, k), c in ratio.items():
        g[k] += c * (hi**i if c > 0 else lo**i)
    m = max_on_unit_interval(g)
    return SubintervalBound(lo, hi, m.value, m.argmax, m.exact)


def naive_contraction_bound(problem: ContractionProblem) -> Fraction:
    """Triangle-inequality bound: every coefficient in absolute value at ``x_hat``."""
    ratio = ratio_polynomial(problem)
    return sum((abs(c) * problem.x_hat**i for (i, _), c in ratio.items()), Fraction(0))


def certify_contraction(problem: ContractionProblem, m: int = DEFAULT_SUBINTERVALS) -> Certificate:
    if m < 1:
        raise ValueError("need at least one subinterval")
    x_hat = problem.x_hat
    if x_hat == 0:
        return Certificate(problem, True, Fraction(0), m, notes=("x_hat = 0: x_n vanishes already",))
    ratio = ratio_polynomial(problem)
    audit = tuple(subinterval_bound(ratio, x_hat * s / m, x_hat * (s + 1) / m) for s in range(m))
    factor = max(s.bound for s in audit)
    return Certificate(
        problem,
        factor < 1,
        factor,
        m,
        audit,
        naive_contraction_bound(problem),
    )


# -- reference thresholds -------------------------------------------------------


@dataclass(frozen=True)
class Enclosure:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty enclosure")

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= as_rational(x) <= self.hi

    def truncated(self, digits: int = 4) -> str:
        """Common decimal prefix of both ends, written like ``0.7071..``."""
        scale = 10**digits
        lo = math.floor(self.lo * scale)
        if lo != math.floor(self.hi * scale) and not (self.hi * scale == lo + 1):
            raise ValueError("enclosure too wide for the requested digits")
        whole, frac = divmod(lo, scale)
        return f"{whole}.{frac:0{digits}d}.."


def sqrt_enclosure(r: Fraction, width: Fraction = ENCLOSURE_WIDTH) -> Enclosure:
    """Rational bracket of ``sqrt(r)``, exact when ``r`` is a rational square."""
    r = as_rational(r)
    if r < 0:
        raise ValueError("negative radicand")
    n, d = r.numerator, r.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Enclosure(Fraction(rn, rd), Fraction(rn, rd))
    scale = math.ceil(1 / width)
    lo = math.isqrt(n * scale * scale // d)
    return Enclosure(Fraction(lo, scale), Fraction(lo + 1, scale))


def ks_bound(degree: DegreeDistribution) -> Enclosure:
    """Positive lambda with ``d_bar * lambda^2 = 1``."""
    d = degree.mean
    if d <= 1:
        raise ValueError("mean degree must exceed 1")
    return sqrt_enclosure(1 / d)


def mp_bound(q: int, degree: DegreeDistribution) -> Enclosure:
    """Positive root of ``d q lambda^2 - (q - 2) lambda - 2 = 0``."""
    d = degree.mean
    if d <= 1:
        raise ValueError("mean degree must exceed 1")
    if q < 2:
        raise ValueError("q must be >= 2")
    disc = (q - 2) ** 2 + 8 * d * q
    root = sqrt_enclosure(disc, ENCLOSURE_WIDTH * d * q)
    denom = 2 * d * q
    return Enclosure((q - 2 + root.lo) / denom, (q - 2 + root.hi) / denom)


# -- engine + certificate -------------------------------------------------------


def end_to_end_certify(model, schedule, m: int = DEFAULT_SUBINTERVALS, *, workers: int = 1, stop_early: bool = True):
    """Run the survey engine and certify contraction from its ``x_bound``.

    Returns ``(certificate, run_result)``. With ``stop_early`` the run ends at
    the first iteration whose bound already certifies.
    """
    from .engine import run

    if model.lam is None or not model.symmetric:
        raise ValueError("end-to-end certification needs a symmetric Potts model")
    levels = model.levels if isinstance(model.levels, tuple) else (model.levels,)
    if len(levels) != 1:
        raise ValueError("end-to-end certification needs a stationary model")
    base = ContractionProblem(model.q, model.lam, levels[0].degree, Fraction(0))

    def stop(it, survey, trace):
        # d_bar * lambda^2 >= 1 can never certify; skip the work
        if not stop_early or base.d_bar * base.lam**2 >= 1:
            return False
        return certify_contraction(base.with_x_hat(trace.final.x_bound), m).certified

    result = run(model, schedule, workers=workers, stop=stop)
    return certify_contraction(base.with_x_hat(result.trace.final.x_bound), m), result
