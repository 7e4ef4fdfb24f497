"""Hypothesis strategies and small builders shared by the test modules."""
from fractions import Fraction
from itertools import permutations

from hypothesis import strategies as st

from survey_recon.core import PotentialMatrix, ProbVec, VectorDistribution


def rationals(lo=0, hi=1, max_den=12):
    return st.builds(
        lambda n, d: Fraction(lo) + (Fraction(hi) - Fraction(lo)) * Fraction(n % (d + 1), d),
        st.integers(0, 10**6),
        st.integers(1, max_den),
    )


@st.composite
def prob_vecs(draw, q, max_den=12):
    raw = draw(st.lists(st.integers(0, max_den), min_size=q, max_size=q).filter(any))
    total = sum(raw)
    return ProbVec(Fraction(x, total) for x in raw)


@st.composite
def distributions(draw, q, max_size=5, max_den=12):
    vecs = draw(st.lists(prob_vecs(q, max_den), min_size=1, max_size=max_size, unique=True))
    ws = draw(st.lists(st.integers(1, 9), min_size=len(vecs), max_size=len(vecs)))
    return VectorDistribution(zip(vecs, ws), normalize=True)


@st.composite
def symmetric_distributions(draw, q, max_orbits=4, max_den=12):
    """Orbit-constant distributions: every colour permutation of a support point shares its weight."""
    seeds = draw(st.lists(prob_vecs(q, max_den), min_size=1, max_size=max_orbits))
    acc = {}
    for s in seeds:
        w = Fraction(draw(st.integers(1, 9)))
        orbit = {s.permuted(p) for p in permutations(range(q))}
        for v in orbit:
            acc[v] = acc.get(v, 0) + w / len(orbit)
    return VectorDistribution(acc, normalize=True)


@st.composite
def potentials(draw, q, max_entry=5):
    rows = draw(
        st.lists(
            st.lists(st.integers(0, max_entry), min_size=q, max_size=q).filter(any),
            min_size=q,
            max_size=q,
        )
    )
    return PotentialMatrix(tuple(tuple(Fraction(x) for x in r) for r in rows))


def potts_lambdas(q):
    return rationals(Fraction(-1, q - 1), 1, max_den=10)
