from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import distributions, prob_vecs, symmetric_distributions
from survey_recon.core import ProbVec, SymmetryGroup, VectorDistribution, g_sq, g_tv
from survey_recon.skeleton import (
    Skeleton,
    Survey,
    decompose,
    make_basis_skeleton,
    make_grid_skeleton,
    make_scaled_grid_skeleton,
    make_star_skeleton,
    mix,
    parse_skeleton_text,
    resurvey,
    round_survey,
    survey_of,
)

F = Fraction
SYM3 = SymmetryGroup.full(3)


def hull_skeletons(q):
    return st.sampled_from(
        [
            make_basis_skeleton(q),
            make_grid_skeleton(q, 2),
            make_grid_skeleton(q, 3),
            make_star_skeleton(q, [F(1, 2), F(1, 4)]),
            make_scaled_grid_skeleton(q, 2, F(1, 3)),
        ]
    )


class TestDecompose:
    def test_base_point_is_its_own_decomposition(self):
        skel = make_grid_skeleton(3, 2)
        s = skel.base_set[2]
        assert decompose(s, skel) == ((2, 1),)

    def test_barycentric_on_basis(self):
        skel = make_basis_skeleton(3)
        eta = ProbVec((F(1, 2), F(1, 4), F(1, 4)))
        dec = dict(decompose(eta, skel))
        assert [dec.get(skel.index[ProbVec.basis(3, a)], 0) for a in range(3)] == list(eta)

    def test_segment_instance(self):
        skel = Skeleton([(1, 0), (0, 1), (F(1, 2), F(1, 2))])
        assert decompose(ProbVec((F(1, 4), F(3, 4))), skel) == ((1, F(1, 2)), (2, F(1, 2)))

    def test_outside_hull(self):
        skel = Skeleton([(F(1, 2), F(1, 2)), (1, 0)])
        with pytest.raises(ValueError, match="hull"):
            decompose(ProbVec((0, 1)), skel)

    @given(st.integers(2, 4).flatmap(lambda q: st.tuples(hull_skeletons(q), prob_vecs(q))))
    def test_exact_convex_decomposition(self, skel_eta):
        skel, eta = skel_eta
        dec = skel.decompose(eta)
        assert all(c > 0 for _, c in dec)
        assert sum(c for _, c in dec) == 1
        assert tuple(sum(c * skel.base_set[i][a] for i, c in dec) for a in range(skel.q)) == eta

    @given(prob_vecs(3))
    def test_equivariant_costs_match_plain_lp(self, eta):
        sym = make_grid_skeleton(3, 3)
        plain = Skeleton(sym.base_set)
        cost = lambda sk: sum(c * g_tv(sk.base_set[i], eta) for i, c in sk.decompose(eta))
        assert cost(sym) == cost(plain)

    @given(prob_vecs(3), st.sampled_from(list(permutations(range(3)))))
    def test_symmetric_mode_is_equivariant(self, eta, perm):
        skel = make_grid_skeleton(3, 4)
        moved = {skel.base_set[i].permuted(perm): c for i, c in skel.decompose(eta)}
        direct = {skel.base_set[i]: c for i, c in skel.decompose(eta.permuted(perm))}
        assert moved == direct


class TestSurveys:
    def test_support_on_base_points_is_identity(self):
        skel = make_grid_skeleton(3, 2)
        dist = VectorDistribution({skel.base_set[0]: F(1, 3), skel.base_set[4]: F(2, 3)})
        assert survey_of(dist, skel) == dist

    def test_uniform_point_mass_onto_basis(self):
        s = survey_of(VectorDistribution({ProbVec.uniform(3): 1}), make_basis_skeleton(3))
        assert s == VectorDistribution({ProbVec.basis(3, a): F(1, 3) for a in range(3)})

    @given(symmetric_distributions(3))
    def test_symmetric_law_onto_basis_is_trivial_survey(self, dist):
        s = survey_of(dist, make_basis_skeleton(3))
        assert s == VectorDistribution({ProbVec.basis(3, a): F(1, 3) for a in range(3)})

    @given(st.integers(2, 3).flatmap(lambda q: st.tuples(distributions(q), hull_skeletons(q), hull_skeletons(q))))
    def test_mean_preserved(self, args):
        dist, k1, k2 = args
        s1 = survey_of(dist, k1)
        assert s1.total_weight() == 1 and s1.mean() == dist.mean()
        assert resurvey(s1, k2).mean() == dist.mean()
        assert resurvey(s1, k1) == s1

    @given(st.integers(2, 3).flatmap(lambda q: st.tuples(distributions(q), hull_skeletons(q))))
    def test_convex_functionals_dominated(self, args):
        dist, skel = args
        s = survey_of(dist, skel)
        u = ProbVec.uniform(dist.q)
        assert s.expect(g_sq) >= dist.expect(g_sq)
        assert s.expect(lambda v: g_tv(v, u)) >= dist.expect(lambda v: g_tv(v, u))
        assert s.expect(lambda v: 3 * v[0] - v[-1]) == dist.expect(lambda v: 3 * v[0] - v[-1])

    @given(st.integers(2, 3).flatmap(lambda q: st.tuples(distributions(q), hull_skeletons(q), hull_skeletons(q))))
    def test_transitivity_matches_composed_decomposition(self, args):
        dist, k1, k2 = args
        composed = {}
        for eta, w in dist.items():
            for j, a in k1.decompose(eta):
                for i, b in k2.decompose(k1.base_set[j]):
                    s = k2.base_set[i]
                    composed[s] = composed.get(s, 0) + w * a * b
        assert resurvey(survey_of(dist, k1), k2) == VectorDistribution(composed)

    def test_mix_with_itself(self):
        s = survey_of(VectorDistribution({ProbVec((F(1, 3), F(2, 3))): 1}), make_grid_skeleton(2, 2))
        assert mix([s, s], [F(1, 2), F(1, 2)]) == s

    def test_mix_point_masses(self):
        e1 = Survey({ProbVec.basis(2, 0): 1})
        e2 = Survey({ProbVec.basis(2, 1): 1})
        assert mix([e1, e2], [F(1, 2), F(1, 2)]) == VectorDistribution({ProbVec.basis(2, 0): F(1, 2), ProbVec.basis(2, 1): F(1, 2)})

    @given(distributions(3), distributions(3), st.integers(0, 6))
    def test_mix_mean_is_weighted_mean(self, a, b, k):
        p = F(k, 6)
        m = mix([a, b], [p, 1 - p])
        assert m.mean() == tuple(p * x + (1 - p) * y for x, y in zip(a.mean(), b.mean()))

    def test_mix_rejects_bad_probabilities(self):
        e1 = Survey({ProbVec.basis(2, 0): 1})
        with pytest.raises(ValueError):
            mix([e1, e1], [F(1, 2), F(1, 3)])

    @given(symmetric_distributions(3), hull_skeletons(3))
    def test_orbit_constancy_preserved(self, dist, skel):
        assert survey_of(dist, skel).is_orbit_constant(SYM3)


class TestRounding:
    def test_already_on_grid_unchanged(self):
        s = Survey({ProbVec.basis(2, 0): F(1, 4), ProbVec.basis(2, 1): F(1, 4), ProbVec((F(1, 3), F(2, 3))): F(1, 4), ProbVec((F(2, 3), F(1, 3))): F(1, 4)})
        assert round_survey(s, 4, SymmetryGroup.full(2)) == s

    def test_orbit_pair_example(self):
        s_, s2 = ProbVec((F(1, 3), F(2, 3))), ProbVec((F(2, 3), F(1, 3)))
        e1, e2 = ProbVec.basis(2, 0), ProbVec.basis(2, 1)
        s = Survey({s_: F(3, 8), s2: F(3, 8), e1: F(1, 8), e2: F(1, 8)})
        assert round_survey(s, 4, SymmetryGroup.full(2)) == VectorDistribution({s_: F(1, 4), s2: F(1, 4), e1: F(1, 4), e2: F(1, 4)})

    def test_refuses_asymmetric(self):
        s = Survey({ProbVec((F(1, 3), F(2, 3))): 1})
        with pytest.raises(ValueError, match="orbits"):
            round_survey(s, 4, SymmetryGroup.full(2))
        with pytest.raises(ValueError):
            round_survey(s, 4, None)

    @given(symmetric_distributions(3), st.integers(1, 50))
    def test_rounded_is_survey_with_bounded_denominators(self, dist, n):
        r = round_survey(dist, n, SYM3)
        assert r.total_weight() == 1
        assert r.mean() == ProbVec.uniform(3)
        assert all((3 * n) % w.denominator == 0 for _, w in r.items())
        assert all(n % w.denominator == 0 for v, w in r.items() if not v.is_basis())
        assert r.expect(g_sq) >= dist.expect(g_sq)
        assert r.is_orbit_constant(SYM3)


class TestGenerators:
    def test_grid_counts(self):
        assert set(make_grid_skeleton(2, 2)) == {ProbVec((1, 0)), ProbVec((F(1, 2), F(1, 2))), ProbVec((0, 1))}
        assert len(make_grid_skeleton(3, 3)) == 10
        assert len(make_grid_skeleton(3, 18)) == 190

    def test_star_unit_radius(self):
        star = make_star_skeleton(3, [1])
        assert set(star) == {ProbVec.basis(3, a) for a in range(3)} | {ProbVec.uniform(3)}

    def test_star_rejects_radius(self):
        with pytest.raises(ValueError):
            make_star_skeleton(3, [0])

    def test_scaled_grid_covers_simplex(self):
        z = make_scaled_grid_skeleton(3, 4, F(1, 5))
        assert z.covers_simplex and z.symmetric

    def test_symmetric_skeleton_must_be_closed(self):
        with pytest.raises(ValueError, match="closed"):
            Skeleton([(1, 0, 0), (0, 1, 0), (0, 0, 1), (F(1, 2), F(1, 2), 0)], symmetric=True)

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            Skeleton([(1, 0), (1, 0)])


class TestSkeletonFiles:
    def test_round_trip(self):
        skel = make_star_skeleton(3, [F(1, 2)])
        back = parse_skeleton_text(skel.to_text(), symmetric=True)
        assert back.base_set == skel.base_set

    def test_comment_and_errors(self):
        with pytest.raises(ValueError, match="line 3"):
            parse_skeleton_text("# header\n1 0\n1/2 1/3\n")
        with pytest.raises(ValueError, match="line 2"):
            parse_skeleton_text("1 0\nx y\n")
