from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import potentials, potts_lambdas
from survey_recon.core import (
    BudgetExceeded,
    DegreeDistribution,
    LevelSpec,
    PotentialMatrix,
    ProbVec,
    SymmetryGroup,
    g_sq,
    potts_channel,
    uniform_over_basis,
)
from survey_recon.engine import (
    BoundTrace,
    ModelSpec,
    Schedule,
    TraceRecord,
    base_survey,
    level_step,
    root_marginal,
    run,
    survey_step,
    tv_bound,
    x_bound,
)
from survey_recon.oracle import ResidualDistribution, TreeInstance, brute_force_residual, residual_exact, residual_of_tree
from survey_recon.skeleton import Skeleton, Survey, make_grid_skeleton, make_star_skeleton, mix

F = Fraction


def potts_model(q, lam, degree):
    return ModelSpec.potts(q, lam, degree if isinstance(degree, DegreeDistribution) else DegreeDistribution.point(degree))


class TestSurveyStep:
    @given(st.integers(2, 3).flatmap(lambda q: st.tuples(potentials(q, 3), potentials(q, 3))))
    def test_natural_supports_reproduce_exact_recursion(self, pots):
        p1, p2 = pots
        q = p1.shape[0]
        child = residual_exact([ResidualDistribution.single_vertex(q)] * 2, [p1, p2])
        as_survey = Survey.from_distribution(child)
        # identical children use the multiset path, distinct potentials the product path
        assert survey_step([as_survey] * 3, [p1] * 3) == residual_exact([child] * 3, [p1] * 3)
        assert survey_step([as_survey] * 3, [p1, p2, p1]) == residual_exact([child] * 3, [p1, p2, p1])

    def test_coloring_two_children(self):
        col = PotentialMatrix.coloring(3)
        out = survey_step([base_survey(3)] * 2, [col, col])
        # 3 equal pairs of norm 2, 6 distinct pairs of norm 1: total 12
        expected = {}
        for i in range(3):
            v = ProbVec(tuple(F(0) if a == i else F(1, 2) for a in range(3)))
            expected[v] = F(2, 12)
        for k in range(3):
            v = ProbVec.basis(3, k)
            expected[v] = F(2, 12)
        assert dict(out.items()) == expected
        assert out == brute_force_residual(TreeInstance.complete(3, 2, 2, col))

    @given(st.integers(1, 9))
    def test_edge_scaling_invariance(self, c):
        psi = potts_channel(3, F(2, 5)).matrix
        child = survey_step([base_survey(3)] * 2, [psi, psi])
        assert survey_step([child] * 2, [psi, psi.scaled(c)]) == survey_step([child] * 2, [psi, psi])

    def test_budget_guard(self):
        child = Survey.from_distribution(residual_of_tree(TreeInstance.complete(3, 2, 3, potts_channel(3, F(1, 2)).matrix)))
        with pytest.raises(BudgetExceeded):
            survey_step([child] * 3, [potts_channel(3, F(1, 2)).matrix] * 3, budget=10)


class TestLevelStep:
    psi = potts_channel(3, F(1, 2)).matrix

    def test_point_mass_is_single_step(self):
        level = LevelSpec.single(DegreeDistribution.point(2), self.psi)
        assert level_step(base_survey(3), level) == survey_step([base_survey(3)] * 2, [self.psi] * 2)

    def test_mixed_degrees(self):
        level = LevelSpec.single(DegreeDistribution(((2, F(1, 2)), (3, F(1, 2)))), self.psi)
        two = survey_step([base_survey(3)] * 2, [self.psi] * 2)
        three = survey_step([base_survey(3)] * 3, [self.psi] * 3)
        assert level_step(base_survey(3), level) == mix([two, three], [F(1, 2), F(1, 2)])

    def test_tail_mass_uses_trivial_survey(self):
        t = F(1, 4)
        level = LevelSpec.single(DegreeDistribution(((2, 1 - t),), tail=t), self.psi)
        sym = SymmetryGroup.full(3)
        two = survey_step([base_survey(3)] * 2, [self.psi] * 2)
        assert level_step(base_survey(3), level, sym) == mix([two, base_survey(3)], [1 - t, t])
        with pytest.raises(ValueError, match="symmetry"):
            level_step(base_survey(3), level, None)

    def test_random_potentials(self):
        other = potts_channel(3, F(-1, 2)).matrix
        level = LevelSpec(DegreeDistribution.point(2), ((self.psi, F(1, 3)), (other, F(2, 3))))
        b = base_survey(3)
        parts = [
            survey_step([b, b], [self.psi, self.psi]),
            survey_step([b, b], [self.psi, other]),
            survey_step([b, b], [other, other]),
        ]
        assert level_step(b, level) == mix(parts, [F(1, 9), F(4, 9), F(4, 9)])


class TestRun:
    def test_zero_iterations(self):
        result = run(potts_model(3, F(1, 2), 2), Schedule(0))
        assert result.trace.final.x_bound == F(2, 3)
        assert result.survey == base_survey(3)

    def test_identity_channel_keeps_basis_survey(self):
        sched = Schedule(5, ((1, make_grid_skeleton(3, 2)),), rounding=1000, support_cap=3)
        trace = run(potts_model(3, 1, 2), sched).trace
        assert all(r.x_bound == F(2, 3) for r in trace.records)

    def test_uniform_channel_erases(self):
        result = run(potts_model(3, 0, 2), Schedule(1))
        assert result.survey == Survey({ProbVec.uniform(3): 1})
        assert result.trace.final.x_bound == 0 and result.trace.final.tv_bound == 0

    @pytest.mark.parametrize("q,d,lam,depth", [(2, 3, F(1, 3), 3), (3, 2, F(1, 2), 4), (3, 2, F(-1, 2), 3)])
    def test_exact_without_skeletons(self, q, d, lam, depth):
        result = run(potts_model(q, lam, d), Schedule(depth - 1))
        tree = TreeInstance.complete(q, d, depth, potts_channel(q, lam).matrix)
        assert result.survey == residual_of_tree(tree)

    def test_asymmetric_model_exact(self):
        psi = PotentialMatrix(((2, 1, 0), (1, 1, 1), (0, 3, 1)))
        model = ModelSpec(3, LevelSpec.single(DegreeDistribution.point(2), psi))
        result = run(model, Schedule(2))
        assert result.survey == residual_of_tree(TreeInstance.complete(3, 2, 3, psi))

    def test_rounding_needs_symmetry(self):
        psi = PotentialMatrix(((2, 1), (1, 1)))
        model = ModelSpec(2, LevelSpec.single(DegreeDistribution.point(2), psi))
        with pytest.raises(ValueError, match="symmetric"):
            run(model, Schedule(1, rounding=10))

    def test_symmetric_model_needs_invariant_potential(self):
        psi = PotentialMatrix(((2, 1), (1, 1)))
        with pytest.raises(ValueError, match="invariant"):
            ModelSpec(2, LevelSpec.single(DegreeDistribution.point(2), psi), symmetric=True)

    def test_fixed_skeleton_bound_non_increasing(self):
        sched = Schedule(12, ((1, make_grid_skeleton(3, 8)),), rounding=10**6, support_cap=45)
        trace = run(potts_model(3, F(3, 5), 2), sched).trace
        xs = [r.x_bound for r in trace.records[1:]]
        assert all(b <= a for a, b in zip(xs, xs[1:]))
        assert not trace.warnings

    def test_schedule_switches_skeleton(self):
        star = make_star_skeleton(3, [F(1, 2), F(1, 4)])
        grid = make_grid_skeleton(3, 6)
        sched = Schedule(6, ((1, star), (4, grid)), rounding=10**6, support_cap=12)
        assert sched.skeleton_at(3) is star and sched.skeleton_at(4) is grid
        result = run(potts_model(3, F(3, 5), 2), sched)
        assert all(v in grid.index for v in result.survey)

    def test_workers_do_not_change_results(self):
        def trace(workers):
            sched = Schedule(5, ((1, make_grid_skeleton(3, 10)),), rounding=10**6, support_cap=30)
            return run(potts_model(3, F(2, 3), 2), sched, workers=workers).trace.records

        assert trace(1) == trace(2)

    def test_stop_callback(self):
        result = run(potts_model(3, F(1, 2), 2), Schedule(10), stop=lambda it, s, tr: it == 2)
        assert result.iterations == 2 and len(result.trace.records) == 3

    def test_schedule_validation(self):
        grid = make_grid_skeleton(3, 2)
        with pytest.raises(ValueError):
            Schedule(3, ((2, grid),))
        with pytest.raises(ValueError):
            Schedule(3, (), support_cap=5)
        with pytest.raises(ValueError):
            Schedule(3, ((1, grid),), support_cap=2)
        with pytest.raises(ValueError):
            Schedule(3, rounding=0)


@settings(max_examples=15)
@given(st.sampled_from([2, 3]).flatmap(lambda q: st.tuples(st.just(q), potts_lambdas(q), st.integers(1, 2), st.integers(3, 8))))
def test_surveyed_bounds_dominate_exact(args):
    q, lam, n, m = args
    skel = make_grid_skeleton(q, m)
    sched = Schedule(n, ((1, skel),), rounding=50, support_cap=q)
    result = run(potts_model(q, lam, 2), sched)
    exact = brute_force_residual(TreeInstance.complete(q, 2, n + 1, potts_channel(q, lam).matrix))
    u = ProbVec.uniform(q)
    assert x_bound(result.survey) >= exact.expect(lambda v: g_sq(v, q))
    assert tv_bound(result.survey, u) >= exact.expect(lambda v: sum(abs(a - b) for a, b in zip(v, u)) / 2)
    assert root_marginal(result.survey) == exact.mean()


class TestTrace:
    def test_csv_format(self):
        tr = BoundTrace()
        tr.append(TraceRecord(0, 3, F(2, 3), F(2, 3)))
        tr.append(TraceRecord(1, 6, F(1, 7), F(1, 8)))
        lines = tr.to_csv("config-sha256 abc").splitlines()
        assert lines[0] == "# config-sha256 abc"
        assert lines[1] == "iter,support,x_num,x_den,x_dec,tv_num,tv_den,tv_dec"
        assert lines[2] == "0,3,2,3,0.666666666667,2,3,0.666666666667"
        assert lines[3] == "1,6,1,7,0.142857142857,1,8,0.125"

    def test_increase_warning(self):
        tr = BoundTrace()
        for it, x in enumerate([F(2, 3), F(1, 3), F(1, 2)]):
            tr.append(TraceRecord(it, 3, x, x))
        assert len(tr.warnings) == 1 and "iteration 2" in tr.warnings[0]

    def test_base_survey(self):
        assert dict(base_survey(3).items()) == uniform_over_basis(3)
        assert x_bound(base_survey(3)) == F(2, 3)
        assert root_marginal(base_survey(3)) == ProbVec.uniform(3)

    def test_point_mass_uniform_bounds(self):
        s = Survey({ProbVec.uniform(3): 1})
        assert x_bound(s) == 0 and tv_bound(s) == 0
