"""Survey-level recursion for random tree MRFs and bound extraction.

Each iteration pushes the current survey one level up the tree (one
``survey_step`` per degree/potential instantiation, mixed by probability),
re-surveys onto the scheduled skeleton once the support exceeds the cap,
and rounds weights to a bounded denominator in symmetric mode.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement, product
from typing import Sequence

from .core import (
    BudgetExceeded,
    DegreeDistribution,
    LevelSpec,
    ModelContradiction,
    PotentialMatrix,
    ProbVec,
    SymmetryGroup,
    VectorDistribution,
    decimal_string,
    g_sq,
    g_tv,
    potts_channel,
    uniform_over_basis,
)
from .skeleton import Skeleton, Survey, mix, resurvey, round_survey

log = logging.getLogger(__name__)

DEFAULT_TUPLE_BUDGET = 5_000_000


@dataclass(frozen=True)
class ModelSpec:
    q: int
    levels: LevelSpec | tuple[LevelSpec, ...]
    symmetric: bool = False
    symmetry: SymmetryGroup | None = None
    lam: Fraction | None = None  # Potts models only

    def __post_init__(self):
        levels = self.levels if isinstance(self.levels, tuple) else (self.levels,)
        for lv in levels:
            for psi, _ in lv.potentials:
                if psi.shape != (self.q, self.q):
                    raise ValueError("potential shape does not match q")
        if self.symmetric:
            sym = self.symmetry or SymmetryGroup.full(self.q)
            for lv in levels:
                for psi, _ in lv.potentials:
                    if not all(psi.is_symmetric_under(g) for g in sym.generators):
                        raise ValueError("symmetric model needs permutation-invariant potentials")
            object.__setattr__(self, "symmetry", sym)

    @classmethod
    def potts(cls, q: int, lam, degree: DegreeDistribution) -> "ModelSpec":
        ch = potts_channel(q, lam)
        return cls(q, LevelSpec.single(degree, ch.matrix), symmetric=True, lam=ch.lam)

    def level(self, depth: int) -> LevelSpec:
        """Level spec used to build a tree of ``depth`` from depth ``depth - 1``."""
        if isinstance(self.levels, LevelSpec):
            return self.levels
        idx = depth - 2
        if not 0 <= idx < len(self.levels):
            raise ValueError(f"no level spec for depth {depth}")
        return self.levels[idx]


@dataclass(frozen=True)
class Schedule:
    iterations: int
    plan: tuple[tuple[int, Skeleton], ...] = ()
    rounding: int | None = None
    support_cap: int | None = None
    tuple_budget: int = DEFAULT_TUPLE_BUDGET

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        plan = tuple(sorted(self.plan, key=lambda e: e[0]))
        object.__setattr__(self, "plan", plan)
        if plan and plan[0][0] > 1:
            raise ValueError("skeleton plan must cover iteration 1")
        if self.support_cap is not None and not plan:
            raise ValueError("a support cap needs a skeleton plan")
        if self.rounding is not None and self.rounding < 1:
            raise ValueError("rounding denominator N must be >= 1")
        if self.support_cap is not None and plan and self.support_cap < plan[0][1].q:
            raise ValueError("support cap b must be at least q")

    def skeleton_at(self, iteration: int) -> Skeleton | None:
        current = None
        for start, skel in self.plan:
            if start <= iteration:
                current = skel
        return current


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    support: int
    x_bound: Fraction
    tv_bound: Fraction


@dataclass
class BoundTrace:
    records: list[TraceRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        if len(self.records) >= 2 and rec.x_bound > self.records[-1].x_bound:
            msg = f"x_bound increased at iteration {rec.iteration} (skeleton too coarse?)"
            self.warnings.append(msg)
            log.warning(msg)
        self.records.append(rec)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def to_csv(self, header_comment: str | None = None) -> str:
        lines = []
        if header_comment:
            lines.append(f"# {header_comment}")
        lines.append("iter,support,x_num,x_den,x_dec,tv_num,tv_den,tv_dec")
        for r in self.records:
            lines.append(
                f"{r.iteration},{r.support},{r.x_bound.numerator},{r.x_bound.denominator},"
                f"{decimal_string(r.x_bound)},{r.tv_bound.numerator},{r.tv_bound.denominator},"
                f"{decimal_string(r.tv_bound)}"
            )
        return "\n".join(lines) + "\n"


def x_bound(survey: VectorDistribution, q: int | None = None) -> Fraction:
    """Upper bound on ``x_n``: the survey expectation of ``g_sq``."""
    q = survey.q if q is None else q
    return survey.expect(lambda v: g_sq(v, q))


def tv_bound(survey: VectorDistribution, pi: Sequence[Fraction] | None = None) -> Fraction:
    pi = ProbVec.uniform(survey.q) if pi is None else pi
    return survey.expect(lambda v: g_tv(v, pi))


def root_marginal(survey: VectorDistribution) -> ProbVec:
    return survey.mean()


def base_survey(q: int) -> Survey:
    return Survey._trusted(uniform_over_basis(q), None)


def _multinomial(counts) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def count_tuples(children: Sequence[VectorDistribution], potentials: Sequence[PotentialMatrix]) -> int:
    groups = Counter((id(c), p) for c, p in zip(children, potentials))
    sizes = {id(c): len(c) for c in children}
    total = 1
    for (cid, _), r in groups.items():
        total *= math.comb(sizes[cid] + r - 1, r)
    return total


def survey_step(
    children: Sequence[VectorDistribution],
    potentials: Sequence[PotentialMatrix],
    budget: int | None = DEFAULT_TUPLE_BUDGET,
) -> Survey:
    """Apply the residual recursion to (surveys of) independent children.

    Identical ``(child, potential)`` pairs are enumerated as multisets with
    multinomial weights, which gives the same result as ordered tuples.
    """
    if len(children) != len(potentials) or not children:
        raise ValueError("need equally many (>= 1) children and potentials")
    if budget is not None:
        n = count_tuples(children, potentials)
        if n > budget:
            raise BudgetExceeded(f"{n} child tuples exceed the budget of {budget}")
    q = potentials[0].shape[0]
    groups: dict[tuple[int, PotentialMatrix], list] = {}
    for child, psi in zip(children, potentials):
        key = (id(child), psi)
        if key not in groups:
            msgs = [(psi.message(v), w) for v, w in child.support]
            groups[key] = [msgs, 0]
        groups[key][1] += 1

    per_group = []
    for msgs, r in groups.values():
        options = []
        for combo in combinations_with_replacement(range(len(msgs)), r):
            f = list(msgs[combo[0]][0])
            w = msgs[combo[0]][1]
            for idx in combo[1:]:
                m, wi = msgs[idx]
                for a in range(q):
                    f[a] *= m[a]
                w *= wi
            if r > 1:
                w *= _multinomial(Counter(combo).values())
            options.append((f, w))
        per_group.append(options)

    acc: dict[ProbVec, Fraction] = {}
    for parts in product(*per_group):
        f = list(parts[0][0])
        w = parts[0][1]
        for g, wg in parts[1:]:
            for a in range(q):
                f[a] *= g[a]
            w *= wg
        norm = sum(f)
        if norm == 0:
            continue
        eta = ProbVec.trusted(tuple(x / norm for x in f))
        acc[eta] = acc.get(eta, 0) + w * norm
    total = sum(acc.values())
    if total == 0:
        raise ModelContradiction("every child combination is inconsistent")
    return Survey._trusted({v: w / total for v, w in acc.items()}, None)


def level_step(
    child: VectorDistribution,
    level: LevelSpec,
    symmetry: SymmetryGroup | None = None,
    budget: int | None = DEFAULT_TUPLE_BUDGET,
) -> Survey:
    """Mix ``survey_step`` outputs over every degree / potential instantiation."""
    degree = level.degree
    if degree.tail and symmetry is None:
        raise ValueError("degree tail mass needs the trivial survey, which requires symmetry")
    outs, probs = [], []
    pots = level.potentials
    for r, pr in degree.atoms:
        for choice in combinations_with_replacement(range(len(pots)), r):
            p = pr * _multinomial(Counter(choice).values())
            for i in choice:
                p *= pots[i][1]
            outs.append(survey_step([child] * r, [pots[i][0] for i in choice], budget))
            probs.append(p)
    if degree.tail:
        outs.append(base_survey(child.q))
        probs.append(degree.tail)
    if len(outs) == 1:
        return outs[0]
    return mix(outs, probs)


@dataclass
class RunResult:
    trace: BoundTrace
    survey: Survey
    iterations: int


def run(
    model: ModelSpec,
    schedule: Schedule,
    *,
    workers: int = 1,
    stop=None,
) -> RunResult:
    """Iterate the survey recursion from the single-vertex base case.

    ``stop(iteration, survey, trace)`` may end the run early by returning True.
    """
    q = model.q
    sym = model.symmetry if model.symmetric else None
    if schedule.rounding is not None and sym is None:
        raise ValueError("rounding requires a symmetric model")
    survey: Survey = base_survey(q)
    pi = ProbVec.uniform(q)
    trace = BoundTrace()
    trace.append(TraceRecord(0, len(survey), x_bound(survey, q), tv_bound(survey, pi)))
    done = 0
    for it in range(1, schedule.iterations + 1):
        survey = level_step(survey, model.level(it + 1), sym, schedule.tuple_budget)
        cap = schedule.support_cap
        if cap is not None and len(survey) > cap:
            skel = schedule.skeleton_at(it)
            skel.prefetch(survey, workers)
            survey = resurvey(survey, skel)
        if schedule.rounding is not None:
            survey = round_survey(survey, schedule.rounding, sym)
        trace.append(TraceRecord(it, len(survey), x_bound(survey, q), tv_bound(survey, pi)))
        done = it
        log.info("iteration %d: support %d, x_bound %s", it, len(survey), decimal_string(trace.final.x_bound))
        if stop is not None and stop(it, survey, trace):
            break
    return RunResult(trace, survey, done)
