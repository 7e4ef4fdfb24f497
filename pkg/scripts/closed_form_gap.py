"""Compare the exact one-step bound with the q=3 closed-form polynomials.

Cases 1 and 4 agree identically; cases 2 and 3 (d=3, mixed) do not, and the
printout shows by how much the closed form overshoots.
"""

from fractions import Fraction

from survey_recon.core import DegreeDistribution
from survey_recon.potts_certify import ContractionProblem, corollary_bound, xn_step_bound, xn_step_bound_per_term

CASES = {
    1: (DegreeDistribution.point(2), Fraction(69, 100)),
    2: (DegreeDistribution.point(3), Fraction(555, 1000)),
    3: (DegreeDistribution(((2, Fraction(1, 2)), (3, Fraction(1, 2)))), Fraction(61, 100)),
    4: (DegreeDistribution.point(3), Fraction(-1, 2)),
}


def main():
    print("case,lambda,x,joint,per_term,closed_form,closed_minus_joint")
    for case, (degree, lam) in CASES.items():
        p = ContractionProblem(3, lam, degree, 0)
        for x in (Fraction(1, 100), Fraction(1, 20), Fraction(1, 5), Fraction(1, 2)):
            joint = xn_step_bound(p, x)
            per_term = xn_step_bound_per_term(p, x)
            closed = corollary_bound(case, x, None if case == 4 else lam)
            print(f"{case},{lam},{x},{float(joint):.10g},{float(per_term):.10g},{float(closed):.10g},{float(closed - joint):.3g}")


if __name__ == "__main__":
    main()
