"""Removable points against a regular codimension-3 set.

Cutting a small ball of radius eps out of B_1 and taking the maximal
solution on what is left, the values on the window 1/4 <= r <= 1/2 settle
as eps shrinks: an isolated point is invisible to the equation.  Around a
flat codimension-3 set in dimension 9 (regular for sigma_2) the solution
near the set instead grows like eps^(-(n-2)/2).
Run: ``python demos/punctured_ball.py`` (about a minute).
"""
from lnlab.cone import CurvatureFunction
from lnlab.solver import cylinder_contrast, exhaust_punctured


def main():
    schedule = (1e-1, 1e-2, 1e-3, 2e-4, 1e-4)
    for n, ell in ((3, 1), (4, 1)):
        rep = exhaust_punctured(1.0, CurvatureFunction(n, ell), schedule)
        print(f"punctured ball, n={n} sigma_{ell}")
        for e, v in zip(rep.eps, rep.window_values):
            print(f"  eps={e:<7g} window sup {v:.10f}")
        print(f"  relative change over the last halving: {rep.changes[-1]:.2e}\n")

    rep = cylinder_contrast(CurvatureFunction(9, 2), 3, (1e-2, 1e-3, 1e-4))
    print("codimension-3 slab, n=9 sigma_2: u(2 eps)")
    for e, v in zip(rep.eps, rep.window_values):
        print(f"  eps={e:<7g} u={v:.6e}")
    print("  growth ratio / eps^(-7/2) prediction - 1:", ", ".join(f"{c:.1e}" for c in rep.changes))


if __name__ == "__main__":
    main()
