"""Maximal solutions on a ball and an annulus.

On the unit ball the Perron sweep should land on the closed-form solution.
On an annulus there is no closed form, but near each boundary sphere
``dist^((n-2)/2) u`` must approach the universal constant from
``boundary_limit``.  Run: ``python demos/ball_and_annulus.py``.
"""
import numpy as np

from lnlab.canonical import ball_solution, boundary_limit
from lnlab.cone import CurvatureFunction
from lnlab.domain import annulus, ball
from lnlab.solver import ceiling_ratio, perron_sweep


def main():
    print("ball of radius 1: sweep against the closed form on |x| <= 0.9")
    for n in (3, 4, 5):
        for ell in (1, 2):
            f = CurvatureFunction(n, ell)
            p, rep = perron_sweep(ball(1.0), f)
            sel = p.mesh <= 0.9
            err = np.max(np.abs(p.u[sel] / ball_solution(f).radial(p.mesh[sel]) - 1))
            print(f"  n={n} sigma_{ell}: {len(rep.sweep_history)} sweep steps, "
                  f"c_final={p.meta['c_final']:.3g}, rel. error {err:.2e}")

    print("\nannulus 0.5 < r < 1: fitted blow-up coefficient at each sphere")
    for n, ell in ((3, 1), (4, 1), (4, 2)):
        f = CurvatureFunction(n, ell)
        p, rep = perron_sweep(annulus(0.5, 1.0), f)
        target = boundary_limit(f)
        left, right = rep.rate["left"]["coefficient"], rep.rate["right"]["coefficient"]
        print(f"  n={n} sigma_{ell}: target {target:.6f}  inner {left:.6f}  outer {right:.6f}  "
              f"ceiling ratio {ceiling_ratio(p):.3f}")


if __name__ == "__main__":
    main()
