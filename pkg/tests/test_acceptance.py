"""Acceptance suite: one test per criterion.

Run with pytest for a pass/fail line per criterion in the terminal summary,
or as ``python tests/test_acceptance.py`` for the same lines without pytest.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

import _runs  # noqa: E402
from lnlab.canonical import (ball_solution, boundary_limit, exterior_solution,  # noqa: E402
                             kelvin_check)
from lnlab.cone import EXTERIOR, INTERIOR, CurvatureFunction, locate, model_vector  # noqa: E402
from lnlab.domain import DomainSpec1D, annulus, ball, dirichlet, spherical  # noqa: E402
from lnlab.regularity import (barrier_ii_search, regular_certificate_residual,  # noqa: E402
                              threshold_table)
from lnlab.schouten import grid_neg_schouten_eigs, neg_schouten_eigs, sample_grid  # noqa: E402
from lnlab.solver import ceiling_ratio, solve_dirichlet, verify_comparison  # noqa: E402

CANONICAL_SET = [(n, ell) for n in (3, 4, 5, 9) for ell in (1, 2)]
SOLVER_SET = [(n, ell) for n in (3, 4, 5) for ell in (1, 2)]

CRITERIA = {
    1: "canonical residuals",
    2: "ball recovery",
    3: "boundary blow-up constant",
    4: "comparison and monotonicity",
    5: "threshold tables",
    6: "punctured ball and cylinder contrast",
    7: "Kelvin duality",
    8: "barrier certificates",
}


def _on_sphere(rng, n, r):
    d = rng.normal(size=n)
    return r * d / np.linalg.norm(d)


def test_criterion_1_canonical_residuals():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    h = 1e-3
    for n, ell in CANONICAL_SET:
        f = CurvatureFunction(n, ell)
        for sol, radii in ((ball_solution(f, 1.0), (0.05, 0.25, 0.5, 0.75, 0.95, 0.999)),
                           (exterior_solution(f, 1.0), (1.001, 1.05, 1.25, 1.5, 2.0, 4.0, 8.0))):
            for r in radii:
                lam = neg_schouten_eigs(sol.jet(r), spherical(), r, n)
                assert abs(f(lam) - 1.0) < 1e-12, (n, ell, r)
                # the grid error grows like (h / dist)^2 toward the blow-up sphere
                if abs(r - 1.0) < 0.2:
                    continue
                x = _on_sphere(rng, n, r)
                lam = grid_neg_schouten_eigs(sample_grid(sol, x, h), (1,) * n, h)
                assert abs(f(lam) - 1.0) < 1e-4, (n, ell, r)
    assert time.perf_counter() - t0 < 10.0


def test_criterion_2_ball_recovery():
    t0 = time.perf_counter()
    for n, ell in SOLVER_SET:
        f = CurvatureFunction(n, ell)
        p, rep = _runs.ball_sweep(n, ell)
        assert rep.converged
        sel = p.mesh <= 0.9
        err = np.max(np.abs(p.u[sel] / ball_solution(f, 1.0).radial(p.mesh[sel]) - 1.0))
        assert err < 1e-6, (n, ell, err)
    assert time.perf_counter() - t0 < 120.0


def test_criterion_3_boundary_blowup_constant():
    for n, ell in SOLVER_SET:
        target = boundary_limit(CurvatureFunction(n, ell))
        _, rep = _runs.annulus_sweep(n, ell)
        for side in ("left", "right"):
            fitted = rep.rate[side]["coefficient"]
            assert abs(fitted / target - 1.0) < 1e-2, (n, ell, side, fitted, target)


def _dirichlet_ladder(domain_for, f, values):
    # solves on one mesh so that profiles compare node by node
    mesh, profiles = None, []
    for c in values:
        p, rep = solve_dirichlet(domain_for(c), f, mesh=mesh)
        assert rep.converged, (f, c, rep.message)
        mesh = p.mesh
        profiles.append(p)
    return profiles


def test_criterion_4_comparison_and_monotonicity():
    values = 10.0 * 8.0 ** np.arange(10)
    converged = []
    for n, ell in SOLVER_SET:
        f = CurvatureFunction(n, ell)
        for domain_for in (lambda c: annulus(0.5, 1.0, dirichlet(c), dirichlet(c)),
                           lambda c: DomainSpec1D(spherical(), "ball", 0.0, 1.0,
                                                  ball(1.0).left, dirichlet(c))):
            ladder = _dirichlet_ladder(domain_for, f, values)
            # (a) nodewise monotone in c
            for lo, hi in zip(ladder, ladder[1:]):
                assert np.all(hi.u[1:-1] >= lo.u[1:-1] - 1e-8 * (1.0 + lo.u[1:-1])), (n, ell)
            converged += ladder
        converged.append(_runs.ball_sweep(n, ell)[0])
        converged.append(_runs.annulus_sweep(n, ell)[0])
    # (b) larger domains carry smaller maximal solutions
    for n, ell in ((3, 1), (4, 2)):
        for (a0, b0), (a1, b1) in _runs.NESTED_PAIRS:
            small, _ = _runs.annulus_sweep(n, ell, a0, b0)
            big, _ = _runs.annulus_sweep(n, ell, a1, b1)
            assert verify_comparison(small, big), (n, ell, (a0, b0), (a1, b1))
            converged += [small, big]
    # (c) ceiling alpha dist^(-(n-2)/2)
    worst = max(ceiling_ratio(p) for p in converged)
    assert worst <= 1.001, worst


def _gamma2_closed_form(n):
    # largest integer k with k < (n - sqrt(n) + 2)/2, exact on perfect squares
    s = math.isqrt(n)
    root = s if s * s == n else math.sqrt(n)
    return math.ceil((n - root + 2) / 2) - 1


def test_criterion_5_threshold_tables():
    t0 = time.perf_counter()
    rows = {(r.n, r.ell): r for r in threshold_table([1, 2], range(3, 51))}
    elapsed = time.perf_counter() - t0
    for n in range(3, 51):
        assert rows[n, 2].k_star == _gamma2_closed_form(n), n
        assert rows[n, 1].k_star == math.ceil((n + 2) / 2) - 1, n
    assert elapsed < 1.0


def test_criterion_6_punctured_and_contrast():
    for n, ell in ((3, 1), (3, 2), (4, 1), (4, 2)):
        rep = _runs.punctured(n, ell)
        assert rep.eps[-1] == 1e-4 and rep.eps[-2] == 2e-4
        assert rep.monotone, (n, ell)
        assert rep.changes[-1] < 1e-2, (n, ell, rep.changes)
    c = _runs.contrast()
    assert all(abs(x) < 0.1 for x in c.changes), c.changes
    assert c.monotone


def test_criterion_7_kelvin_duality():
    for n, ell in CANONICAL_SET:
        out = kelvin_check(CurvatureFunction(n, ell), radii=100)
        assert out["pointwise"] < 1e-12, (n, ell, out)
        assert out["eigenvalues"] < 1e-8, (n, ell, out)


def test_criterion_8_barrier_certificates():
    exterior_seen = interior_seen = 0
    for n in range(3, 13):
        for ell in (1, 2):
            f = CurvatureFunction(n, ell)
            for k in range(1, n + 1):
                tag = locate(model_vector(n, k), f).tag
                if tag == EXTERIOR:
                    assert barrier_ii_search(f, k).margin < -1e-6, (n, ell, k)
                    exterior_seen += 1
                elif tag == INTERIOR:
                    assert regular_certificate_residual(f, k) < 1e-12, (n, ell, k)
                    interior_seen += 1
    assert exterior_seen and interior_seen


def main() -> int:
    failed = 0
    for number, title in CRITERIA.items():
        fn = next(v for k, v in globals().items() if k.startswith(f"test_criterion_{number}_"))
        t0 = time.perf_counter()
        try:
            fn()
            status = "PASS"
        except AssertionError as err:
            status, failed = f"FAIL {err}", failed + 1
        print(f"criterion {number} ({title}): {status}  [{time.perf_counter() - t0:.1f} s]",
              flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
