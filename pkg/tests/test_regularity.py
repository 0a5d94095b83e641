import csv
import io
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lnlab.canonical import BarrierII, barrier_ii_test_vector
from lnlab.cone import BOUNDARY, EXTERIOR, INTERIOR, CurvatureFunction, locate, model_vector
from lnlab.regularity import (BORDERLINE, IRREGULAR, REGULAR, BarrierSearchError,
                              barrier_ii_search, borderline_codims, classify,
                              regular_certificate_residual, table_csv, threshold_table)

VERDICT = {INTERIOR: REGULAR, EXTERIOR: IRREGULAR, BOUNDARY: BORDERLINE}


def strict_bound(num_twice: float) -> int:
    """Largest integer k with 2k < num_twice."""
    return math.ceil(num_twice / 2) - 1


def gamma2_oracle(n: int) -> int:
    # k < (n - sqrt(n) + 2)/2, exact on perfect squares
    s = math.isqrt(n)
    root = s if s * s == n else math.sqrt(n)
    return strict_bound(n - root + 2)


def test_classify_examples():
    c = classify(CurvatureFunction(9, 2), 3)
    assert c.verdict == REGULAR
    assert_allclose(c.scale, 2 ** (7 / 8), rtol=1e-14)
    assert classify(CurvatureFunction(9, 2), 4).verdict == BORDERLINE
    irr = classify(CurvatureFunction(3, 1), 3)
    assert irr.verdict == IRREGULAR
    assert irr.barrier.epsilon == 0.1


@pytest.mark.parametrize("n", range(3, 13))
@pytest.mark.parametrize("ell", [1, 2, 3])
def test_verdict_follows_cone_location(n, ell):
    if ell > n:
        return
    f = CurvatureFunction(n, ell)
    verdicts = []
    for k in range(1, n + 1):
        c = classify(f, k)
        assert c.verdict == VERDICT[locate(model_vector(n, k), f).tag]
        verdicts.append(c.verdict == REGULAR)
    # regular verdicts form a prefix
    assert verdicts == sorted(verdicts, reverse=True)


@pytest.mark.parametrize("n", range(3, 13))
@pytest.mark.parametrize("ell", [1, 2])
def test_certificates(n, ell):
    f = CurvatureFunction(n, ell)
    for k in range(1, n + 1):
        c = classify(f, k)
        if c.verdict == REGULAR:
            assert regular_certificate_residual(f, k) < 1e-12
        elif c.verdict == IRREGULAR:
            b = c.barrier
            assert b.margin < -1e-6
            t = b.alpha * b.beta / (n - 2)
            assert 0.5 < t < 0.5 + b.epsilon


def test_barrier_margin_by_independent_scan():
    # recompute the margin with brute sigma sums on a coarser grid
    f = CurvatureFunction(9, 2)
    cert = barrier_ii_search(f, 5)
    b = BarrierII(cert.alpha, cert.beta, 9, 5, epsilon=cert.epsilon)
    worst = -np.inf
    for z in np.linspace(0, 0.5 + cert.epsilon, 501):
        lam = barrier_ii_test_vector(b, z).flat()
        s1 = lam.sum()
        s2 = 0.5 * (s1 ** 2 - (lam ** 2).sum())
        worst = max(worst, min(s1, s2))
    assert worst < 0
    assert cert.margin < 0


def test_barrier_search_requires_exterior_vector():
    with pytest.raises(ValueError):
        barrier_ii_search(CurvatureFunction(9, 2), 3)
    with pytest.raises(ValueError):
        barrier_ii_search(CurvatureFunction(9, 2), 4)


def test_barrier_search_failure_reports_best_margin():
    # too wide an epsilon window lets the test vector re-enter the cone
    with pytest.raises(BarrierSearchError) as info:
        barrier_ii_search(CurvatureFunction(5, 1), 4, epsilons=(0.3,))
    assert info.value.best_margin > 0


def test_classify_rejects_bad_k():
    with pytest.raises(ValueError):
        classify(CurvatureFunction(4, 1), 0)
    with pytest.raises(ValueError):
        classify(CurvatureFunction(4, 1), 5)


def test_borderline_codims():
    assert borderline_codims(CurvatureFunction(9, 2)) == [4]
    assert borderline_codims(CurvatureFunction(4, 1)) == [3]
    assert borderline_codims(CurvatureFunction(5, 1)) == []


def test_threshold_table_examples():
    rows = {(r.n, r.ell): r for r in threshold_table([1, 2], range(3, 51))}
    assert rows[9, 1].k_star == 5
    assert rows[9, 2].k_star == 3
    assert rows[9, 2].borderline_k == 4
    assert rows[16, 2].k_star == 6
    assert all(r.agrees for r in rows.values())
    for n in range(3, 51):
        assert rows[n, 2].k_star == gamma2_oracle(n)
        assert rows[n, 1].k_star == strict_bound(n + 2)


def test_top_cone_threshold_is_one():
    for n in range(3, 10):
        (row,) = threshold_table([n], [n])
        assert row.k_star == 1
        assert row.closed_form is None and row.agrees is None


def test_table_csv_format():
    text = table_csv(threshold_table([2], range(3, 10)))
    lines = text.splitlines()
    assert lines[0] == "n,ell,k_star,borderline_k,closed_form,agrees"
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["n"] for r in rows] == [str(n) for n in range(3, 10)]
    assert {r["agrees"] for r in rows} == {"true"}
    assert rows[9 - 3]["borderline_k"] == "4"
    assert rows[0]["borderline_k"] == ""


def test_evidence_payloads():
    f = CurvatureFunction(9, 2)
    assert set(classify(f, 3).evidence) == {"scale"}
    assert classify(f, 4).evidence == {"location": BOUNDARY}
    ev = classify(f, 6).evidence
    assert ev["grid_points"] == 10_000 and ev["margin"] < 0
