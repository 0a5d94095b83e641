"""Regular/irregular verdicts for a flat singular set of codimension k.

A compact smooth set of codimension ``k`` is *regular* (the maximal solution
blows up on it) when the model vector ``v_k`` lies in the open cone, and
*irregular* (the maximal solution stays bounded near it) when ``v_k`` lies
outside the closed cone.  Each verdict carries a certificate:

* regular: the scale ``c`` of the model ``c rho^(-(n-2)/2)``, which solves
  the equation exactly;
* irregular: parameters ``(alpha, beta, epsilon)`` of the barrier
  ``(c rho^-alpha + d)^beta`` whose eigenvalue vector stays outside the
  closed cone over a dense grid of the ratio ``zeta``.

When ``v_k`` sits on the cone boundary no verdict is forced.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .canonical import BarrierII, barrier_i_eigs, barrier_ii_scan, flat_hessian_of_rho
from .cone import (BOUNDARY, EXTERIOR, INTERIOR, CurvatureFunction, f_eval, gamma1_threshold,
                   gamma2_threshold, locate, max_regular_codim, model_scale, model_vector)

REGULAR = "regular"
IRREGULAR = "irregular"
BORDERLINE = "borderline"

EPSILONS = (0.1, 0.05, 0.01)
ZETA_POINTS = 10_000


class BarrierSearchError(RuntimeError):
    """No barrier parameters passed the scan; ``best_margin`` is the closest miss."""

    def __init__(self, message: str, best_margin: float):
        super().__init__(message)
        self.best_margin = best_margin


@dataclass(frozen=True)
class BarrierCertificate:
    alpha: float
    beta: float
    epsilon: float
    # largest cone margin over the zeta grid; negative means exterior throughout
    margin: float
    grid_points: int

    @property
    def params(self) -> tuple[float, float, float]:
        return self.alpha, self.beta, self.epsilon


@dataclass(frozen=True)
class Classification:
    verdict: str
    n: int
    ell: int
    k: int
    # v_k margin against the cone (positive inside)
    margin: float
    scale: Optional[float] = None
    barrier: Optional[BarrierCertificate] = None

    @property
    def evidence(self):
        if self.verdict == REGULAR:
            return {"scale": self.scale}
        if self.verdict == IRREGULAR:
            b = self.barrier
            return {"alpha": b.alpha, "beta": b.beta, "epsilon": b.epsilon,
                    "margin": b.margin, "grid_points": b.grid_points}
        return {"location": BOUNDARY}


def barrier_ii_search(f: CurvatureFunction, k: int, epsilons: Iterable[float] = EPSILONS,
                      points: int = ZETA_POINTS) -> BarrierCertificate:
    """First ``epsilon`` whose barrier test vector leaves the closed cone on the whole grid.

    For each ``epsilon``: ``alpha = epsilon/2`` and
    ``beta = (n-2)(1/2 + epsilon/2)/alpha``, so ``alpha beta/(n-2)`` sits in
    the middle of ``(1/2, 1/2 + epsilon)``.  The test vector is scanned on
    ``points`` uniform values of ``zeta`` in ``[0, 1/2 + epsilon]``.
    """
    loc = locate(model_vector(f.n, k), f)
    if loc.tag != EXTERIOR:
        raise ValueError(f"v_{k} is {loc.tag} to the cone; barrier II needs it exterior")
    best = np.inf
    for eps in epsilons:
        alpha = eps / 2.0
        beta = (f.n - 2) * (0.5 + eps / 2.0) / alpha
        b = BarrierII(alpha, beta, f.n, k, epsilon=eps)
        zetas = np.linspace(0.0, 0.5 + eps, points)
        margin = float(np.max(f.margins(barrier_ii_scan(b, zetas))))
        if margin < 0:
            return BarrierCertificate(alpha, beta, eps, margin, points)
        best = min(best, margin)
    raise BarrierSearchError(f"no barrier found for n={f.n}, ell={f.ell}, k={k}; "
                             f"best margin {best:.3g}", best)


def regular_certificate_residual(f: CurvatureFunction, k: int) -> float:
    """``|f(lambda(-A^psi)) - 1|`` for the model ``psi = c rho^(-(n-2)/2)`` at its scale c."""
    c = model_scale(f, k)
    lam = barrier_i_eigs(c, 1.0, flat_hessian_of_rho(f.n, k), f.n)
    return abs(f_eval(f, lam) - 1.0)


def classify(f: CurvatureFunction, k: int) -> Classification:
    if not 1 <= k <= f.n:
        raise ValueError(f"need 1 <= k <= n = {f.n}, got k = {k}")
    loc = locate(model_vector(f.n, k), f)
    if loc.tag == INTERIOR:
        return Classification(REGULAR, f.n, f.ell, k, loc.margin, scale=model_scale(f, k))
    if loc.tag == EXTERIOR:
        return Classification(IRREGULAR, f.n, f.ell, k, loc.margin, barrier=barrier_ii_search(f, k))
    return Classification(BORDERLINE, f.n, f.ell, k, loc.margin)


def borderline_codims(f: CurvatureFunction) -> list[int]:
    return [k for k in range(1, f.n + 1) if locate(model_vector(f.n, k), f).tag == BOUNDARY]


def closed_form_threshold(n: int, ell: int) -> Optional[int]:
    """Largest regular k predicted by the closed forms for ell = 1, 2 (None otherwise)."""
    if ell == 1:
        return gamma1_threshold(n)
    if ell == 2:
        return gamma2_threshold(n)
    return None


@dataclass(frozen=True)
class ThresholdRow:
    n: int
    ell: int
    k_star: int
    borderline_k: Optional[int]
    closed_form: Optional[int]

    @property
    def agrees(self) -> Optional[bool]:
        return None if self.closed_form is None else self.k_star == self.closed_form


def threshold_table(ells: Iterable[int], n_range: Iterable[int]) -> list[ThresholdRow]:
    rows = []
    for n in n_range:
        for ell in ells:
            if ell > n:
                continue
            f = CurvatureFunction(n, ell)
            border = borderline_codims(f)
            rows.append(ThresholdRow(n, ell, max_regular_codim(f),
                                     border[0] if border else None, closed_form_threshold(n, ell)))
    return rows


def table_csv(rows: Iterable[ThresholdRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "ell", "k_star", "borderline_k", "closed_form", "agrees"])

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        return v

    for r in rows:
        writer.writerow([r.n, r.ell, r.k_star, fmt(r.borderline_k), fmt(r.closed_form), fmt(r.agrees)])
    return buf.getvalue()
