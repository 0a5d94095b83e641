"""Closed-form solutions, barriers and the a-priori bounds built from them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cone import (CurvatureFunction, EigenvalueVector, alpha_constant, model_scale,
                   model_vector)
from .domain import cylindrical, spherical
from .schouten import Jet1D, SymmetryClass

BALL = "ball"
EXTERIOR = "exterior"
CYLINDER = "cylinder-model"


@dataclass(frozen=True)
class ClosedFormSolution:
    """Canonical ball/exterior solution, or the cylindrical model ``c rho^(-(n-2)/2)``."""

    kind: str
    f: CurvatureFunction
    R: float = 1.0
    center: Optional[tuple] = None
    k: Optional[int] = None
    scale: float = field(init=False)

    def __post_init__(self):
        if self.kind in (BALL, EXTERIOR):
            if self.R <= 0:
                raise ValueError("radius must be positive")
            object.__setattr__(self, "scale", alpha_constant(self.f))
        elif self.kind == CYLINDER:
            if self.k is None:
                raise ValueError("the cylinder model needs a codimension k")
            object.__setattr__(self, "scale", model_scale(self.f, self.k))
        else:
            raise ValueError(f"unknown closed form {self.kind!r}")

    @property
    def symmetry(self) -> SymmetryClass:
        if self.kind == CYLINDER:
            return cylindrical(self.k)
        return spherical(self.center)

    def coordinate(self, x) -> np.ndarray:
        return self.symmetry.coordinate(x)

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == BALL:
            bad = (r < 0) | (r >= self.R)
        elif self.kind == EXTERIOR:
            bad = r <= self.R
        else:
            bad = r <= 0
        if np.any(bad):
            raise ValueError(f"point outside the domain of the {self.kind} solution")
        return r

    def w(self, r):
        """``u^(-2/(n-2))`` at radius r, which stays finite up to the boundary."""
        r = np.asarray(r, dtype=float)
        a = self.scale ** (-2.0 / (self.f.n - 2))
        if self.kind == BALL:
            return a * (self.R ** 2 - r ** 2) / self.R
        if self.kind == EXTERIOR:
            return a * (r ** 2 - self.R ** 2) / self.R
        return a * r

    def w_jet(self, r: float) -> Jet1D:
        a = self.scale ** (-2.0 / (self.f.n - 2))
        r = float(self._check(r))
        if self.kind == BALL:
            return Jet1D(self.w(r), -2 * a * r / self.R, -2 * a / self.R, self.f.n, "w-form")
        if self.kind == EXTERIOR:
            return Jet1D(self.w(r), 2 * a * r / self.R, 2 * a / self.R, self.f.n, "w-form")
        return Jet1D(self.w(r), a, 0.0, self.f.n, "w-form")

    def radial(self, r):
        r = self._check(r)
        return self.w(r) ** (-(self.f.n - 2) / 2.0)

    def __call__(self, x):
        """Value at points ``x[..., n]``."""
        return self.radial(self.coordinate(x))

    def jet(self, r: float) -> Jet1D:
        """Exact (u, u', u'') in the symmetry variable."""
        m = self.f.n - 2
        h = m / 2.0
        s = self.scale
        r = float(self._check(r))
        if self.kind == CYLINDER:
            return Jet1D(s * r ** -h, -h * s * r ** (-h - 1), h * (h + 1) * s * r ** (-h - 2), self.f.n)
        R = self.R
        q = (R * R - r * r) if self.kind == BALL else (r * r - R * R)
        sign = 1.0 if self.kind == BALL else -1.0
        # u = s R^h q^(-h) with q' = -2 sign r
        u = s * R ** h * q ** -h
        du = u * (2 * h * sign * r / q)
        d2u = u * (2 * h * sign / q + 4 * h * (h + 1) * r * r / q ** 2)
        return Jet1D(u, du, d2u, self.f.n)


def ball_solution(f: CurvatureFunction, R: float = 1.0, center=None) -> ClosedFormSolution:
    return ClosedFormSolution(BALL, f, R, None if center is None else tuple(center))


def exterior_solution(f: CurvatureFunction, R: float = 1.0, center=None) -> ClosedFormSolution:
    return ClosedFormSolution(EXTERIOR, f, R, None if center is None else tuple(center))


def cylinder_model(f: CurvatureFunction, k: int) -> ClosedFormSolution:
    return ClosedFormSolution(CYLINDER, f, k=k)


def eval_closed_form(s: ClosedFormSolution, x, jet: bool = False):
    """Value at a point (array of n coordinates) or a radius (scalar).

    With ``jet=True`` a scalar radius is required and the exact u-form jet is
    returned alongside the value.
    """
    x = np.asarray(x, dtype=float)
    r = x if x.ndim == 0 else s.coordinate(x)
    if jet:
        j = s.jet(float(r))
        return j.value, j
    return s.radial(r)


def upper_bound(dist, f: CurvatureFunction):
    """Pointwise ceiling ``alpha * dist^(-(n-2)/2)`` for positive sub-solutions."""
    dist = np.asarray(dist, dtype=float)
    if np.any(dist <= 0):
        raise ValueError("distance must be positive")
    return alpha_constant(f) * dist ** (-(f.n - 2) / 2.0)


def boundary_limit(f: CurvatureFunction) -> float:
    """Limit of ``dist^((n-2)/2) u`` at a smooth blow-up boundary."""
    return alpha_constant(f) * 2.0 ** (-(f.n - 2) / 2.0)


def lower_bound(dist, c: float, c0: float, f: CurvatureFunction):
    """Lower bound for super-solutions with boundary values ``>= c >= c0``."""
    if not c >= c0 > 0:
        raise ValueError("need c >= c0 > 0")
    dist = np.asarray(dist, dtype=float)
    if np.any(dist < 0):
        raise ValueError("distance must be nonnegative")
    m = f.n - 2
    a = alpha_constant(f)
    inner = ((2 + a ** (-2 / m) * c0 ** (2 / m) * dist) * dist
             + a ** (2 / m) * c ** (-2 / m))
    return a * 2.0 ** (-m / 2) * inner ** (-m / 2)


def flat_hessian_of_rho(n: int, k: int) -> EigenvalueVector:
    """Eigenvalues of ``rho D^2 rho`` for the distance to a flat R^(n-k)."""
    return EigenvalueVector(((0.0, n - k + 1), (1.0, k - 1)))


def barrier_i_eigs(c: float, rho: float, hessian_of_rho: EigenvalueVector, n: int) -> EigenvalueVector:
    """lambda(-A^psi) for ``psi = c rho^(-(n-2)/2)``: ``c^(-4/(n-2)) (1/2 - rho D^2 rho)``.

    The value does not depend on ``rho`` once ``rho D^2 rho`` is given; ``rho``
    is validated only.
    """
    if c <= 0 or rho <= 0:
        raise ValueError("c and rho must be positive")
    if hessian_of_rho.n != n:
        raise ValueError("hessian_of_rho has the wrong length")
    t = c ** (-4.0 / (n - 2))
    return EigenvalueVector(tuple((t * (0.5 - v), mult) for v, mult in hessian_of_rho.entries))


@dataclass(frozen=True)
class BarrierII:
    """Parameters of ``psi = (c rho^(-alpha) + d)^beta`` near a flat R^(n-k)."""

    alpha: float
    beta: float
    n: int
    k: int
    c: float = 1.0
    d: float = 1.0
    epsilon: Optional[float] = None

    def __post_init__(self):
        if min(self.alpha, self.beta, self.c, self.d) <= 0:
            raise ValueError("alpha, beta, c, d must be positive")
        if not 1 <= self.k <= self.n:
            raise ValueError("need 1 <= k <= n")
        if self.epsilon is not None:
            t = self.alpha * self.beta / (self.n - 2)
            if not 0.5 < t < 0.5 + self.epsilon:
                raise ValueError(f"alpha*beta/(n-2) = {t} not in (1/2, 1/2 + epsilon)")

    def zeta(self, rho):
        q = self.c * rho ** (-self.alpha)
        return self.alpha * self.beta / (self.n - 2) * q / (q + self.d)

    def __call__(self, rho):
        return (self.c * rho ** (-self.alpha) + self.d) ** self.beta

    def jet(self, rho: float) -> Jet1D:
        a, b, c, d = self.alpha, self.beta, self.c, self.d
        g = c * rho ** -a + d
        g1 = -a * c * rho ** (-a - 1)
        g2 = a * (a + 1) * c * rho ** (-a - 2)
        psi = g ** b
        return Jet1D(psi, b * g ** (b - 1) * g1,
                     b * (b - 1) * g ** (b - 2) * g1 ** 2 + b * g ** (b - 1) * g2, self.n)


def barrier_ii_test_vector(b: BarrierII, zeta: float) -> EigenvalueVector:
    """Normalized ``lambda(-A^psi)`` (up to a positive factor) as a function of zeta.

    Blocks: ``n - k`` entries ``1 + (2 zeta - 1)/(1 - zeta)``, ``k - 1`` entries
    ``-1`` and one entry ``1 + (alpha - (n-2) zeta / beta)/(1 - zeta)``.
    """
    if not 0 <= zeta < 1:
        raise ValueError("zeta must lie in [0, 1)")
    n, k = b.n, b.k
    s = 1.0 - zeta
    flat = 1.0 + (2 * zeta - 1) / s
    last = 1.0 + (b.alpha - (n - 2) / b.beta * zeta) / s
    return EigenvalueVector(((flat, n - k), (-1.0, k - 1), (last, 1)))


def barrier_ii_scan(b: BarrierII, zetas: np.ndarray) -> np.ndarray:
    """Flat test vectors ``[len(zetas), n]`` for a whole zeta grid at once."""
    zetas = np.asarray(zetas, dtype=float)
    if np.any((zetas < 0) | (zetas >= 1)):
        raise ValueError("zeta must lie in [0, 1)")
    n, k = b.n, b.k
    s = 1.0 - zetas
    flat = 1.0 + (2 * zetas - 1) / s
    last = 1.0 + (b.alpha - (n - 2) / b.beta * zetas) / s
    out = np.empty((zetas.size, n))
    out[:, : n - k] = flat[:, None]
    out[:, n - k: n - 1] = -1.0
    out[:, n - 1] = last
    return out


def model_eigs(n: int, k: int) -> EigenvalueVector:
    """``v_k / 2``, the eigenvalues of -A for ``w = rho``."""
    return model_vector(n, k).scaled(0.5)


KELVIN_PROBE_RADII = (1.5, 2.0, 2.5, 3.0)


def kelvin_check(f: CurvatureFunction, R: float = 1.0, radii: int = 100, h: float = 1e-3,
                 probe_radii=KELVIN_PROBE_RADII, seed: int = 0) -> dict:
    """Exterior solution against the Kelvin image of the ball solution.

    ``pointwise`` is the max relative gap between ``u_out(y)`` and the
    transform of ``u_in`` in the sphere of radius R, over ``radii`` points
    with ``R < |y| <= 100 R``.  ``eigenvalues`` is the max gap between the
    stencil eigenvalues of the transformed field at y and those of ``u_in``
    at the inverted point.  Stencil spacing is ``h |y|`` on each side so that
    far points are not swamped by rounding; both stencils are Richardson
    extrapolated.
    """
    from .schouten import kelvin_point, kelvin_transform, stencil_neg_schouten_eigs

    n = f.n
    origin = np.zeros(n)
    u_in = ball_solution(f, R)
    u_out = exterior_solution(f, R)
    transformed = kelvin_transform(u_in, origin, R)
    rng = np.random.default_rng(seed)

    def direction():
        d = rng.normal(size=n)
        return d / np.linalg.norm(d)

    rs = R * np.geomspace(1.0 + 1e-3, 100.0, radii)
    pts = rs[:, None] * np.stack([direction() for _ in rs])
    pointwise = float(np.max(np.abs(transformed(pts) / u_out(pts) - 1.0)))

    eig_gap = 0.0
    for r in probe_radii:
        y = R * r * direction()
        y_star = kelvin_point(y, origin, R)
        a = stencil_neg_schouten_eigs(transformed, y, h * np.linalg.norm(y), richardson=True)
        b = stencil_neg_schouten_eigs(u_in, y_star, h * np.linalg.norm(y_star), richardson=True)
        eig_gap = max(eig_gap, float(np.max(np.abs(a.flat() - b.flat()))))
    return {"n": n, "ell": f.ell, "R": R, "radii": radii, "h": h,
            "pointwise": pointwise, "eigenvalues": eig_gap}
