"""Eigenvalues of the negated conformal Hessian -A^u.

For positive u on a domain of R^n (n >= 3, m = n - 2)::

    A^u = -(2/m) u^(-(n+2)/m) D^2u + (2n/m^2) u^(-2n/m) Du (x) Du
          - (2/m^2) u^(-2n/m) |Du|^2 I

In the variable ``w = u^(-2/m)`` this collapses to
``-A^u = (1/2)|Dw|^2 I - w D^2w``, which is what the solver discretizes.
Symmetric jets are handled in closed form block by block; the grid evaluator
assembles the full matrix from central differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cone import EigenvalueVector
from .domain import (BLOW_UP, CENTER, SPHERICAL, Boundary, DomainSpec1D,
                     Profile1D, SymmetryClass)

U_FORM = "u-form"
W_FORM = "w-form"


@dataclass(frozen=True)
class Jet1D:
    """Value and first two derivatives in the symmetry variable."""

    value: float
    d1: float
    d2: float
    n: int
    form: str = U_FORM

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("jet value must be positive")
        if self.form not in (U_FORM, W_FORM):
            raise ValueError(f"unknown jet form {self.form!r}")

    def to_w(self) -> "Jet1D":
        if self.form == W_FORM:
            return self
        return Jet1D(*_power_chain(self.value, self.d1, self.d2, -2.0 / (self.n - 2)), self.n, W_FORM)

    def to_u(self) -> "Jet1D":
        if self.form == U_FORM:
            return self
        return Jet1D(*_power_chain(self.value, self.d1, self.d2, -(self.n - 2) / 2.0), self.n, U_FORM)


def _power_chain(v, d1, d2, q):
    # jet of v**q
    return (v ** q,
            q * v ** (q - 1) * d1,
            q * (q - 1) * v ** (q - 2) * d1 ** 2 + q * v ** (q - 1) * d2)


def w_blocks(w, dw, d2w, coord, sym: SymmetryClass):
    """Block eigenvalues of -A for a w-form jet (vectorized over nodes).

    Returns an array ``[..., B]`` ordered as ``sym.multiplicities(n)``.
    """
    half_grad = 0.5 * dw * dw
    rad = half_grad - w * d2w
    tan = half_grad - w * dw / coord
    if sym.kind == SPHERICAL:
        return np.stack([rad, tan], axis=-1)
    return np.stack([rad, tan, half_grad], axis=-1)


def u_blocks(u, du, d2u, coord, sym: SymmetryClass, n: int):
    """Block eigenvalues of -A evaluated straight from the u-form expression."""
    m = n - 2
    a = u ** (-(n + 2) / m)
    b = u ** (-2 * n / m)
    grad2 = du * du
    iso = -(2 / m ** 2) * b * grad2
    rad = -(2 / m) * a * d2u + (2 * n / m ** 2) * b * grad2 + iso
    tan = -(2 / m) * a * du / coord + iso
    if sym.kind == SPHERICAL:
        return -np.stack([rad, tan], axis=-1)
    return -np.stack([rad, tan, iso], axis=-1)


def expand_blocks(blocks: np.ndarray, mults) -> np.ndarray:
    """Repeat block values into flat eigenvalue arrays ``[..., n]``."""
    return np.repeat(blocks, mults, axis=-1)


def neg_schouten_eigs(jet: Jet1D, sym: SymmetryClass, coordinate: float, n: int) -> EigenvalueVector:
    """lambda(-A^u) for a symmetric jet, as a multiplicity-compressed vector."""
    if coordinate <= 0:
        raise ValueError("the symmetry coordinate must be positive")
    if jet.n != n:
        raise ValueError(f"jet is for n = {jet.n}, asked for n = {n}")
    mults = sym.multiplicities(n)
    if jet.form == W_FORM:
        vals = w_blocks(jet.value, jet.d1, jet.d2, coordinate, sym)
    else:
        vals = u_blocks(jet.value, jet.d1, jet.d2, coordinate, sym, n)
    return EigenvalueVector.from_blocks(vals.tolist(), mults)


def neg_schouten_matrix(u0: float, grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """-A^u as an n x n matrix from the value, gradient and Hessian of u."""
    n = grad.shape[-1]
    m = n - 2
    b = u0 ** (-2 * n / m)
    A = (-(2 / m) * u0 ** (-(n + 2) / m) * hess
         + (2 * n / m ** 2) * b * np.outer(grad, grad)
         - (2 / m ** 2) * b * (grad @ grad) * np.eye(n))
    return -A


def _sorted_eigs(M: np.ndarray) -> np.ndarray:
    M = 0.5 * (M + M.T)
    return np.linalg.eigvalsh(M)[::-1]


def grid_neg_schouten_eigs(u: np.ndarray, point, h: float, n: int | None = None) -> EigenvalueVector:
    """lambda(-A^u) at a grid index from second-order central differences.

    ``u`` is sampled on a uniform Cartesian grid of spacing ``h`` with
    ``u.ndim == n``; ``point`` must be at least one cell from every face.
    Eigenvalues come back nonincreasing, one block per eigenvalue.
    """
    u = np.asarray(u, dtype=float)
    n = u.ndim if n is None else n
    if u.ndim != n:
        raise ValueError(f"field has {u.ndim} axes, expected n = {n}")
    p = tuple(int(i) for i in point)
    if len(p) != n or any(i < 1 or i > s - 2 for i, s in zip(p, u.shape)):
        raise IndexError(f"point {p} is not stencil-interior for a grid of shape {u.shape}")
    patch = u[tuple(slice(i - 1, i + 2) for i in p)]
    if np.any(patch <= 0):
        raise ValueError("u must be positive on the stencil")
    c = (1,) * n

    def at(offsets):
        idx = list(c)
        for axis, step in offsets:
            idx[axis] += step
        return patch[tuple(idx)]

    grad = np.empty(n)
    hess = np.empty((n, n))
    u0 = patch[c]
    for i in range(n):
        grad[i] = (at([(i, 1)]) - at([(i, -1)])) / (2 * h)
        hess[i, i] = (at([(i, 1)]) - 2 * u0 + at([(i, -1)])) / h ** 2
        for j in range(i + 1, n):
            hess[i, j] = hess[j, i] = (at([(i, 1), (j, 1)]) - at([(i, 1), (j, -1)])
                                       - at([(i, -1), (j, 1)]) + at([(i, -1), (j, -1)])) / (4 * h ** 2)
    return EigenvalueVector.from_flat(_sorted_eigs(neg_schouten_matrix(u0, grad, hess)))


def sample_grid(func: Callable, center, h: float, half_width: int = 1) -> np.ndarray:
    """Sample ``func`` on the ``(2 half_width + 1)^n`` grid around ``center``."""
    center = np.asarray(center, dtype=float)
    n = center.size
    offs = np.arange(-half_width, half_width + 1) * h
    mesh = np.meshgrid(*[center[i] + offs for i in range(n)], indexing="ij")
    pts = np.stack(mesh, axis=-1)
    return np.asarray(func(pts), dtype=float)


def _stencil_matrix(func: Callable, x: np.ndarray, h: float) -> np.ndarray:
    n = x.size
    I = np.eye(n) * h
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pts = [x]
    pts += [x + I[i] for i in range(n)] + [x - I[i] for i in range(n)]
    for i, j in pairs:
        pts += [x + I[i] + I[j], x + I[i] - I[j], x - I[i] + I[j], x - I[i] - I[j]]
    vals = np.asarray(func(np.array(pts)), dtype=float)
    if np.any(vals <= 0):
        raise ValueError("u must be positive on the stencil")
    u0, plus, minus = vals[0], vals[1:n + 1], vals[n + 1:2 * n + 1]
    cross = vals[2 * n + 1:].reshape(-1, 4)
    grad = (plus - minus) / (2 * h)
    hess = np.diag((plus - 2 * u0 + minus) / h ** 2)
    for (i, j), (pp, pm, mp, mm) in zip(pairs, cross):
        hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4 * h ** 2)
    return neg_schouten_matrix(u0, grad, hess)


def stencil_neg_schouten_eigs(func: Callable, x, h: float, richardson: bool = False) -> EigenvalueVector:
    """Same central differences as the grid evaluator, sampling only the stencil.

    ``func`` maps points ``[..., n]`` to values.  With ``richardson=True`` the
    matrices at spacings ``h`` and ``2h`` are combined to cancel the ``h^2``
    term before the eigensolve.
    """
    x = np.asarray(x, dtype=float)
    M = _stencil_matrix(func, x, h)
    if richardson:
        M = (4.0 * M - _stencil_matrix(func, x, 2.0 * h)) / 3.0
    return EigenvalueVector.from_flat(_sorted_eigs(M))


def kelvin_point(y: np.ndarray, x, lam_scale: float) -> np.ndarray:
    """Inversion ``y -> x + lam^2 (y - x) / |y - x|^2``."""
    d = np.asarray(y, dtype=float) - x
    r2 = np.sum(d * d, axis=-1, keepdims=True)
    if np.any(r2 == 0):
        raise ValueError("the Kelvin transform is singular at its center")
    return x + lam_scale ** 2 * d / r2


def kelvin_transform(u, x, lam_scale: float):
    """Kelvin transform ``u_{x,lam}(y) = (lam/|y-x|)^(n-2) u(x + lam^2 (y-x)/|y-x|^2)``.

    ``u`` is either a callable field on points ``[..., n]`` (a callable is
    returned) or a spherical :class:`Profile1D` centered at ``x`` (a profile
    on the inverted radii ``r -> lam^2 / r`` is returned).
    """
    if lam_scale <= 0:
        raise ValueError("lam_scale must be positive")
    if isinstance(u, Profile1D):
        return _kelvin_profile(u, x, lam_scale)
    x = np.asarray(x, dtype=float)
    n = x.size

    def transformed(y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y - x, axis=-1)
        if np.any(r == 0):
            raise ValueError("the Kelvin transform is singular at its center")
        return (lam_scale / r) ** (n - 2) * u(kelvin_point(y, x, lam_scale))

    return transformed


def _kelvin_profile(p: Profile1D, x, lam_scale: float) -> Profile1D:
    dom = p.domain
    if dom.symmetry.kind != SPHERICAL:
        raise ValueError("only spherical profiles invert to profiles")
    center = np.zeros(p.n) if dom.symmetry.center is None else np.asarray(dom.symmetry.center)
    if x is not None and not np.allclose(np.broadcast_to(np.asarray(x, float), center.shape), center):
        raise ValueError("the profile must be centered at the inversion center")
    if dom.left.kind == CENTER:
        raise ValueError("a ball profile contains its center, which inverts to infinity")
    lam2 = lam_scale ** 2
    m = p.n - 2
    mesh = lam2 / p.mesh[::-1]
    # w scales by (s / lam)^2 under inversion
    w = (mesh / lam_scale) ** 2 * p.w[::-1]

    def mapped(b: Boundary, r: float) -> Boundary:
        if b.kind == BLOW_UP:
            return b
        return Boundary(b.kind, (r / lam_scale) ** m * b.value)

    new_dom = DomainSpec1D(dom.symmetry, "annulus", lam2 / dom.hi, lam2 / dom.lo,
                           mapped(dom.right, dom.hi), mapped(dom.left, dom.lo))
    return Profile1D(mesh, w, new_dom, p.f, {"kelvin": {"lam_scale": lam_scale}})
