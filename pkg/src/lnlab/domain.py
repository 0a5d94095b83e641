"""Symmetry classes, one-dimensional domains and sampled profiles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cone import CurvatureFunction

SPHERICAL = "spherical"
CYLINDRICAL = "cylindrical"

DIRICHLET = "dirichlet"
BLOW_UP = "blow-up"
FAR_FIELD = "truncated-far-field"
CENTER = "center"


@dataclass(frozen=True)
class SymmetryClass:
    """Spherical symmetry about ``center`` or cylindrical symmetry about R^(n-k).

    The symmetry variable is ``r = |x - center|`` or ``rho = |x''|`` where
    ``x = (x', x'')`` with ``x''`` the last ``k`` coordinates.
    """

    kind: str
    k: Optional[int] = None
    center: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in (SPHERICAL, CYLINDRICAL):
            raise ValueError(f"unknown symmetry {self.kind!r}")
        if self.kind == CYLINDRICAL and (self.k is None or self.k < 1):
            raise ValueError("cylindrical symmetry needs a codimension k >= 1")

    def multiplicities(self, n: int) -> tuple[int, ...]:
        """Block sizes: (radial, tangential) or (radial, sphere, flat)."""
        if self.kind == SPHERICAL:
            return (1, n - 1)
        if self.k > n:
            raise ValueError(f"codimension {self.k} exceeds dimension {n}")
        return (1, self.k - 1, n - self.k)

    def coordinate(self, x: np.ndarray) -> np.ndarray:
        """Symmetry variable of points ``x[..., n]``."""
        x = np.asarray(x, dtype=float)
        if self.kind == SPHERICAL:
            c = 0.0 if self.center is None else np.asarray(self.center, dtype=float)
            return np.linalg.norm(x - c, axis=-1)
        return np.linalg.norm(x[..., -self.k:], axis=-1)


def spherical(center=None) -> SymmetryClass:
    return SymmetryClass(SPHERICAL, center=None if center is None else tuple(center))


def cylindrical(k: int) -> SymmetryClass:
    return SymmetryClass(CYLINDRICAL, k=k)


@dataclass(frozen=True)
class Boundary:
    """Role of a domain endpoint; ``value`` is the u-value for Dirichlet-type roles."""

    kind: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (DIRICHLET, BLOW_UP, FAR_FIELD, CENTER):
            raise ValueError(f"unknown boundary role {self.kind!r}")
        if self.kind in (DIRICHLET, FAR_FIELD) and not (self.value is not None and self.value > 0):
            raise ValueError(f"{self.kind} boundary needs a positive value")


def dirichlet(c: float) -> Boundary:
    return Boundary(DIRICHLET, float(c))


def blow_up() -> Boundary:
    return Boundary(BLOW_UP)


def far_field(c: float) -> Boundary:
    return Boundary(FAR_FIELD, float(c))


@dataclass(frozen=True)
class DomainSpec1D:
    """A symmetric domain ``lo < coordinate < hi`` with endpoint roles.

    Shapes: ``ball`` (0, R), ``annulus`` (a, b), ``exterior`` (R, L) with L a
    truncation radius, and ``slab`` (eps, L) for cylindrical symmetry.
    """

    symmetry: SymmetryClass
    shape: str
    lo: float
    hi: float
    left: Boundary
    right: Boundary

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError(f"need 0 <= lo < hi, got ({self.lo}, {self.hi})")
        if self.shape == "ball":
            if self.symmetry.kind != SPHERICAL or self.lo != 0 or self.left.kind != CENTER:
                raise ValueError("a ball is spherical with a center node at r = 0")
        elif self.lo <= 0:
            raise ValueError(f"{self.shape} needs a positive inner radius")
        elif self.left.kind == CENTER:
            raise ValueError("only a ball has a center endpoint")
        if self.shape == "slab" and self.symmetry.kind != CYLINDRICAL:
            raise ValueError("slab domains are cylindrical")
        if self.shape not in ("ball", "annulus", "exterior", "slab"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.right.kind == CENTER:
            raise ValueError("center role is only valid at r = 0")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def ends(self):
        return (("left", self.lo, self.left), ("right", self.hi, self.right))

    def with_roles(self, left: Boundary, right: Boundary) -> "DomainSpec1D":
        return DomainSpec1D(self.symmetry, self.shape, self.lo, self.hi, left, right)

    def contains(self, other: "DomainSpec1D") -> bool:
        return (self.symmetry == other.symmetry
                and self.lo <= other.lo and other.hi <= self.hi)


def ball(R: float, center=None) -> DomainSpec1D:
    return DomainSpec1D(spherical(center), "ball", 0.0, float(R), Boundary(CENTER), blow_up())


def annulus(a: float, b: float, left: Boundary | None = None, right: Boundary | None = None,
            center=None) -> DomainSpec1D:
    return DomainSpec1D(spherical(center), "annulus", float(a), float(b),
                        left or blow_up(), right or blow_up())


def exterior(R: float, L: float, far_value: float, center=None) -> DomainSpec1D:
    return DomainSpec1D(spherical(center), "exterior", float(R), float(L),
                        blow_up(), far_field(far_value))


def slab(eps: float, L: float, k: int, far_value: float) -> DomainSpec1D:
    return DomainSpec1D(cylindrical(k), "slab", float(eps), float(L),
                        blow_up(), far_field(far_value))


@dataclass(frozen=True)
class Profile1D:
    """Nodal values of ``w = u^(-2/(n-2))`` on a strictly increasing mesh.

    ``w == 0`` is only allowed at blow-up endpoints, where ``u`` is infinite.
    """

    mesh: np.ndarray
    w: np.ndarray
    domain: DomainSpec1D
    f: CurvatureFunction
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mesh = np.asarray(self.mesh, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if mesh.ndim != 1 or mesh.shape != w.shape or mesh.size < 3:
            raise ValueError("mesh and w must be 1-D arrays of equal length >= 3")
        if np.any(np.diff(mesh) <= 0):
            raise ValueError("mesh must be strictly increasing")
        if np.any(w[1:-1] <= 0):
            raise ValueError("w must be positive at interior nodes")
        mesh.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.f.n

    @property
    def u(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.w > 0, self.w, 0.0) ** (-(self.n - 2) / 2.0)

    def replace(self, **changes) -> "Profile1D":
        kw = dict(mesh=self.mesh, w=self.w, domain=self.domain, f=self.f, meta=dict(self.meta))
        kw.update(changes)
        return Profile1D(**kw)
