"""Garding cones, elementary symmetric functions and the constants built on them.

Everything here is a pure function of immutable values.  The curvature
function is ``sigma_ell`` (``raw``) or ``sigma_ell ** (1/ell)`` (``degree-one``)
on the closed cone ``Gamma_ell = {sigma_1 > 0, ..., sigma_ell > 0}``.

``sigma_1(v_k) = n - 2k + 2``, so ``v_k`` lies in ``Gamma_1`` exactly when
``k < (n + 2) / 2``; ``max_regular_codim`` follows this arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

RAW = "raw"
DEGREE_ONE = "degree-one"

# relative scale below which sigma_j is treated as an exact zero
BOUNDARY_RTOL = 1e-14

INTERIOR = "interior"
BOUNDARY = "boundary"
EXTERIOR = "exterior"


class DomainError(ValueError):
    """Raised when a value lies outside the closed cone where f is defined."""


@dataclass(frozen=True)
class EigenvalueVector:
    """A point of R^n stored as (value, multiplicity) blocks.

    The stored form is canonical: values sorted nonincreasing, equal values
    merged, zero multiplicities dropped.  Hence ``from_flat(v.flat())`` gives
    back ``v`` exactly.
    """

    entries: tuple[tuple[float, int], ...]

    def __post_init__(self):
        merged: dict[float, int] = {}
        for value, mult in self.entries:
            mult = int(mult)
            if mult < 0:
                raise ValueError("multiplicities must be nonnegative")
            if mult == 0:
                continue
            value = float(value) + 0.0  # folds -0.0 into 0.0
            merged[value] = merged.get(value, 0) + mult
        if not merged:
            raise ValueError("an eigenvalue vector needs at least one entry")
        canon = tuple(sorted(merged.items(), key=lambda vm: -vm[0]))
        object.__setattr__(self, "entries", canon)

    @classmethod
    def from_flat(cls, values: Iterable[float]) -> "EigenvalueVector":
        return cls(tuple((float(v), 1) for v in values))

    @classmethod
    def from_blocks(cls, values: Sequence[float], mults: Sequence[int]) -> "EigenvalueVector":
        return cls(tuple(zip(values, mults)))

    @property
    def n(self) -> int:
        return sum(m for _, m in self.entries)

    def flat(self) -> np.ndarray:
        return np.repeat([v for v, _ in self.entries], [m for _, m in self.entries]).astype(float)

    def scaled(self, t: float) -> "EigenvalueVector":
        return EigenvalueVector(tuple((t * v, m) for v, m in self.entries))

    def __add__(self, other: "EigenvalueVector") -> "EigenvalueVector":
        # entrywise sum of the sorted flat forms
        return EigenvalueVector.from_flat(self.flat() + other.flat())

    def __len__(self) -> int:
        return self.n


def _as_flat(lam) -> np.ndarray:
    if isinstance(lam, EigenvalueVector):
        return lam.flat()
    return np.asarray(lam)


def elementary_symmetric(lam, upto: int) -> np.ndarray:
    """Return ``[sigma_0, ..., sigma_upto]`` along the last axis.

    ``lam`` has shape ``(..., n)``; real and complex dtypes both work (the
    solver differentiates through this with a complex step).  The recurrence
    multiplies out ``prod_i (1 + lam_i t)`` one factor at a time, so the cost
    is ``O(n * upto)``.
    """
    lam = _as_flat(lam)
    n = lam.shape[-1]
    if upto < 0 or upto > n:
        raise ValueError(f"order must be in [0, {n}], got {upto}")
    e = np.zeros(lam.shape[:-1] + (upto + 1,), dtype=np.result_type(lam.dtype, float))
    e[..., 0] = 1.0
    for i in range(n):
        m = min(i + 1, upto)
        # the right side is built from the old coefficients before assignment
        e[..., 1:m + 1] = e[..., 1:m + 1] + lam[..., i, None] * e[..., :m]
    return e


def _blocks_esym(v: EigenvalueVector, upto: int, absolute: bool = False) -> np.ndarray:
    # prod over blocks of (1 + a t)^m, truncated at t^upto
    e = np.zeros(upto + 1)
    e[0] = 1.0
    for a, m in v.entries:
        a = abs(a) if absolute else a
        g = np.array([math.comb(m, j) * a ** j for j in range(min(m, upto) + 1)])
        e = np.convolve(e, g)[:upto + 1]
    return e


def _slack(s: np.ndarray, scale: np.ndarray) -> np.ndarray:
    s = np.where(np.abs(s) <= BOUNDARY_RTOL * scale, 0.0, s)
    return s.min(axis=-1)


def sigma(lam, j: int) -> float:
    """j-th elementary symmetric polynomial of ``lam`` (``1 <= j <= n``)."""
    n = len(lam) if isinstance(lam, EigenvalueVector) else np.shape(lam)[-1]
    if not 1 <= j <= n:
        raise ValueError(f"need 1 <= j <= n = {n}, got j = {j}")
    return elementary_symmetric(lam, j)[..., j]


@dataclass(frozen=True)
class CurvatureFunction:
    """The pair (f, Gamma_ell) with f = sigma_ell or sigma_ell^(1/ell)."""

    n: int
    ell: int
    normalization: str = RAW
    p: float = field(init=False)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"dimension must be at least 3, got n = {self.n}")
        if not 1 <= self.ell <= self.n:
            raise ValueError(f"cone index must be in [1, n], got ell = {self.ell}")
        if self.normalization not in (RAW, DEGREE_ONE):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        object.__setattr__(self, "p", float(self.ell) if self.normalization == RAW else 1.0)

    def __call__(self, lam) -> float:
        return f_eval(self, lam)

    def values(self, lam: np.ndarray) -> np.ndarray:
        """Vectorized f over ``lam[..., n]`` with no cone check.

        Works for complex input, which is how the solver builds its Jacobian.
        """
        s = elementary_symmetric(lam, self.ell)[..., self.ell]
        if self.normalization == RAW:
            return s
        return s ** (1.0 / self.ell)

    def margins(self, lam: np.ndarray) -> np.ndarray:
        """Vectorized signed slack ``min_{j <= ell} sigma_j`` over ``lam[..., n]``."""
        if isinstance(lam, EigenvalueVector):
            return _slack(_blocks_esym(lam, self.ell)[1:], _blocks_esym(lam, self.ell, True)[1:])
        return _slack(elementary_symmetric(lam, self.ell)[..., 1:],
                      elementary_symmetric(np.abs(lam), self.ell)[..., 1:])


@dataclass(frozen=True)
class ConeLocation:
    tag: str
    margin: float


def locate(lam, gamma: CurvatureFunction) -> ConeLocation:
    """Position of ``lam`` relative to the closed cone of ``gamma``."""
    size = lam.n if isinstance(lam, EigenvalueVector) else _as_flat(lam).shape[-1]
    if size != gamma.n:
        raise ValueError(f"vector has {size} entries, expected n = {gamma.n}")
    margin = float(gamma.margins(lam))
    if margin > 0:
        tag = INTERIOR
    elif margin == 0:
        tag = BOUNDARY
    else:
        tag = EXTERIOR
    return ConeLocation(tag, margin)


def f_eval(f: CurvatureFunction, lam) -> float:
    loc = locate(lam, f)
    if loc.tag == EXTERIOR:
        raise DomainError(f"f is undefined outside the closed cone (margin {loc.margin:.3g})")
    if loc.tag == BOUNDARY:
        return 0.0
    return float(f.values(_as_flat(lam)))


def model_vector(n: int, k: int) -> EigenvalueVector:
    """``v_k``: ``n - k + 1`` ones followed by ``k - 1`` minus ones."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k = {k}, n = {n}")
    return EigenvalueVector(((1.0, n - k + 1), (-1.0, k - 1)))


def max_regular_codim(f: CurvatureFunction) -> int:
    """Largest k with v_k inside the open cone.

    Membership is monotone in k (v_k - v_k' has nonnegative entries when
    k' >= k), so the scan stops at the first miss.
    """
    k_star = 0
    for k in range(1, f.n + 1):
        if locate(model_vector(f.n, k), f).tag != INTERIOR:
            break
        k_star = k
    return k_star


def alpha_constant(f: CurvatureFunction) -> float:
    """Scale of the canonical ball solution, ``(2^p f(1))^((n-2)/(4p))``.

    The ball solution has ``lambda(-A) = 2 alpha^(-4/(n-2)) * (1, ..., 1)``.
    """
    ones = np.ones(f.n)
    return (2.0 ** f.p * f_eval(f, ones)) ** ((f.n - 2) / (4.0 * f.p))


def model_scale(f: CurvatureFunction, k: int) -> float:
    """c with f((c^(-4/(n-2)) / 2) v_k) = 1, the scale of ``c * rho^(-(n-2)/2)``."""
    v = model_vector(f.n, k)
    loc = locate(v, f)
    if loc.tag != INTERIOR:
        raise DomainError(f"v_{k} is {loc.tag} to Gamma_{f.ell} in dimension {f.n}; no scale exists")
    return (f_eval(f, v) / 2.0 ** f.p) ** ((f.n - 2) / (4.0 * f.p))


def is_supersolution_value(f: CurvatureFunction, lam) -> bool:
    """Pointwise super-solution test: outside the closed cone, or f <= 1."""
    loc = locate(lam, f)
    if loc.tag == EXTERIOR:
        return True
    return f_eval(f, lam) <= 1.0


def gamma1_threshold(n: int) -> int:
    """Largest integer k with k < (n + 2) / 2."""
    return math.ceil((n + 2) / 2) - 1


def gamma2_threshold(n: int) -> int:
    """Largest integer k strictly below (n - sqrt(n) + 2) / 2."""
    bound = (n - math.sqrt(n) + 2) / 2
    k = math.floor(bound)
    # sqrt of a perfect square is exact in floating point, so equality is reliable
    return k - 1 if k == bound else k
