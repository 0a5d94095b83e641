"""Symmetry-reduced solver for f(lambda(-A^u)) = 1.

The unknown is ``w = u^(-2/(n-2))``.  On a 1-D mesh in the symmetry variable
the equation becomes, at every interior node,

    G_i(w) = f(lambda(w_i, w'_i, w''_i; r_i)) - 1 = 0

with nonuniform differences that are exact on quadratics.  The convex
gradient terms are upwinded with one-sided slopes, so the Lipschitz kinks
that sigma_2 profiles develop on annuli stay monotone.  Dirichlet data
``u = c`` become ``w = c^(-2/(n-2))``.  Blow-up ends are reached by the Perron
sweep ``c -> infinity``; ``w = 0`` is never imposed inside Newton.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.linalg import solve_banded

from .canonical import alpha_constant, upper_bound
from .cone import CurvatureFunction
from .domain import (BLOW_UP, CENTER, DIRICHLET, FAR_FIELD, SPHERICAL, DomainSpec1D, Profile1D,
                     blow_up, dirichlet)
from .domain import exterior as exterior_domain
from .domain import slab as slab_domain
from .domain import spherical as _spherical
from .schouten import expand_blocks, w_blocks

log = logging.getLogger(__name__)

COMPLEX_STEP = 1e-30


class SolverError(RuntimeError):
    """Base class for solver failures; carries the report when there is one."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonConvergence(SolverError):
    def __init__(self, message, report=None, profile=None):
        super().__init__(message, report)
        self.profile = profile


class InadmissibleInitialization(SolverError):
    pass


class MonotonicityViolation(SolverError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    newton_tol: float = 1e-10
    max_newton: int = 50
    max_halvings: int = 30
    nodes: int = 2001
    grading_ratio: float = 1.05
    # first cell at a clustered end, relative to the local length scale
    first_cell: float = 1e-4
    c0: float = 10.0
    max_doublings: int = 400
    sweep_tol: float = 1e-8
    monotone_tol: float = 1e-8
    max_substeps: int = 6
    # doublings of c0 allowed before the first solve of a sweep succeeds
    max_start_doublings: int = 200
    # the rounding floor may relax newton_tol up to this value, never further
    floor_cap: float = 1e-4
    # exterior sweeps that fail restart with c0 multiplied by exterior_c0_step
    exterior_restarts: int = 4
    exterior_c0_step: float = 100.0

    def __post_init__(self):
        for name in ("newton_tol", "first_cell", "c0", "sweep_tol", "monotone_tol", "floor_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.nodes < 5:
            raise ValueError("need at least 5 nodes")
        if not self.grading_ratio >= 1:
            raise ValueError("grading ratio must be >= 1")
        if self.exterior_restarts < 0 or not self.exterior_c0_step > 1:
            raise ValueError("exterior restarts need a count >= 0 and a step > 1")


@dataclass
class SolveReport:
    converged: bool
    residual: float
    newton_history: list = field(default_factory=list)
    sweep_history: list = field(default_factory=list)
    rate: dict = field(default_factory=dict)
    wall_ms: float = 0.0
    message: str = ""
    # max(newton_tol, float64 noise floor of the residual) at the last solve
    tolerance: float = 0.0
    checks: dict = field(default_factory=dict)

    def to_dict(self, config: Optional[dict] = None) -> dict:
        out = {
            "converged": bool(self.converged),
            "residual": float(self.residual),
            "history": {"newton": self.newton_history, "sweep": self.sweep_history},
            "rate": self.rate,
            "wall_ms": float(self.wall_ms),
            "tolerance": float(self.tolerance),
        }
        if self.message:
            out["message"] = self.message
        if self.checks:
            out["checks"] = self.checks
        if config is not None:
            out["config"] = config
        return out


# ---------------------------------------------------------------- mesh

def _local_scale(domain: DomainSpec1D, x: float) -> float:
    return min(domain.width, x) if x > 0 else domain.width


def clustered_ends(domain: DomainSpec1D) -> tuple[bool, bool]:
    """Ends at a finite geometric boundary get graded cells."""
    graded = (BLOW_UP, DIRICHLET)
    return domain.left.kind in graded, domain.right.kind in graded


def make_mesh(domain: DomainSpec1D, opts: SolveOptions = SolveOptions(),
              cluster: Optional[tuple[bool, bool]] = None) -> np.ndarray:
    """Nodes with cells growing geometrically away from clustered ends, capped in the middle."""
    n_cells = opts.nodes - 1
    width = domain.width
    left, right = clustered_ends(domain) if cluster is None else cluster
    q = opts.grading_ratio
    i = np.arange(n_cells)
    caps = []
    if left:
        caps.append(opts.first_cell * _local_scale(domain, domain.lo) * q ** i)
    if right:
        caps.append(opts.first_cell * _local_scale(domain, domain.hi) * q ** i[::-1])
    if not caps:
        return np.linspace(domain.lo, domain.hi, opts.nodes)
    with np.errstate(over="ignore"):
        grown = np.minimum.reduce(caps)

    def total(hmax):
        return np.minimum(grown, hmax).sum()

    lo, hi = 0.0, width
    if total(hi) < width:
        raise ValueError("too few nodes for the requested grading")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < width:
            lo = mid
        else:
            hi = mid
    cells = np.minimum(grown, hi)
    cells *= width / cells.sum()
    mesh = domain.lo + np.concatenate([[0.0], np.cumsum(cells)])
    mesh[-1] = domain.hi
    return mesh


# ---------------------------------------------------------------- discrete operator

@dataclass
class _Stencil:
    """Five-point weights at the equation nodes, columns ordered ``i-2 .. i+2``.

    ``d1`` and ``d2`` are the central three-point formulas (exact on
    quadratics).  ``back`` and ``fwd`` are second-order one-sided slopes,
    also exact on quadratics; they feed the upwinded first-order terms.
    """

    rows: np.ndarray       # node index of each equation
    cols: np.ndarray       # [rows, 5] node indices (ghost-reflected at a ball center)
    d1: np.ndarray
    d2: np.ndarray
    back: np.ndarray
    fwd: np.ndarray
    coord: np.ndarray
    center: bool           # first equation is the ball center


def _stencil(mesh: np.ndarray, center: bool) -> _Stencil:
    N = mesh.size
    idx = np.arange(1, N - 1)
    M = idx.size
    hm = mesh[idx] - mesh[idx - 1]
    hp = mesh[idx + 1] - mesh[idx]
    s = hm + hp
    d1 = np.zeros((M, 5))
    d2 = np.zeros((M, 5))
    d1[:, 1:4] = np.stack([-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)], axis=1)
    d2[:, 1:4] = np.stack([2 / (hm * s), -2 / (hm * hp), 2 / (hp * s)], axis=1)
    back = d1.copy()
    fwd = d1.copy()
    # one-sided three-point slopes wherever two cells exist on that side
    j = idx >= 2
    h1 = mesh[idx[j] - 1] - mesh[idx[j] - 2]
    h2 = hm[j]
    back[j] = 0.0
    back[j, 0] = h2 / (h1 * (h1 + h2))
    back[j, 1] = -(h1 + h2) / (h1 * h2)
    back[j, 2] = (h1 + 2 * h2) / (h2 * (h1 + h2))
    j = idx <= N - 3
    h1 = hp[j]
    h2 = mesh[idx[j] + 2] - mesh[idx[j] + 1]
    fwd[j] = 0.0
    fwd[j, 2] = -(2 * h1 + h2) / (h1 * (h1 + h2))
    fwd[j, 3] = (h1 + h2) / (h1 * h2)
    fwd[j, 4] = -h1 / (h2 * (h1 + h2))
    coord = mesh[idx]
    if center:
        h1 = mesh[1] - mesh[0]
        # ghost node w_{-1} = w_1; both w' and the tangential quotient w'/r are folded into w''(0)
        idx = np.concatenate([[0], idx])
        zero = np.zeros((1, 5))
        row = zero.copy()
        row[0, 2:4] = [-2 / h1 ** 2, 2 / h1 ** 2]
        d1, back, fwd = (np.vstack([zero, a]) for a in (d1, back, fwd))
        d2 = np.vstack([row, d2])
        coord = np.concatenate([[0.0], coord])
    cols = np.clip(np.abs(idx[:, None] + np.arange(-2, 3)), 0, N - 1)
    return _Stencil(idx, cols, d1, d2, back, fwd, coord, center)


def _pick(cond, a, b):
    # elementwise choice that carries complex-step perturbations through
    return np.where(cond, a, b)


def _upwind(pb, pf, pstar, H):
    """Monotone evaluation of a convex ``H(p)`` with minimizer ``pstar``.

    ``max(H(max(pb, p*)), H(min(pf, p*)))``: nondecreasing in the backward
    slope and nonincreasing in the forward slope, and equal to ``H(p)`` when
    both slopes agree.
    """
    hi = H(_pick(pb.real > pstar.real, pb, pstar))
    lo = H(_pick(pf.real < pstar.real, pf, pstar))
    return _pick(hi.real >= lo.real, hi, lo)


class _Discretization:
    """Nodal residual ``f(lambda) - 1`` on a fixed mesh.

    The radial eigenvalue ``w'^2/2 - w w''`` uses central differences.  The
    first-order eigenvalues (``w'^2/2 - w w'/r`` and, for cylinders,
    ``w'^2/2``) are convex in ``w'`` and are upwinded, which keeps kinks of
    the discrete profile (as occur for ``ell >= 2`` on annuli) well behaved.
    """

    def __init__(self, mesh: np.ndarray, domain: DomainSpec1D, f: CurvatureFunction):
        self.mesh = mesh
        self.domain = domain
        self.f = f
        self.sym = domain.symmetry
        self.mults = self.sym.multiplicities(f.n)
        self.center = domain.left.kind == CENTER
        N = mesh.size
        self.unknowns = np.arange(0 if self.center else 1, N - 1)
        self.st = _stencil(mesh, self.center)

    def neighbors(self, w):
        return w[self.st.cols]

    def blocks(self, w: np.ndarray) -> np.ndarray:
        st = self.st
        nb = self.neighbors(w)
        val = nb[:, 2]
        # weights sum to zero, so difference against the center value: exact on
        # constants and rounding scales with w' rather than w
        dw = nb - val[:, None]
        d1 = np.sum(st.d1 * dw, axis=1)
        d2 = np.sum(st.d2 * dw, axis=1)
        pb = np.sum(st.back * dw, axis=1)
        pf = np.sum(st.fwd * dw, axis=1)
        coord = st.coord.astype(w.dtype)
        if self.center:
            coord = coord.copy()
            coord[0] = 1.0
        rad = 0.5 * d1 * d1 - val * d2
        tan = _upwind(pb, pf, val / coord, lambda p: 0.5 * p * p - val * p / coord)
        if self.sym.kind == SPHERICAL:
            out = np.stack([rad, tan], axis=-1)
        else:
            flat = _upwind(pb, pf, np.zeros_like(val), lambda p: 0.5 * p * p)
            out = np.stack([rad, tan, flat], axis=-1)
        if self.center:
            # at r = 0 every direction is radial: lambda = -w w''(0)
            out[0, :] = -val[0] * d2[0]
        return out

    def eigs(self, w):
        return expand_blocks(self.blocks(w), self.mults)

    def residual(self, w):
        return self.f.values(self.eigs(w)) - 1.0

    def margins(self, w):
        return self.f.margins(self.eigs(w))

    def admissible(self, w) -> bool:
        if np.any(w[self.unknowns] <= 0) or not np.all(np.isfinite(w)):
            return False
        return bool(np.all(self.margins(w) >= 0))

    def jacobian_banded(self, w: np.ndarray) -> np.ndarray:
        """Pentadiagonal Jacobian by complex-step perturbation, five colors.

        Returned in the ``(2, 2)`` band layout of ``scipy.linalg.solve_banded``.
        """
        unk = self.unknowns
        M = unk.size
        ab = np.zeros((5, M))
        for color in range(5):
            cols = np.arange(color, M, 5)
            wc = w.astype(complex)
            wc[unk[cols]] += 1j * COMPLEX_STEP
            dG = self.residual(wc).imag / COMPLEX_STEP
            for j in cols:
                lo, hi = max(j - 2, 0), min(j + 3, M)
                ab[2 + np.arange(lo, hi) - j, j] = dG[lo:hi]
        return ab


# ---------------------------------------------------------------- initial iterates

def _piece_eigs(disc: _Discretization, kind: str, A: float, s: float):
    r = disc.mesh
    if kind == "right":
        w, d1, d2 = A * (s * s - r * r) / s, -2 * A * r / s, -2 * A / s * np.ones_like(r)
    else:
        w, d1, d2 = A * (r * r - s * s) / s, 2 * A * r / s, 2 * A / s * np.ones_like(r)
    safe = np.where(r > 0, r, 1.0)
    blocks = w_blocks(w, d1, d2, safe, disc.sym)
    if kind == "right" and r[0] == 0:
        blocks[0, :] = 2 * A * A
    return w, expand_blocks(blocks, disc.mults)


def _piece(disc: _Discretization, kind: str, target: float, A: float):
    if kind == "right":
        b = disc.domain.hi
        t = target / A
        s = 0.5 * (t + math.sqrt(t * t + 4 * b * b))
    else:
        a = disc.domain.lo
        t = target / A
        s = 0.5 * (-t + math.sqrt(t * t + 4 * a * a))
    return _piece_eigs(disc, kind, A, s)


def _through_both_ends(disc: _Discretization, w_left, w_right, A_min: float):
    """The one piece ``A |r^2 - s^2| / s`` that meets both Dirichlet values.

    Its eigenvalues are at least ``2 A^2`` entrywise, so it lies inside every
    cone.  Data too close to each other give a nearly flat piece with ``f``
    near 0, a poor start; such pieces (``A < A_min / 2``) are rejected.
    """
    if w_left is None or w_left == w_right:
        return None
    a, b = disc.domain.lo, disc.domain.hi
    s2 = (w_left * b * b - w_right * a * a) / (w_left - w_right)
    if not s2 > 0:
        return None
    s = math.sqrt(s2)
    r = disc.mesh.copy()
    A = w_left * s / abs(a * a - s2)
    if A < 0.5 * A_min:
        return None
    if w_right > w_left:
        w = w_left * (r * r - s2) / (a * a - s2)
    else:
        w = w_left * (s2 - r * r) / (s2 - a * a)
    w[0], w[-1] = w_left, w_right
    return w if np.all(w[1:-1] > 0) else None


# relative scales tried for each piece when the joined guess leaves the cone
_PIECE_SCALES = np.exp(np.linspace(0.0, math.log(16.0), 97))


def canonical_guess(disc: _Discretization, w_left: Optional[float], w_right: float) -> np.ndarray:
    """Minimum of canonical-type sub-solution pieces matching each Dirichlet end.

    The right piece is ``A (s^2 - r^2)/s`` and the left piece ``A (r^2 - s^2)/s``;
    for spherical symmetry with ``A = alpha^(-2/(n-2))`` these are the ball
    and exterior solutions.  ``A`` grows until every piece is a sub-solution
    on the mesh.

    Where the two pieces cross, the discrete first difference straddles a
    kink.  For ``ell >= 2`` the tangential eigenvalue there can dip below
    zero, so the piece scales are searched until the joined profile is
    admissible node by node.
    """
    f = disc.f
    A = alpha_constant(f) ** (-2.0 / (f.n - 2))
    for _ in range(200):
        right = _piece(disc, "right", w_right, A)
        pieces = [right] if w_left is None else [right, _piece(disc, "left", w_left, A)]
        if all(np.all(f.margins(lam) > 0) and np.all(f.values(lam) >= 1 - 1e-12) for _, lam in pieces):
            break
        A *= 1.25
    else:
        raise InadmissibleInitialization("no canonical sub-solution piece fits the mesh")
    single = _through_both_ends(disc, w_left, w_right, A)
    if single is not None and disc.admissible(single):
        return single
    if w_left is None:
        w = right[0].copy()
        w[-1] = w_right
        if disc.admissible(w):
            return w
        raise InadmissibleInitialization("canonical initial iterate leaves the closed cone")
    for a_right in _PIECE_SCALES:
        R = _piece(disc, "right", w_right, A * a_right)[0]
        for a_left in _PIECE_SCALES:
            L = _piece(disc, "left", w_left, A * a_left)[0]
            if R[0] < w_left or L[-1] < w_right:
                continue
            w = np.minimum(L, R)
            w[0], w[-1] = w_left, w_right
            if disc.admissible(w):
                return w
    raise InadmissibleInitialization("could not build an admissible canonical initial iterate")


# ---------------------------------------------------------------- Newton

def _rounding_floor(ab: np.ndarray, w_unk: np.ndarray) -> np.ndarray:
    """Smallest |G_i| a float64 iterate can be expected to reach, row by row.

    Each ``w_j`` is stored to half an ulp, so no iterate pins row i below
    about ``eps * sum_j |J_ij| |w_j|``.
    """
    aw = np.abs(w_unk)
    M = aw.size
    rows = np.zeros(M)
    for b in range(5):
        off = b - 2
        # ab[b, j] = J[j + off, j]
        j = np.arange(max(0, -off), min(M, M - off))
        rows[j + off] += np.abs(ab[b, j]) * aw[j]
    return 8 * np.finfo(float).eps * rows


def _newton(disc: _Discretization, w0: np.ndarray, opts: SolveOptions, monotone: bool = True):
    """Damped Newton; returns (w, history, converged, message, effective_tol).

    Converged means ``|G_i| <= max(newton_tol, min(floor_i, floor_cap))`` in every
    row, where ``floor_i`` is the rounding floor of row i.  Each
    accepted iterate keeps every node in the closed cone; a step is halved
    until the iterate is admissible and ``||G||_2`` decreases.  With
    ``monotone=False`` the longest admissible step is taken when no halving
    decreases ``||G||_2``: the upwind switch makes G nonsmooth where a kink
    moves to the next cell, and the descent test stalls there.
    """
    w = np.array(w0, dtype=float)
    unk = disc.unknowns
    if not disc.admissible(w):
        raise InadmissibleInitialization("initial iterate leaves the closed cone")
    G = disc.residual(w)
    history = [float(np.max(np.abs(G)))]
    tol = opts.newton_tol
    for it in range(opts.max_newton + 1):
        if history[-1] <= opts.newton_tol:
            return w, history, True, "", tol
        ab = disc.jacobian_banded(w)
        row_tol = np.maximum(opts.newton_tol, np.minimum(_rounding_floor(ab, w[unk]), opts.floor_cap))
        tol = float(row_tol.max())
        if np.all(np.abs(G) <= row_tol):
            return w, history, True, "", tol
        if it == opts.max_newton:
            break
        try:
            dw = solve_banded((2, 2), ab, -G)
        except (np.linalg.LinAlgError, ValueError) as err:
            return w, history, False, f"singular Jacobian: {err}", tol
        norm0 = np.linalg.norm(G)
        t = 1.0
        fallback = None
        for _ in range(opts.max_halvings + 1):
            trial = w.copy()
            trial[unk] += t * dw
            if disc.admissible(trial):
                Gt = disc.residual(trial)
                if np.linalg.norm(Gt) < norm0:
                    break
                if fallback is None:
                    fallback = trial, Gt
            t *= 0.5
        else:
            if monotone or fallback is None:
                return w, history, False, "step halving exhausted", tol
            trial, Gt = fallback
        w, G = trial, Gt
        history.append(float(np.max(np.abs(G))))
    return w, history, False, "Newton iteration limit reached", tol


def _w_of(c: float, n: int) -> float:
    return c ** (-2.0 / (n - 2))


def _boundary_w(domain: DomainSpec1D, n: int, c_blow: Optional[float]):
    vals = []
    for _, _, b in domain.ends():
        if b.kind == CENTER:
            vals.append(None)
        elif b.kind == BLOW_UP:
            if c_blow is None:
                raise ValueError("blow-up ends need a sweep value c")
            vals.append(_w_of(c_blow, n))
        else:
            vals.append(_w_of(b.value, n))
    return vals


def _solve_on_mesh(disc, opts, w_left, w_right, initial=None):
    if initial is None:
        w0 = canonical_guess(disc, w_left, w_right)
    else:
        w0 = np.array(initial, dtype=float)
        if w_left is not None:
            w0[0] = w_left
        w0[-1] = w_right
    return _newton(disc, w0, opts)


def solve_dirichlet(domain: DomainSpec1D, f: CurvatureFunction, opts: SolveOptions = SolveOptions(),
                    initial: Optional[np.ndarray] = None, mesh: Optional[np.ndarray] = None):
    """Solve with constant Dirichlet data at every finite end.

    Endpoint roles must be ``dirichlet`` or ``truncated-far-field`` (a ball's
    center is a symmetry node).  Returns ``(profile, report)``; a failed
    solve returns the last admissible iterate with ``report.converged`` false.
    """
    for _, _, b in domain.ends():
        if b.kind == BLOW_UP:
            raise ValueError("solve_dirichlet takes finite data; use perron_sweep for blow-up ends")
    t0 = time.perf_counter()
    mesh = make_mesh(domain, opts) if mesh is None else np.asarray(mesh, dtype=float)
    disc = _Discretization(mesh, domain, f)
    w_left, w_right = _boundary_w(domain, f.n, None)
    w, hist, ok, msg, tol = _solve_on_mesh(disc, opts, w_left, w_right, initial)
    report = SolveReport(ok, hist[-1], [hist], [], {}, 1e3 * (time.perf_counter() - t0), msg, tol)
    return Profile1D(mesh, w, domain, f), report


def _interior_change(u_new, u_old):
    return float(np.max(np.abs(u_new - u_old) / (1.0 + u_old)))


def perron_sweep(domain: DomainSpec1D, f: CurvatureFunction, opts: SolveOptions = SolveOptions(),
                 fit_rates: bool = True, mesh: Optional[np.ndarray] = None):
    """Maximal solution by letting the data at blow-up ends go to infinity.

    Solves with ``c_j = c0 * 2^j`` at every blow-up end, warm-starting each
    solve from the previous profile (joined with the canonical sub-solution
    for ``c_j``).  Data too small to admit a solution are skipped by doubling
    c until the first solve converges.  The sweep checks
    ``u_{c_{j+1}} >= u_{c_j}`` nodewise and stops when the relative
    sup-change over interior nodes drops below ``sweep_tol``.

    Exterior domains are solved on their Kelvin image (see
    :func:`_exterior_sweep`).
    """
    if not any(b.kind == BLOW_UP for _, _, b in domain.ends()):
        raise ValueError("perron_sweep needs at least one blow-up end")
    if domain.shape == "exterior":
        return _exterior_sweep(domain, f, opts, fit_rates)
    t0 = time.perf_counter()
    n = f.n
    mesh = make_mesh(domain, opts) if mesh is None else np.asarray(mesh, dtype=float)
    disc = _Discretization(mesh, domain, f)
    inner = disc.unknowns
    sweep, newton = [], []
    w_prev = None
    # blow-up data below the fixed data only slow the start down
    fixed = [b.value for _, _, b in domain.ends() if b.kind in (DIRICHLET, FAR_FIELD)]
    c = max([opts.c0] + fixed)
    converged = False
    message = ""
    c_done = None
    u_last = None
    starts = 0
    tol = opts.newton_tol
    for j in range(opts.max_doublings + 1):
        w_prev, hist, ok, msg, substeps, tol = _sweep_step(disc, opts, w_prev, c_done, c)
        newton.append(hist)
        if not ok:
            if c_done is None and starts < opts.max_start_doublings:
                # small data may admit no admissible solution; start higher
                starts += 1
                sweep.append({"c": c, "skipped": msg})
                c *= 2.0
                continue
            message = f"no convergence at c = {c:.6g}: {msg}"
            break
        u_new = _u_of(w_prev, n)
        entry = {"c": c, "newton_iterations": len(hist) - 1, "substeps": substeps, "tolerance": tol}
        if c_done is not None:
            viol = np.max((u_last - u_new)[inner] - opts.monotone_tol * (1.0 + u_last[inner]))
            if viol > 0:
                report = SolveReport(False, hist[-1], newton, sweep, {}, 0.0,
                                     f"monotonicity violated at c = {c:.6g} by {viol:.3g}")
                raise MonotonicityViolation(report.message, report)
            entry["change"] = _interior_change(u_new[inner], u_last[inner])
        sweep.append(entry)
        u_last = u_new
        c_done = c
        if "change" in entry and entry["change"] < opts.sweep_tol:
            converged = True
            break
        c *= 2.0
    else:
        message = "sweep schedule exhausted before the interior settled"
    if w_prev is None:
        report = SolveReport(False, float("inf"), newton, sweep, {}, 1e3 * (time.perf_counter() - t0),
                             message, tol)
        raise NonConvergence(message, report)
    w_final = w_prev.copy()
    for side, _, b in domain.ends():
        if b.kind == BLOW_UP:
            w_final[0 if side == "left" else -1] = 0.0
    profile = Profile1D(mesh, w_final, domain, f, {"c_final": c_done})
    report = SolveReport(converged, newton[-1][-1] if newton else float("nan"), newton, sweep, {},
                         0.0, message, tol)
    if not converged:
        report.wall_ms = 1e3 * (time.perf_counter() - t0)
        raise NonConvergence(message, report, profile)
    if fit_rates:
        for side, _, b in domain.ends():
            if b.kind == BLOW_UP:
                coef, diag = boundary_rate(profile, side)
                report.rate[side] = {"coefficient": coef, **diag}
    report.wall_ms = 1e3 * (time.perf_counter() - t0)
    return profile, report


def _exterior_sweep(domain: DomainSpec1D, f: CurvatureFunction, opts: SolveOptions, fit_rates: bool):
    """Sweep on ``R < r < L`` by inversion in the sphere ``r = R``.

    In w the far field grows like ``r^2`` and every eigenvalue is a
    cancellation between terms ``r^2`` times larger than itself, which
    shrinks Newton's convergence region to nothing.  The inversion maps the
    shell onto ``R^2/L < r < R`` with the blow-up sphere fixed, where the same
    solution is a smooth ball-type profile; the result is mapped back.

    Small sweep data on the image can sit on a branch that later breaks
    monotonicity or stalls Newton.  The maximal solution does not depend on
    where the sweep starts, so a failed sweep restarts from a larger c0;
    ``report.checks["restarts"]`` lists the abandoned starts.
    """
    if domain.left.kind != BLOW_UP or domain.right.kind not in (DIRICHLET, FAR_FIELD):
        raise ValueError("an exterior domain blows up at r = R and has data at r = L")
    R, L = domain.lo, domain.hi
    m = f.n - 2
    image = DomainSpec1D(domain.symmetry, "annulus", R * R / L, R,
                         dirichlet((L / R) ** m * domain.right.value), blow_up())
    # the image of the far end is a smooth interior sphere: no grading there
    mesh = make_mesh(image, opts, cluster=(False, True))
    restarts = []
    c0 = opts.c0
    while True:
        try:
            p_hat, report = perron_sweep(image, f, replace(opts, c0=c0), fit_rates=False, mesh=mesh)
            break
        except (NonConvergence, MonotonicityViolation) as err:
            if len(restarts) >= opts.exterior_restarts:
                raise
            restarts.append({"c0": c0, "message": str(err)})
            c0 *= opts.exterior_c0_step
    if restarts:
        report.checks["restarts"] = restarts
    mesh = R * R / p_hat.mesh[::-1]
    mesh[0], mesh[-1] = R, L
    w = (mesh / R) ** 2 * p_hat.w[::-1]
    profile = Profile1D(mesh, w, domain, f, {**p_hat.meta, "solved_on": "kelvin image"})
    if fit_rates:
        coef, diag = boundary_rate(profile, "left")
        report.rate["left"] = {"coefficient": coef, **diag}
    return profile, report


def exterior_truncation_check(R: float, f: CurvatureFunction, opts: SolveOptions = SolveOptions(),
                              L_factor: float = 100.0, tol: float = 1e-6, center=None):
    """Solve the exterior problem truncated at ``L`` and at ``2L``.

    Far-field data come from the closed-form exterior solution.  Returns the
    ``L`` profile and its report; ``report.checks["truncation"]`` holds the
    relative change of u between the two runs on ``R (1 + 1e-2) <= r <= L``
    and is flagged when it exceeds ``tol``.
    """
    from .canonical import exterior_solution

    exact = exterior_solution(f, R, center)
    L = L_factor * R
    p1, rep1 = perron_sweep(exterior_domain(R, L, float(exact.radial(L)), center), f, opts)
    p2, _ = perron_sweep(exterior_domain(R, 2 * L, float(exact.radial(2 * L)), center), f, opts)
    sel = (p1.mesh >= R * (1 + 1e-2)) & (p1.mesh <= L)
    # w is close to a quadratic in r, which a not-a-knot spline reproduces
    w2 = CubicSpline(p2.mesh, p2.w)(p1.mesh[sel])
    u2 = _u_of(w2, f.n)
    change = float(np.max(np.abs(p1.u[sel] / u2 - 1.0)))
    rep1.checks["truncation"] = {"L": L, "L_doubled": 2 * L, "change": change,
                                 "tolerance": tol, "flagged": bool(change >= tol)}
    return p1, rep1


def _u_of(w, n):
    return w ** (-(n - 2) / 2.0)


def _warm_starts(disc, w_prev, wl, wr):
    """Admissible starting iterates for new end data, most promising first.

    The previous profile with the change in end data lifted linearly (path
    following), the previous profile with only its end values replaced, its
    minimum with the canonical guess, and the canonical guess alone.
    """
    def with_ends(w):
        w = np.array(w)
        if wl is not None:
            w[0] = wl
        w[-1] = wr
        return w

    if w_prev is not None:
        # lift the change in end data linearly across the domain
        r = disc.mesh
        x = (r - r[0]) / (r[-1] - r[0])
        dl = 0.0 if wl is None else wl - w_prev[0]
        lifted = with_ends(w_prev + (1 - x) * dl + x * (wr - w_prev[-1]))
        for w in (lifted, with_ends(w_prev)):
            if disc.admissible(w):
                yield w
    if disc.sym.kind != SPHERICAL:
        # the canonical pieces are spherical; the model is affine in rho
        if w_prev is None and wl is not None:
            r = disc.mesh
            w = wl + (wr - wl) * (r - r[0]) / (r[-1] - r[0])
            if disc.admissible(w):
                yield w
        return
    try:
        guess = canonical_guess(disc, wl, wr)
    except InadmissibleInitialization:
        return
    if w_prev is not None:
        w = with_ends(np.minimum(guess, w_prev))
        if disc.admissible(w):
            yield w
    yield guess


def _data_homotopy(disc, opts, wl, wr):
    """Reach end data ``(wl, wr)`` from data the canonical piece solves exactly.

    Used when exactly one end blows up.  The canonical piece matched at the
    blow-up end fixes its own value at the other end; that value is then
    moved to the target in adaptive steps, each solved by Newton from the
    previous solution.
    """
    dom = disc.domain
    roles = (dom.left.kind, dom.right.kind)
    if wl is None or roles.count(BLOW_UP) != 1 or disc.sym.kind != SPHERICAL:
        return None
    f = disc.f
    A = alpha_constant(f) ** (-2.0 / (f.n - 2))
    blow_right = roles[1] == BLOW_UP
    piece = _piece(disc, "right" if blow_right else "left", wr if blow_right else wl, A)[0].copy()
    fixed_idx = 0 if blow_right else -1
    start_val, target = piece[fixed_idx], (wl if blow_right else wr)
    if not start_val > 0:
        return None
    piece[0 if not blow_right else -1] = wr if blow_right else wl
    if not disc.admissible(piece):
        return None
    w, hist, ok, msg, tol = _newton(disc, piece, opts)
    if not ok:
        return None
    tau, step = 0.0, 0.25
    history = list(hist)
    while tau < 1.0 and step > 1e-4:
        t = min(1.0, tau + step)
        trial = w.copy()
        trial[fixed_idx] = start_val + t * (target - start_val)
        res = _newton(disc, trial, opts) if disc.admissible(trial) else None
        if res is not None and res[2]:
            w, tau = res[0], t
            history.extend(res[1])
            tol = res[4]
            step *= 2.0
        else:
            step *= 0.5
    if tau < 1.0:
        return None
    return w, history, True, "", tol


def _solve_from_starts(disc, opts, w_prev, wl, wr):
    result = None
    first = None
    for start in _warm_starts(disc, w_prev, wl, wr):
        first = start if first is None else first
        result = _newton(disc, start, opts)
        if result[2]:
            return result
    if w_prev is not None and first is not None:
        # a kink crossing into the next cell during continuation
        retry = _newton(disc, first, opts, monotone=False)
        if retry[2]:
            return retry
    # later steps stay on the warm-started branch
    if w_prev is None:
        homotopy = _data_homotopy(disc, opts, wl, wr)
        if homotopy is not None:
            return homotopy
    if result is None:
        return w_prev, [float("inf")], False, "no admissible starting iterate", opts.newton_tol
    return result


def _sweep_step(disc, opts, w_prev, c_prev, c):
    """One sweep solve at data c, subdividing the step in c if Newton fails."""
    n = disc.f.n
    targets = [c]
    done_c, done_w = c_prev, w_prev
    hist_all = []
    substeps = 0
    while targets:
        ct = targets[-1]
        wl, wr = _boundary_w(disc.domain, n, ct)
        w, hist, ok, msg, tol = _solve_from_starts(disc, opts, done_w, wl, wr)
        hist_all = hist
        if ok:
            targets.pop()
            done_c, done_w = ct, w
            continue
        if done_c is None or substeps >= opts.max_substeps:
            return done_w, hist_all, False, msg, substeps, tol
        substeps += 1
        targets.append(math.sqrt(done_c * ct))
    return done_w, hist_all, True, "", substeps, tol


# ---------------------------------------------------------------- diagnostics

def residual(p: Profile1D) -> float:
    """Max over interior nodes of |f(lambda) - 1| (infinite if a node leaves the cone)."""
    disc = _Discretization(p.mesh, p.domain, p.f)
    w = np.asarray(p.w, dtype=float)
    if not disc.admissible(w):
        return float("inf")
    return float(np.max(np.abs(disc.residual(w))))


def boundary_rate(p: Profile1D, end: str = "left", window=(5.0, 100.0)):
    """Fit ``dist^((n-2)/2) u ~ a + b dist`` over ``dist in [5 h, 100 h]``.

    ``h`` is the first cell at that end.  Returns ``(a, diagnostics)``.
    """
    b = p.domain.left if end == "left" else p.domain.right
    if b.kind != BLOW_UP:
        raise ValueError(f"the {end} end is not a blow-up boundary")
    mesh, w = p.mesh, p.w
    if end == "left":
        dist = mesh - mesh[0]
        h = mesh[1] - mesh[0]
    else:
        dist = mesh[-1] - mesh
        h = mesh[-1] - mesh[-2]
    lo, hi = window[0] * h, window[1] * h
    if hi > p.domain.width:
        raise ValueError("rate-fit window leaves the mesh")
    sel = (dist >= lo) & (dist <= hi)
    if sel.sum() < 3:
        raise ValueError("rate-fit window holds fewer than 3 nodes")
    d = dist[sel]
    y = d ** ((p.n - 2) / 2.0) * _u_of(w[sel], p.n)
    X = np.stack([np.ones_like(d), d], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    fit_rms = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return float(coef[0]), {"slope": float(coef[1]), "window": [float(lo), float(hi)],
                            "points": int(sel.sum()), "rms": fit_rms}


def distance_to_blowup(p: Profile1D) -> np.ndarray:
    """Distance from each node to the nearest blow-up end (inf if none)."""
    d = np.full(p.mesh.size, np.inf)
    if p.domain.left.kind == BLOW_UP:
        d = np.minimum(d, p.mesh - p.domain.lo)
    if p.domain.right.kind == BLOW_UP:
        d = np.minimum(d, p.domain.hi - p.mesh)
    return d


def ceiling_ratio(p: Profile1D) -> float:
    """Max of ``u / (alpha dist^(-(n-2)/2))`` over interior nodes.

    For ball and annulus domains ``dist`` is the distance to the domain's
    boundary spheres, whatever their role.
    """
    d = np.minimum(p.mesh - p.domain.lo if p.domain.left.kind != CENTER else np.inf,
                   p.domain.hi - p.mesh)
    inner = slice(1, -1) if p.domain.left.kind != CENTER else slice(0, -1)
    return float(np.max(p.u[inner] / upper_bound(d[inner], p.f)))


def verify_comparison(inner: Profile1D, outer: Profile1D, rtol: float = 1e-8) -> bool:
    """Check ``u_inner >= u_outer`` on the smaller of two nested domains.

    Values of the second profile are carried onto the first profile's nodes by
    monotone cubic interpolation.  If the second domain is the smaller one
    the comparison still runs on it (and typically fails for maximal
    solutions); domains that are not nested raise ``ValueError``.
    """
    if inner.f != outer.f:
        raise ValueError("profiles solve different equations")
    a, b = inner.domain, outer.domain
    if b.contains(a):
        small, big, want_small_larger = inner, outer, True
    elif a.contains(b):
        small, big, want_small_larger = outer, inner, False
    else:
        raise ValueError("domains are not nested")
    x = small.mesh
    keep = (x >= big.mesh[0]) & (x <= big.mesh[-1])
    ub = big.u
    finite = np.isfinite(ub)
    interp = PchipInterpolator(big.mesh[finite], np.log(ub[finite]), extrapolate=False)
    u_big = np.exp(interp(x[keep]))
    u_small = small.u[keep]
    ok = np.isfinite(u_big) & np.isfinite(u_small)
    u_big, u_small = u_big[ok], u_small[ok]
    if want_small_larger:
        return bool(np.all(u_small >= u_big - rtol * (1.0 + u_big)))
    return bool(np.all(u_big >= u_small - rtol * (1.0 + u_small)))


# ---------------------------------------------------------------- exhaustion experiments

@dataclass
class ExhaustionReport:
    """Per-epsilon window values from a sequence of sweeps."""

    eps: list
    window_values: list
    # relative change between consecutive epsilons
    changes: list
    monotone: bool
    reports: list = field(default_factory=list)

    def to_dict(self, config: Optional[dict] = None) -> dict:
        out = {"eps": self.eps, "window_values": self.window_values, "changes": self.changes,
               "monotone": self.monotone,
               "runs": [r.to_dict() for r in self.reports]}
        if config is not None:
            out["config"] = config
        return out


def _check_schedule(eps_schedule, limit):
    eps = [float(e) for e in eps_schedule]
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_schedule must be positive and strictly decreasing")
    if eps[0] >= limit:
        raise ValueError(f"eps must stay below {limit}")
    return eps


def window_sup(p: Profile1D, lo: float, hi: float, points: int = 2001) -> float:
    """Sup of u over ``lo <= r <= hi`` on a fixed grid, independent of the mesh."""
    x = np.linspace(lo, hi, points)
    # linear in w: the profile may carry a kink inside the window
    return float(np.max(_u_of(np.interp(x, p.mesh, p.w), p.n)))


def exhaust_punctured(R: float, f: CurvatureFunction, eps_schedule, opts: SolveOptions = SolveOptions(),
                      rtol: float = 1e-8) -> ExhaustionReport:
    """Maximal solutions on ``eps < r < R`` as the puncture shrinks.

    Each annulus blows up at both spheres.  The sup of u over the fixed
    window ``R/4 <= r <= R/2`` should decrease as eps decreases (larger
    domains carry smaller maximal solutions) and settle when isolated points
    are removable for the cone.
    """
    from .cone import EXTERIOR, locate, model_vector

    if locate(model_vector(f.n, f.n), f).tag != EXTERIOR:
        raise ValueError("(1, -1, ..., -1) must lie outside the cone for the puncture to be removable")
    eps = _check_schedule(eps_schedule, R / 4)
    values, reports = [], []
    for e in eps:
        p, rep = perron_sweep(DomainSpec1D(_spherical(), "annulus", e, R, blow_up(), blow_up()), f, opts)
        values.append(window_sup(p, R / 4, R / 2))
        reports.append(rep)
    changes = [abs(b / a - 1.0) for a, b in zip(values, values[1:])]
    monotone = all(b <= a + rtol * (1.0 + a) for a, b in zip(values, values[1:]))
    return ExhaustionReport(eps, values, changes, monotone, reports)


def cylinder_contrast(f: CurvatureFunction, k: int, eps_schedule, L: float = 1.0,
                      opts: SolveOptions = SolveOptions()) -> ExhaustionReport:
    """Growth of ``u(2 eps)`` on slabs ``eps < rho < L`` around a flat codimension-k set.

    The far end is pinned to the model ``c rho^(-(n-2)/2)``.  For a regular
    set the value near the singular set grows like ``eps^(-(n-2)/2)``;
    ``changes`` holds the observed growth ratio divided by that prediction,
    minus one.
    """
    from .canonical import cylinder_model

    model = cylinder_model(f, k)
    eps = _check_schedule(eps_schedule, L / 2)
    values, reports = [], []
    for e in eps:
        p, rep = perron_sweep(slab_domain(e, L, k, float(model.radial(L))), f, opts)
        # w is smooth away from the blow-up end, so interpolate w rather than u
        values.append(float(_u_of(CubicSpline(p.mesh, p.w)(2 * e), f.n)))
        reports.append(rep)
    h = (f.n - 2) / 2.0
    changes = [(b / a) / (e0 / e1) ** h - 1.0 for a, b, e0, e1 in zip(values, values[1:], eps, eps[1:])]
    monotone = all(b >= a for a, b in zip(values, values[1:]))
    return ExhaustionReport(eps, values, changes, monotone, reports)
