"""Command-line front end.

Subcommands: solve, classify, table, residual, kelvin-check, punctured.
Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence.

Every subcommand accepts ``--config FILE`` (JSON, or TOML when a TOML reader
is available).  Keys are the long flag names with dashes or underscores.
Explicit flags override the file, which overrides the built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .canonical import cylinder_model, exterior_solution, kelvin_check
from .cone import RAW, DEGREE_ONE, CurvatureFunction
from .domain import (BLOW_UP, Boundary, DomainSpec1D, Profile1D, annulus, ball, blow_up,
                     cylindrical, dirichlet, far_field, spherical)
from .regularity import classify, table_csv, threshold_table
from .serialize import read_profile, report_json, write_profile, write_report
from .solver import (NonConvergence, SolveOptions, SolverError, cylinder_contrast,
                     exhaust_punctured, perron_sweep, residual, solve_dirichlet)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3

# defaults for every flag that may also come from a config file
DEFAULTS = {
    "n": None,
    "sigma": None,
    "normalization": RAW,
    "domain": "ball",
    "R": 1.0,
    "a": 0.5,
    "b": 1.0,
    "L": None,
    "eps": None,
    "k": None,
    "c": None,
    "far": None,
    "sweep": False,
    "nodes": 2001,
    "newton_tol": 1e-10,
    "max_newton": 50,
    "c0": 10.0,
    "sweep_tol": 1e-8,
    "grading_ratio": 1.05,
    "profile": "profile.csv",
    "report": "report.json",
    "plot": None,
    "timing": False,
    "out": None,
    "n_min": 3,
    "n_max": 50,
    "radii": 100,
    "h": 1e-3,
    "input": None,
    "eps_schedule": None,
    "json": False,
}


class InvalidInput(ValueError):
    pass


def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InvalidInput(f"config file {path} not found")
    text = p.read_text()
    if p.suffix == ".toml":
        try:
            import tomllib
        except ImportError:
            try:
                import tomli as tomllib
            except ImportError:
                raise InvalidInput("TOML config needs Python 3.11+ or tomli; use JSON") from None
        data = tomllib.loads(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise InvalidInput(f"config file {path}: {err}") from None
    if not isinstance(data, dict):
        raise InvalidInput("config file must hold a single object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _effective(args, allowed) -> dict:
    """Flags over config over defaults, restricted to the subcommand's keys."""
    cfg = _load_config(args.config)
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise InvalidInput(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    out = {}
    for key in allowed:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in cfg:
            out[key] = cfg[key]
        else:
            out[key] = DEFAULTS[key]
    return out


def _curvature(cfg) -> CurvatureFunction:
    if cfg["n"] is None or cfg["sigma"] is None:
        raise InvalidInput("--n and --sigma are required")
    return CurvatureFunction(int(cfg["n"]), int(cfg["sigma"]), cfg["normalization"])


def _options(cfg) -> SolveOptions:
    return SolveOptions(newton_tol=float(cfg["newton_tol"]), max_newton=int(cfg["max_newton"]),
                        nodes=int(cfg["nodes"]), c0=float(cfg["c0"]),
                        sweep_tol=float(cfg["sweep_tol"]), grading_ratio=float(cfg["grading_ratio"]))


def _domain(cfg, f: CurvatureFunction) -> DomainSpec1D:
    shape = cfg["domain"]
    c = cfg["c"]
    sweep = bool(cfg["sweep"]) or c is None
    if c is not None and cfg["sweep"]:
        raise InvalidInput("--c fixes Dirichlet data; it cannot be combined with --sweep")
    end = blow_up() if sweep else dirichlet(float(c))
    if shape == "ball":
        dom = ball(float(cfg["R"]))
        return dom if sweep else dom.with_roles(dom.left, end)
    if shape == "annulus":
        return annulus(float(cfg["a"]), float(cfg["b"]), end, end)
    if shape == "exterior":
        R = float(cfg["R"])
        L = 100.0 * R if cfg["L"] is None else float(cfg["L"])
        far = float(exterior_solution(f, R).radial(L)) if cfg["far"] is None else float(cfg["far"])
        return DomainSpec1D(spherical(), "exterior", R, L, end, far_field(far))
    if shape == "slab":
        if cfg["k"] is None or cfg["eps"] is None:
            raise InvalidInput("a slab needs --k and --eps")
        k = int(cfg["k"])
        L = 1.0 if cfg["L"] is None else float(cfg["L"])
        far = float(cylinder_model(f, k).radial(L)) if cfg["far"] is None else float(cfg["far"])
        return DomainSpec1D(cylindrical(k), "slab", float(cfg["eps"]), L, end, far_field(far))
    raise InvalidInput(f"unknown domain {shape!r}")


def _finish_report(doc: dict, cfg: dict) -> dict:
    if not cfg.get("timing"):
        # wall time is the one nondeterministic field
        doc["wall_ms"] = None
    doc["config"] = cfg
    return doc


# ---------------------------------------------------------------- svg

def profile_svg(profile: Profile1D, rate: dict, width: int = 640, height: int = 400) -> str:
    """log10(u) against the coordinate, with the rate-fit windows shaded."""
    x = np.asarray(profile.mesh)
    u = profile.u
    keep = np.isfinite(u) & (u > 0)
    x, y = x[keep], np.log10(u[keep])
    pad = 40
    x0, x1 = float(profile.mesh[0]), float(profile.mesh[-1])
    y0, y1 = float(y.min()), float(y.max())
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for side, info in sorted(rate.items()):
        lo, hi = info["window"]
        a, b = (x0 + lo, x0 + hi) if side == "left" else (x1 - hi, x1 - lo)
        parts.append(f'<rect x="{sx(a):.2f}" y="{pad}" width="{max(sx(b) - sx(a), 1.0):.2f}" '
                     f'height="{height - 2 * pad}" fill="#fde2b5"/>')
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
    parts.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{pts}"/>')
    parts.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>')
    parts.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>')
    parts.append(f'<text x="{width / 2}" y="{height - 8}" font-size="12" text-anchor="middle">r</text>')
    parts.append(f'<text x="12" y="{height / 2}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 12 {height / 2})">log10 u</text>')
    parts.append(f'<text x="{pad}" y="{pad - 8}" font-size="11">{x0:.4g}..{x1:.4g}, '
                 f'log10 u in [{y0:.3g}, {y1:.3g}]</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------- commands

SOLVE_KEYS = ("n", "sigma", "normalization", "domain", "R", "a", "b", "L", "eps", "k", "c", "far",
              "sweep", "nodes", "newton_tol", "max_newton", "c0", "sweep_tol", "grading_ratio",
              "profile", "report", "plot", "timing")


def cmd_solve(args) -> int:
    cfg = _effective(args, SOLVE_KEYS)
    f = _curvature(cfg)
    dom = _domain(cfg, f)
    opts = _options(cfg)
    code = EXIT_OK
    try:
        if any(b.kind == BLOW_UP for _, _, b in dom.ends()):
            profile, report = perron_sweep(dom, f, opts)
        else:
            profile, report = solve_dirichlet(dom, f, opts)
            if not report.converged:
                code = EXIT_NONCONVERGED
    except NonConvergence as err:
        profile, report, code = err.profile, err.report, EXIT_NONCONVERGED
    except SolverError as err:
        profile, report, code = None, err.report, EXIT_NONCONVERGED
    if profile is not None:
        write_profile(cfg["profile"], profile)
    doc = report.to_dict() if report is not None else {"converged": False}
    write_report(cfg["report"], _finish_report(doc, cfg))
    if cfg["plot"] and profile is not None:
        Path(cfg["plot"]).write_text(profile_svg(profile, report.rate))
    status = "converged" if code == EXIT_OK else "not converged"
    print(f"{status}: residual {doc.get('residual', float('nan')):.3e}")
    for side, info in sorted(doc.get("rate", {}).items()):
        print(f"rate {side}: {info['coefficient']:.10g}")
    return code


def cmd_classify(args) -> int:
    cfg = _effective(args, ("n", "sigma", "normalization", "k", "json"))
    f = _curvature(cfg)
    if cfg["k"] is None:
        raise InvalidInput("--k is required")
    c = classify(f, int(cfg["k"]))
    if cfg["json"]:
        sys.stdout.write(report_json({"verdict": c.verdict, "n": c.n, "ell": c.ell, "k": c.k,
                                      "margin": c.margin, "evidence": c.evidence, "config": cfg}))
    else:
        print(c.verdict)
    return EXIT_OK


def cmd_table(args) -> int:
    cfg = _effective(args, ("sigma", "n_min", "n_max", "out"))
    if cfg["sigma"] is None:
        raise InvalidInput("--sigma is required")
    lo, hi = int(cfg["n_min"]), int(cfg["n_max"])
    if lo < 3 or hi < lo:
        raise InvalidInput("need 3 <= n-min <= n-max")
    text = table_csv(threshold_table([int(cfg["sigma"])], range(lo, hi + 1)))
    if cfg["out"]:
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_residual(args) -> int:
    cfg = _effective(args, ("n", "sigma", "normalization", "domain", "k", "input"))
    f = _curvature(cfg)
    if cfg["input"] is None:
        raise InvalidInput("--input profile CSV is required")
    mesh, u = read_profile(cfg["input"])
    m = f.n - 2
    w = np.where(np.isinf(u), 0.0, np.abs(u) ** (-2.0 / m))
    shape = cfg["domain"]
    left = Boundary("center") if shape == "ball" else _role(u[0])
    if shape == "slab":
        if cfg["k"] is None:
            raise InvalidInput("a slab needs --k")
        sym = cylindrical(int(cfg["k"]))
    else:
        sym = spherical()
    dom = DomainSpec1D(sym, shape, float(mesh[0]), float(mesh[-1]), left, _role(u[-1]))
    print(f"{residual(Profile1D(mesh, w, dom, f)):.6e}")
    return EXIT_OK


def _role(u_end: float) -> Boundary:
    return blow_up() if math.isinf(u_end) else dirichlet(float(u_end))


def cmd_kelvin_check(args) -> int:
    cfg = _effective(args, ("n", "sigma", "normalization", "R", "radii", "h", "report"))
    f = _curvature(cfg)
    res = kelvin_check(f, float(cfg["R"]), int(cfg["radii"]), float(cfg["h"]))
    print(f"max pointwise relative mismatch {res['pointwise']:.3e}")
    print(f"max eigenvalue mismatch {res['eigenvalues']:.3e}")
    if args.report is not None or "report" in _load_config(args.config):
        write_report(cfg["report"], {**res, "config": cfg})
    return EXIT_OK


def cmd_punctured(args) -> int:
    cfg = _effective(args, ("n", "sigma", "normalization", "R", "k", "L", "eps_schedule", "nodes",
                            "newton_tol", "max_newton", "c0", "sweep_tol", "grading_ratio",
                            "report", "timing"))
    f = _curvature(cfg)
    opts = _options(cfg)
    sched = cfg["eps_schedule"]
    if sched is None:
        sched = [1e-1, 1e-2, 1e-3, 2e-4, 1e-4] if cfg["k"] is None else [1e-2, 1e-3, 1e-4]
    elif isinstance(sched, str):
        sched = [float(s) for s in sched.split(",") if s.strip()]
    try:
        if cfg["k"] is None:
            rep = exhaust_punctured(float(cfg["R"]), f, sched, opts)
        else:
            L = 1.0 if cfg["L"] is None else float(cfg["L"])
            rep = cylinder_contrast(f, int(cfg["k"]), sched, L, opts)
    except NonConvergence as err:
        print(f"not converged: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED
    doc = rep.to_dict()
    for run in doc["runs"]:
        if not cfg["timing"]:
            run["wall_ms"] = None
    doc["config"] = cfg
    write_report(cfg["report"], doc)
    for e, v in zip(rep.eps, rep.window_values):
        print(f"eps {e:.3e}  window {v:.12g}")
    print("changes " + " ".join(f"{c:.3e}" for c in rep.changes))
    print(f"monotone {str(rep.monotone).lower()}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_curvature(p):
    p.add_argument("--n", type=int, help="dimension (>= 3)")
    p.add_argument("--sigma", type=int, help="cone index ell of sigma_ell")
    p.add_argument("--normalization", choices=(RAW, DEGREE_ONE), help="f = sigma_ell or its ell-th root")


def _add_solver(p):
    p.add_argument("--nodes", type=int, help="mesh nodes (default 2001)")
    p.add_argument("--newton-tol", type=float, help="Newton tolerance on max residual (default 1e-10)")
    p.add_argument("--max-newton", type=int, help="Newton iteration cap (default 50)")
    p.add_argument("--c0", type=float, help="first sweep value (default 10)")
    p.add_argument("--sweep-tol", type=float, help="sweep stop on interior change (default 1e-8)")
    p.add_argument("--grading-ratio", type=float, help="geometric cell growth (default 1.05)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lnlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="Dirichlet solve or Perron sweep on a symmetric domain")
    _add_curvature(p)
    p.add_argument("--domain", choices=("ball", "annulus", "exterior", "slab"))
    p.add_argument("--R", type=float, help="ball or exterior radius")
    p.add_argument("--a", type=float, help="annulus inner radius")
    p.add_argument("--b", type=float, help="annulus outer radius")
    p.add_argument("--L", type=float, help="truncation radius (exterior, slab)")
    p.add_argument("--eps", type=float, help="slab inner radius")
    p.add_argument("--k", type=int, help="codimension for slab domains")
    p.add_argument("--c", type=float, help="constant Dirichlet data; omit to sweep to blow-up")
    p.add_argument("--far", type=float, help="far-field u value (default: closed form)")
    p.add_argument("--sweep", action="store_true", default=None, help="blow-up ends via the c-sweep")
    _add_solver(p)
    p.add_argument("--profile", help="profile CSV path (default profile.csv)")
    p.add_argument("--report", help="report JSON path (default report.json)")
    p.add_argument("--plot", help="optional SVG path")
    p.add_argument("--timing", action="store_true", default=None, help="record wall time in the report")
    p.add_argument("--config", help="JSON or TOML config file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("classify", help="regular / irregular / borderline for codimension k")
    _add_curvature(p)
    p.add_argument("--k", type=int, help="codimension of the singular set")
    p.add_argument("--json", action="store_true", default=None, help="print the full classification")
    p.add_argument("--config", help="JSON or TOML config file")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("table", help="threshold table k* against the closed form")
    p.add_argument("--sigma", type=int, help="cone index ell")
    p.add_argument("--n-min", type=int, help="smallest dimension (default 3)")
    p.add_argument("--n-max", type=int, help="largest dimension (default 50)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--config", help="JSON or TOML config file")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("residual", help="max |f - 1| of a profile CSV")
    _add_curvature(p)
    p.add_argument("--input", help="profile CSV with header '# r,u'")
    p.add_argument("--domain", choices=("ball", "annulus", "exterior", "slab"))
    p.add_argument("--k", type=int, help="codimension for slab profiles")
    p.add_argument("--config", help="JSON or TOML config file")
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("kelvin-check", help="Kelvin duality of the canonical solutions")
    _add_curvature(p)
    p.add_argument("--R", type=float, help="sphere radius (default 1)")
    p.add_argument("--radii", type=int, help="pointwise comparison radii (default 100)")
    p.add_argument("--h", type=float, help="relative stencil spacing (default 1e-3)")
    p.add_argument("--report", help="optional JSON path")
    p.add_argument("--config", help="JSON or TOML config file")
    p.set_defaults(func=cmd_kelvin_check)

    p = sub.add_parser("punctured", help="exhaustion of a punctured ball (or a slab with --k)")
    _add_curvature(p)
    p.add_argument("--R", type=float, help="outer radius (default 1)")
    p.add_argument("--k", type=int, help="run the cylindrical contrast for codimension k instead")
    p.add_argument("--L", type=float, help="slab outer radius for the contrast (default 1)")
    p.add_argument("--eps-schedule", help="comma-separated decreasing eps values")
    _add_solver(p)
    p.add_argument("--report", help="report JSON path (default report.json)")
    p.add_argument("--timing", action="store_true", default=None, help="record wall times")
    p.add_argument("--config", help="JSON or TOML config file")
    p.set_defaults(func=cmd_punctured)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInput, ValueError) as err:
        print(f"lnlab {args.command}: invalid input: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
