"""Batch driver: ``frechet-solve {solve, verify, ode, list}``.

Settings come from defaults, then ``--config FILE`` (JSON), then explicit
flags.  Every run writes ``summary.json`` and ``detail.csv`` to ``--out``
(when given) and prints the summary.  Floats are written with 17
significant digits and nothing time-dependent is recorded, so identical
configurations give byte-identical files.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import implicit, ode, problems, verify
from .errors import NumericalFailure, StepFailure
from .solver import solve

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3
VERIFY_KINDS = ("surj", "inverse", "inject", "ift")
INJECT_CPRIME = {"scalar-quadratic": 0.25}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kind: str = "solve"
    check: str = None
    problem: str = None
    target: str = None
    space: dict = None
    eps0: float = 0.25
    k0: int = None
    tol: float = None
    max_outer: int = 200
    samples: int = None
    seed: int = 0
    rel_tol: float = verify.REL_TOL
    r: float = None
    r_level: int = 0
    cprime: float = None
    broken: float = None
    ode: str = None
    grid: int = None
    p_box: list = None
    out: str = None
    trace: bool = False

    def validate(self):
        if self.kind not in ("solve", "verify", "ode", "list"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind == "verify" and self.check not in VERIFY_KINDS:
            raise ConfigError(f"verify needs one of {', '.join(VERIFY_KINDS)}")
        if self.seed is None:
            self.seed = 0
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("samples must be positive")
        if self.space is not None:
            raise ConfigError("custom space descriptors are not supported by the "
                              "registered problems; omit 'space'")
        return self

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# -- output ------------------------------------------------------------------------

def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return json.dumps(x)


def dumps(obj, indent=0):
    """JSON with floats at 17 significant digits and sorted keys."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(obj[k], indent + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(fmt(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in seq) + "\n" + pad + "]"
    if isinstance(obj, complex):
        return dumps({"re": obj.real, "im": obj.imag}, indent)
    return fmt(obj)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple, dict)):
        return dumps(v).replace("\n", "").replace("  ", "")
    return str(v)


def to_csv(rows):
    if not rows:
        return ""
    cols = []
    for row in rows:
        cols.extend(k for k in row if k not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_cell(row.get(c, "")) for c in cols])
    return buf.getvalue()


def emit(cfg, summary, rows, stream):
    text = dumps(summary) + "\n"
    stream.write(text)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(text)
        (out / "detail.csv").write_text(to_csv(rows))
        (out / "config.json").write_text(dumps(summary["config"]) + "\n")


# -- experiments ---------------------------------------------------------------------

def parse_target(problem, text):
    """'smoke', comma-separated coefficients, or Fourier 'cos:J:A[+cos:J:A]'."""
    if text is None or text == "smoke":
        if problem.smoke_target is None:
            raise ConfigError(f"{problem.name} has no smoke target; pass --target")
        return problem.smoke_target()
    Y = problem.Y
    if text.startswith("cos:"):
        total = Y.zero()
        for term in text.split("+"):
            _, j, a = term.split(":")
            total = total + Y.cosine(int(j), float(a))
        return total
    vals = [float(v) for v in text.split(",")]
    if len(vals) != int(np.prod(Y.shape)):
        raise ConfigError(f"target needs {int(np.prod(Y.shape))} coefficients")
    return Y.point(np.asarray(vals, dtype=Y.dtype).reshape(Y.shape))


def _problem(cfg):
    if cfg.problem is None:
        raise ConfigError("--problem is required")
    try:
        prob = problems.get_problem(cfg.problem)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    if cfg.broken:
        prob = problems.broken_constants(prob, cfg.broken)
    return prob


def run_solve(cfg):
    prob = _problem(cfg)
    y = parse_target(prob, cfg.target)
    rep = solve(prob, y, tol=cfg.tol or 1e-10, eps0=cfg.eps0, k0=cfg.k0,
                max_outer=cfg.max_outer)
    summary = {"experiment": "solve", "problem": prob.name, **rep.as_dict(trace=cfg.trace)}
    rows = []
    for i, tr in enumerate(rep.orbit_traces):
        if cfg.trace:
            for j, st in enumerate(tr.steps):
                rows.append({"pass": i, "step": j, "t": st.t, "p": st.p,
                             "step_snorm": st.step_snorm, "residual": st.residual,
                             "halvings": st.halvings})
        else:
            rows.append({"pass": i, "steps": len(tr.steps), "eps": tr.eps, "k": tr.k,
                         "residual": tr.residual, "ball_norm": tr.ball_norm,
                         "length": tr.length})
    data = np.asarray(rep.solution.data)
    if data.size == 1:
        summary["x"] = float(np.real(data.ravel()[0]))
    return summary, rows, EXIT_OK if rep.converged else EXIT_SOLVER


def _verdict_code(verdict):
    return {"pass": EXIT_OK, "fail": EXIT_FAIL}.get(verdict, EXIT_SOLVER)


def run_verify(cfg):
    seed = cfg.seed
    if cfg.check == "ift":
        name = cfg.problem or "scalar-quadratic-family"
        if name not in implicit.FAMILIES:
            raise ConfigError(f"unknown family {name!r}; known: {', '.join(implicit.FAMILIES)}")
        kwargs = {"p_box": tuple(map(tuple, cfg.p_box))} if cfg.p_box else {}
        fam = implicit.FAMILIES[name](**kwargs)
        rep = implicit.verify_ift_estimate(fam, samples=cfg.samples or 100, seed=seed,
                                           rel_tol=cfg.rel_tol, tol=cfg.tol or 1e-12,
                                           p_grid=cfg.grid)
        return rep.as_dict(), rep.rows, _verdict_code(rep.verdict)
    prob = _problem(cfg)
    if cfg.check == "surj":
        rep = verify.verify_surjectivity(prob, r=cfg.r, samples=cfg.samples or 100,
                                         seed=seed, tol=cfg.tol or 1e-10,
                                         check_tol=cfg.rel_tol)
    elif cfg.check == "inverse":
        rep = verify.verify_inverse_lipschitz(prob, samples=cfg.samples or 200, seed=seed,
                                              rel_tol=cfg.rel_tol, tol=cfg.tol or 1e-12)
    else:
        cp = cfg.cprime if cfg.cprime is not None else INJECT_CPRIME.get(cfg.problem)
        if cp is None:
            raise ConfigError(f"no declared c' for {cfg.problem}; pass --cprime")
        rep = verify.verify_injectivity_conditions(prob, samples=cfg.samples or 1000,
                                                   r=cfg.r_level, seed=seed, cprime=cp)
    return rep.as_dict(), rep.rows, _verdict_code(rep.verdict)


def run_ode(cfg):
    name = cfg.ode or cfg.problem
    if name not in ode.ODE_REGISTRY:
        raise ConfigError(f"unknown ODE {name!r}; known: {', '.join(ode.ODE_REGISTRY)}")
    prob = ode.get_ode(name)
    r = 0.5 if cfg.r is None else cfg.r
    grid = cfg.grid or 2000
    try:
        z, rep = ode.cauchy_solve(prob, r, grid=grid, tol=cfg.tol or 1e-10, full=True)
    except NumericalFailure as exc:
        return {"experiment": "ode", "ode": name, "status": "failure",
                "message": str(exc)}, [], EXIT_SOLVER
    ref = ode.rk4_reference(prob, r, grid)
    summary = {"experiment": "ode", "ode": name, "r": r, "grid": grid,
               "status": rep.status, "outer_iterations": rep.outer_iterations,
               "residual_rho": rep.residual_rho,
               "c1_vs_rk4_reference": (z - ref).c1_profile().tolist(),
               "gronwall": [ode.gronwall_constant(n, prob)
                            for n in range(prob.space.levels + 1)],
               "coefficients": _coeffs(z.values)}
    if prob.closed_form is not None:
        exact = prob.closed_form(r, z.nodes)
        summary["max_node_error"] = float(np.max(np.abs(z.values - exact)))
    prof = prob.space.profile_array(z.values)
    rows = [{"node": float(s), "level": n, "seminorm": float(prof[k, n])}
            for k, s in enumerate(z.nodes) for n in range(prof.shape[1])]
    return summary, rows, EXIT_OK


def _coeffs(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"re": a.real.tolist(), "im": a.imag.tolist()}
    return a.tolist()


def run_list(cfg):
    cat = problems.list_problems()
    summary = {"problems": cat,
               "families": sorted(implicit.FAMILIES),
               "odes": [ode.get_ode(n).describe() for n in sorted(ode.ODE_REGISTRY)]}
    rows = [{"name": p["name"], "d": p["d"], "c": p["c"], "domain": p["domain"]} for p in cat]
    return summary, rows, EXIT_OK


RUNNERS = {"solve": run_solve, "verify": run_verify, "ode": run_ode, "list": run_list}


def run(cfg, stream=None):
    """Execute ``cfg`` and return the exit status."""
    stream = stream or sys.stdout
    try:
        cfg.validate()
        summary, rows, code = RUNNERS[cfg.kind](cfg)
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StepFailure, NumericalFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    # the output directory is not part of the experiment, so reports compare across dirs
    summary = {"config": {k: v for k, v in asdict(cfg).items() if k != "out"}, **summary}
    emit(cfg, summary, rows, stream)
    return code


# -- argument parsing ------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", metavar="FILE", help="JSON RunConfig; flags override it")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--out", metavar="DIR", help="write summary.json and detail.csv here")
    p.add_argument("--trace", action="store_true", default=None,
                   help="include full orbit traces")
    p.add_argument("--samples", type=int, help="number of random samples")
    p.add_argument("--tol", type=float, help="solver tolerance in the rho metric")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="frechet-solve",
        description="Solve and verify tame equations on graded Frechet spaces.")
    sub = ap.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("solve", help="solve f(x) = y for a registered problem")
    _common(p)
    p.add_argument("--problem", help="registered problem name")
    p.add_argument("--target", help="'smoke', comma-separated coefficients or cos:J:A")
    p.add_argument("--eps0", type=float, help="initial orbit eps (default 0.25)")
    p.add_argument("--k0", type=int, help="initial graded level (default N)")
    p.add_argument("--max-outer", dest="max_outer", type=int, help="outer pass limit")

    p = sub.add_parser("verify", help="run a verification harness")
    p.add_argument("check", choices=VERIFY_KINDS)
    _common(p)
    p.add_argument("--problem", help="problem (or parameter family for ift)")
    p.add_argument("--r", type=float, help="surjectivity radius (default m_U/2)")
    p.add_argument("--r-level", dest="r_level", type=int, help="injectivity level r")
    p.add_argument("--cprime", type=float, help="declared c' for the injectivity check")
    p.add_argument("--rel-tol", dest="rel_tol", type=float, help="relative check tolerance")
    p.add_argument("--broken", type=float, help="divide declared constants by this factor")
    p.add_argument("--grid", type=int, help="parameter grid size (ift)")

    p = sub.add_parser("ode", help="solve a registered Cauchy problem")
    _common(p)
    p.add_argument("--ode", help="linear-scalar | linear-fourier | logistic-scalar")
    p.add_argument("--r", type=float, help="time scale 0 < r < r0 (default 0.5)")
    p.add_argument("--grid", type=int, help="even number of time steps on [-1, 1]")

    p = sub.add_parser("list", help="print the problem catalogue")
    _common(p)
    return ap


def config_from_args(ns):
    data = {}
    if getattr(ns, "config", None):
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    cfg = RunConfig.from_dict(data)
    cfg.kind = ns.kind
    for key, val in vars(ns).items():
        if key in ("config", "kind") or val is None:
            continue
        if key == "check":
            cfg.check = val
        elif hasattr(cfg, key):
            setattr(cfg, key, val)
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = config_from_args(ns)
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
