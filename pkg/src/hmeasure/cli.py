"""hmeasure command line: one job per invocation, JSON report out.

Exit codes: 0 ok, 2 config or expression error, 3 failed check or
non-converged integration, 4 internal invariant violation.

Config is TOML, e.g.::

    task = "measure"
    n = 1
    [surface]
    components = ["u1", "0", "2*u1"]
    domain = [[0, 1]]
    [distance]
    kind = "koranyi"        # maxdist | radial (profile in u1 = |x~|, u2 = x_{2n+1})
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import catalog, coarea, group, measure, multivec
from .catalog import Check, absolute_check, relative_check
from .errors import BallTouchesBoundaryError, HeisenbergError, InvariantError, ParseError
from .expr import parse, x_vars
from .group import DistanceSpec
from .measure import IntegrationConfig, MetricSpec
from .surface import ParamSurface, ScalarMap

TASKS = ("measure", "volume", "blowup", "metric-factor", "coarea", "catalog", "bracket-check")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_INVARIANT = 0, 2, 3, 4

DEFAULT_COAREA_RTOL = 5e-3
DEFAULT_BLOWUP_RTOL = 2e-2


class ConfigError(Exception):
    pass


def _need(cfg: dict, key: str, where: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return cfg[key]


def _box(value, where):
    try:
        box = [(float(a), float(b)) for a, b in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a list of [lo, hi] pairs") from None
    for a, b in box:
        if not b > a:
            raise ConfigError(f"{where}: interval [{a}, {b}] has no positive extent")
    return box


def _integration(conf: dict, seed: Optional[int], threads: Optional[int]) -> IntegrationConfig:
    raw = dict(conf.get("integration", {}))
    known = set(IntegrationConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"integration: unknown fields {sorted(unknown)}")
    if "seed" in conf:
        raw["seed"] = conf["seed"]
    if seed is not None:
        raw["seed"] = seed
    if threads is not None:
        raw["threads"] = threads
    try:
        return IntegrationConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integration: {exc}") from None


def _surface(conf: dict, n: int) -> ParamSurface:
    s = _need(conf, "surface")
    return ParamSurface.from_strings(n, list(_need(s, "components", "surface")),
                                     _box(_need(s, "domain", "surface"), "surface.domain"))


def _distance(conf: dict) -> DistanceSpec:
    d = conf.get("distance", {"kind": "koranyi"})
    kind = d.get("kind", "koranyi")
    if kind == "koranyi":
        return DistanceSpec.koranyi()
    if kind in ("maxdist", "max"):
        return DistanceSpec.maxdist()
    if kind == "radial":
        e = parse(_need(d, "profile", "distance"), ["u1", "u2"])

        def profile(s, t):
            return np.broadcast_to(e.eval({"u1": s, "u2": t}), np.shape(s))

        return DistanceSpec.radial(profile, label=str(e))
    raise ConfigError(f"distance: unknown kind {kind!r}")


def _metric(conf: dict, n: int) -> Optional[MetricSpec]:
    m = conf.get("metric")
    if m is None:
        return None
    a = tuple(m.get("a", (0.0,) * (2 * n)))
    if len(a) != 2 * n:
        raise ConfigError(f"metric: 'a' needs {2 * n} entries")
    try:
        return MetricSpec(float(m.get("lambda", 1.0)), a)
    except ValueError as exc:
        raise ConfigError(f"metric: {exc}") from None


def _tau(conf: dict, n: int):
    t = _need(conf, "metric_factor")
    vecs = np.asarray(_need(t, "vectors", "metric_factor"), dtype=float)
    if vecs.ndim != 2 or vecs.shape[1] != 2 * n + 1:
        raise ConfigError(f"metric_factor.vectors: need rows of length {2 * n + 1}")
    return multivec.wedge_all([multivec.PVector.vector(n, v) for v in vecs])


def _expected_check(conf, value, err, tol) -> list:
    if "expected" not in conf:
        return []
    exp = float(conf["expected"])
    if tol is None:
        return [absolute_check("value vs expected", exp, value, max(3.0 * err, 1e-12))]
    return [relative_check("value vs expected", exp, value, tol)]


def _convergence_check(name, rep) -> list:
    if rep.converged:
        return []
    return [Check(f"{name} converged", 1.0, 0.0, 0.0, False)]


# ---------------------------------------------------------------------------
# tasks; each returns (value, error_estimate, checks)

def task_measure(conf, n, cfg, tol):
    S = _surface(conf, n)
    spec = _distance(conf)
    rep = measure.spherical_measure(S, spec, cfg)
    checks = _convergence_check("measure", rep) + _expected_check(conf, rep.value, rep.error_estimate, tol)
    m = _metric(conf, n)
    if m is not None:
        resc, std = measure.rescaled_measure_invariance(S, m, spec, cfg)
        band = 3.0 * math.hypot(resc.error_estimate, std.error_estimate)
        checks.append(absolute_check("rescaled normalised measure vs standard", std.value, resc.value, band))
    return rep.value, rep.error_estimate, checks


def task_volume(conf, n, cfg, tol):
    S = _surface(conf, n)
    rep = measure.riemannian_volume(S, _metric(conf, n), cfg)
    checks = _convergence_check("volume", rep) + _expected_check(conf, rep.value, rep.error_estimate, tol)
    return rep.value, rep.error_estimate, checks


def task_blowup(conf, n, cfg, tol):
    S = _surface(conf, n)
    spec = _distance(conf)
    b = _need(conf, "blowup")
    u0 = [float(v) for v in _need(b, "u0", "blowup")]
    radii = b.get("radii")
    if radii is None:
        radii = [float(_need(b, "r", "blowup"))]
    radii = sorted((float(r) for r in radii), reverse=True)
    checks = []
    reps = [measure.blowup_quotient(S, u0, r, spec, cfg) for r in radii]
    last = reps[-1]
    for r, rep in zip(radii, reps):
        checks += _convergence_check(f"quotient r={r!r}", rep)
    if not any("characteristic" in note for note in last.notes):
        lim = measure.blowup_limit(S, u0, spec, cfg)
        checks.append(relative_check(f"quotient r={radii[-1]!r} vs theta/|tau_V|", lim.value, last.value,
                                     tol if tol is not None else DEFAULT_BLOWUP_RTOL))
    checks += _expected_check(conf, last.value, last.error_estimate, tol)
    return last.value, last.error_estimate, checks


def task_metric_factor(conf, n, cfg, tol):
    rep = measure.metric_factor(_distance(conf), _tau(conf, n), cfg, _metric(conf, n))
    return rep.value, rep.error_estimate, _expected_check(conf, rep.value, rep.error_estimate, tol)


def task_coarea(conf, n, cfg, tol):
    c = _need(conf, "coarea")
    f = ScalarMap.from_strings(n, [_need(c, "map", "coarea")])
    fam = coarea.LevelSetFamily.from_template(
        f, list(_need(c, "chart", "coarea")), _box(_need(c, "domain", "coarea"), "coarea.domain"),
        _box(_need(c, "levels", "coarea"), "coarea.levels"), _box(_need(c, "box", "coarea"), "coarea.box"))
    weight = c.get("weight")
    if weight is not None:
        weight = parse(str(weight), x_vars(2 * n + 1))
    check = coarea.riemannian_coarea_check if c.get("riemannian", False) else coarea.coarea_check
    lhs, rhs = check(fam, weight, cfg)
    rtol = tol if tol is not None else DEFAULT_COAREA_RTOL
    checks = _convergence_check("lhs", lhs) + _convergence_check("rhs", rhs)
    checks.append(relative_check("coarea lhs vs rhs", lhs.value, rhs.value, rtol))
    checks += _expected_check(conf, lhs.value, lhs.error_estimate, tol)
    return lhs.value, math.hypot(lhs.error_estimate, rhs.error_estimate), checks


def task_catalog(conf, n, cfg, tol):
    checks = catalog.run_catalog(cfg, tol if tol is not None else catalog.CLOSED_FORM_RTOL)
    failed = sum(not c.passed for c in checks)
    return float(failed), 0.0, checks


def task_bracket_check(conf, n, cfg, tol):
    ns = [n] if "n" in conf else [1, 2, 3, 4]
    checks = []
    bad = 0
    for m in ns:
        frame = group.standard_frame(m)
        Z = frame[-1]
        wrong = 0
        for (i, j), br in group.bracket_table(m).items():
            want = 2.0 * Z if (i <= m and j == i + m) else None
            ok = br == want if want is not None else br.is_zero()
            wrong += not ok
        bad += wrong
        checks.append(absolute_check(f"frame brackets n={m}", 0.0, float(wrong), 0.0))
    return float(bad), 0.0, checks


RUNNERS = {"measure": task_measure, "volume": task_volume, "blowup": task_blowup,
           "metric-factor": task_metric_factor, "coarea": task_coarea, "catalog": task_catalog,
           "bracket-check": task_bracket_check}


# ---------------------------------------------------------------------------

def _clean(obj):
    """TOML values -> plain JSON-able values with deterministic ordering."""
    if isinstance(obj, dict):
        return {k: _clean(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "isoformat"):
        return obj.isoformat()
    return obj


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def run(conf: dict, task: Optional[str] = None, seed: Optional[int] = None, threads: Optional[int] = None,
        tolerance: Optional[float] = None) -> dict:
    """Run one job; returns the report dict.  Raises ConfigError / library errors."""
    task = task or conf.get("task")
    if task is None:
        raise ConfigError("no task given (config 'task' or --task)")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    n = conf.get("n", 1)
    if not isinstance(n, int) or n < 1:
        raise ConfigError("n must be a positive integer")
    cfg = _integration(conf, seed, threads)
    if tolerance is not None and not tolerance > 0:
        raise ConfigError("--tolerance must be positive")
    t0 = time.perf_counter()
    value, err, checks = RUNNERS[task](conf, n, cfg, tolerance)
    runtime = (time.perf_counter() - t0) * 1000.0
    inputs = {k: v for k, v in _clean(conf).items() if k not in ("seed", "output", "task")}
    integ = {k: v for k, v in cfg.to_dict().items() if k not in ("seed", "threads")}
    inputs["integration"] = _clean(integ)
    if tolerance is not None:
        inputs["tolerance"] = tolerance
    return {
        "task": task,
        "inputs": inputs,
        "value": _num(value),
        "error_estimate": _num(err),
        "checks": [{**c.to_dict(), "expected": _num(c.expected), "got": _num(c.got), "tol": _num(c.tol)}
                   for c in checks],
        "runtime_ms": round(runtime, 3),
        "seed": cfg.seed,
    }


def _load(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hmeasure", description=__doc__.split("\n")[0])
    ap.add_argument("--config", help="TOML job file")
    ap.add_argument("--task", choices=TASKS, help="override the config task")
    ap.add_argument("--seed", type=int, help="root RNG seed (overrides config)")
    ap.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    ap.add_argument("--out", help="report path (default: stdout)")
    ap.add_argument("--tolerance", type=float, help="relative tolerance for checks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        conf = _load(args.config) if args.config else {}
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        report = run(conf, args.task, args.seed, args.threads, args.tolerance)
    except ParseError as exc:
        print(f"hmeasure: expression error: {exc}\n{exc.diagnostic()}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"hmeasure: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"hmeasure: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except BallTouchesBoundaryError as exc:
        print(f"hmeasure: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except HeisenbergError as exc:
        # dimension and domain mistakes are input problems
        print(f"hmeasure: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = json.dumps(report, indent=2) + "\n"
    out = args.out or conf.get("output")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [c["name"] for c in report["checks"] if not c["pass"]]
    if failed:
        print(f"hmeasure: failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
