"""Batch command line front end.

Every subcommand reads an optional JSON config (``--config``), lets flags
override its keys, validates the result against the shipped schema and
writes a report (CSV or JSON) to ``--out`` or standard output.

Exit codes: 0 pass, 1 check failure, 2 usage or config error,
3 inconclusive (Monte Carlo band too wide).
"""

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from dataclasses import replace as dc_replace
from importlib import resources

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .errors import InterptraceError, ParameterError

__all__ = [
    "COMMANDS", "ConfigError", "Result", "load_config", "validate_config",
    "write_report", "format_report", "load_report", "run_command", "main",
]

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
FLOAT_FMT = "%.12g"

COMMANDS = (
    "check-scaling", "kernel-info", "extend-kernel", "simulate", "theta", "sonine",
    "ap-constant", "hardy", "extend-weight", "interp-norm", "besov-norm",
    "solve-volterra", "extension", "trace", "roundtrip", "finite-interval",
)

# config keys exposed as flags, per subcommand
_FLAGS = {
    "check-scaling": ["phi", "bounds", "K"],
    "kernel-info": ["kernel", "alpha", "lambda", "tol"],
    "extend-kernel": ["kernel", "alpha", "T", "K", "t", "tol"],
    "simulate": ["kernel", "alpha", "strategy", "intensity", "r", "lambda", "n"],
    "theta": ["kernel", "alpha", "strategy", "intensity", "t", "lambda", "n", "source", "tol"],
    "sonine": ["kernel", "alpha", "t", "n", "source", "M", "tol"],
    "ap-constant": ["weight", "gamma", "p"],
    "hardy": ["weight", "gamma", "p", "trials"],
    "extend-weight": ["weight", "gamma", "p", "eps", "T", "tol"],
    "interp-norm": ["couple", "phi", "p", "k", "a"],
    "besov-norm": ["p", "s0", "s1", "N", "q", "k", "phi", "alpha", "gamma", "tol"],
    "solve-volterra": ["kernel", "alpha", "u0", "f", "T", "M", "n", "tol"],
    "extension": ["couple", "k", "weight", "gamma", "p", "mode", "alpha", "kernel",
                  "theta_source", "n_mc"],
    "trace": ["couple", "k", "weight", "gamma", "p", "mode", "alpha", "kernel",
              "theta_source", "n_mc"],
    "roundtrip": [],
    "finite-interval": ["couple", "k", "weight", "gamma", "p", "mode", "alpha", "kernel",
                        "theta_source", "n_mc", "T"],
}

# the module whose examples ``--selftest`` runs
_MODULE_OF = {
    "check-scaling": "scaling", "kernel-info": "kernel", "extend-kernel": "kernel",
    "simulate": "subordinator", "theta": "subordinator", "sonine": "subordinator",
    "ap-constant": "weights", "hardy": "weights", "extend-weight": "weights",
    "interp-norm": "interp", "besov-norm": "interp", "solve-volterra": "volterra",
    "extension": "volterra", "trace": "volterra", "roundtrip": "volterra",
    "finite-interval": "volterra",
}


class ConfigError(Exception):
    """Malformed or invalid configuration; maps to exit code 2."""


@dataclass
class Result:
    """Rows of one report plus its verdict.

    ``status`` is ``"pass"``, ``"fail"``, ``"inconclusive"`` or ``"ok"``
    (a computation without a check attached).
    """

    columns: list
    rows: list
    status: str = "ok"
    summary: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# configuration


def _schema():
    text = resources.files("interptrace").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


def _fill_defaults(cfg, schema):
    out = dict(cfg)
    for key, prop in schema["properties"].items():
        if key not in out and "default" in prop:
            out[key] = prop["default"]
    return out


def validate_config(cfg):
    """Validate a config dict and fill schema defaults.

    Raises
    ------
    ConfigError
        On any schema violation; unknown keys are named in the message.
    """
    schema = _schema()
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    errors = sorted(Draft202012Validator(schema).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        if e.validator == "additionalProperties":
            allowed = set(e.schema.get("properties", {}))
            extra = sorted(k for k in e.instance if k not in allowed)
            where = "/".join(str(x) for x in e.path)
            prefix = f"at {where}: " if where else ""
            raise ConfigError(f"{prefix}unknown key(s): {', '.join(extra)}")
        where = "/".join(str(x) for x in e.path) or "<root>"
        raise ConfigError(f"at {where}: {e.message}")
    return _fill_defaults(cfg, schema)


def load_config(path):
    """Read, validate and default-fill a JSON config file.

    Raises
    ------
    ConfigError
        For unreadable files, malformed JSON (with line and column) and
        schema violations.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# reports


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % float(x)
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return float(FLOAT_FMT % x)
    if isinstance(x, dict):
        return {str(k): _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in x]
    return x


def _header(results, header):
    h = {"tool": f"interptrace {__version__}"}
    h.update(header or {})
    if results.grid:
        h["grid"] = results.grid
    h["status"] = results.status
    if results.summary:
        h["summary"] = results.summary
    return _json_value(h)


def format_report(results, fmt="csv", header=None):
    """Render a :class:`Result` as text.

    CSV output starts with ``# key: value`` header lines (tool version,
    master seed, grid parameters, echoed config) followed by the column row
    and the data rows.  Floats carry 12 significant digits and no timestamp
    is written, so equal inputs give byte-identical reports.
    """
    h = _header(results, header)
    if fmt == "json":
        doc = {"header": h, "columns": list(results.columns),
               "rows": [dict(zip(results.columns, _json_value(list(r)))) for r in results.rows]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    for k, v in h.items():
        buf.write(f"# {k}: {json.dumps(v, sort_keys=True, separators=(',', ':'))}\n")
    buf.write(",".join(results.columns) + "\n")
    for r in results.rows:
        buf.write(",".join(_fmt(x) for x in r) + "\n")
    return buf.getvalue()


def write_report(results, path, fmt="csv", header=None):
    """Write a report to ``path`` (``None`` or ``"-"`` means stdout).

    Raises
    ------
    ConfigError
        If the path cannot be written.
    """
    text = format_report(results, fmt, header)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write report {path}: {exc.strerror}") from exc


def _parse_cell(s):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def load_report(path):
    """Read a report written by :func:`write_report` in either format.

    Returns ``{"header": dict, "columns": list, "rows": list of dict}``
    with the same values for both formats.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = [{k: (float(v) if v in ("nan", "inf", "-inf") else v) for k, v in r.items()}
                for r in doc["rows"]]
        return {"header": doc["header"], "columns": doc["columns"], "rows": rows}
    header, lines = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, v = line[2:].split(": ", 1)
            header[k] = json.loads(v)
        elif line:
            lines.append(line)
    columns = lines[0].split(",")
    rows = [dict(zip(columns, (_parse_cell(c) for c in ln.split(",")))) for ln in lines[1:]]
    return {"header": header, "columns": columns, "rows": rows}


# ---------------------------------------------------------------------------
# descriptors


def _split_desc(s):
    kind, _, arg = str(s).partition(":")
    if not arg:
        raise ConfigError(f"descriptor {s!r} must look like kind:value")
    return kind, arg


def _phi_from(desc):
    from .scaling import ScalingFunction
    if isinstance(desc, dict):
        return ScalingFunction.from_json(desc)
    kind, arg = _split_desc(desc)
    if kind == "power":
        return ScalingFunction.from_json({"kind": "power", "theta": float(arg)})
    if kind == "caputo":
        return ScalingFunction.from_json({"kind": "caputo", "alpha": float(arg)})
    if kind == "expr":
        return ScalingFunction.from_json({"kind": "expr", "expr": arg})
    raise ConfigError(f"unknown scaling function kind {kind!r}")


def _kernel_from(cfg, required=True):
    from .kernel import KernelSpec, caputo
    desc = cfg.get("kernel")
    if desc is None:
        if "alpha" in cfg and cfg["alpha"] is not None:
            k = caputo(float(cfg["alpha"]))
        elif required:
            raise ConfigError("a kernel (or alpha) is required")
        else:
            return None
    elif isinstance(desc, dict):
        k = KernelSpec.from_json(desc)
    else:
        kind, arg = _split_desc(desc)
        if kind != "caputo":
            raise ConfigError(f"kernel descriptor {desc!r}: use a JSON object for {kind!r}")
        k = caputo(float(arg))
    return k


def _weight_from(cfg):
    from .weights import WeightSpec, power_weight
    p = float(cfg.get("p", 2.0))
    desc = cfg.get("weight")
    if desc is None:
        return power_weight(float(cfg.get("gamma", 0.0)), p)
    if isinstance(desc, dict):
        return WeightSpec.from_json(dict({"p": p}, **desc))
    kind, arg = _split_desc(desc)
    if kind != "power":
        raise ConfigError(f"weight descriptor {desc!r}: use a JSON object for {kind!r}")
    return power_weight(float(arg), p)


def _couple_from(cfg):
    from .interp import BesovCouple
    from .volterra import _couple_from as sequence_couple
    d = dict(cfg.get("couple") or {"q0": "inf", "sigma0": 0.0, "q1": "inf", "sigma1": -1.0,
                                    "J": 20})
    if d.pop("kind", "sequence") == "besov":
        return BesovCouple(float(d.get("p", 2.0)), float(d.get("s0", 2.0)),
                           float(d.get("s1", 0.0)), int(d.get("N", 256)))
    return sequence_couple(d)


def _as_list(x, default):
    if x is None:
        x = default
    return [x] if np.isscalar(x) else list(x)


def _model_from(cfg, kernel, seed):
    from .subordinator import compound_poisson, cutoff_for_intensity, exact_stable
    if cfg.get("strategy", "exact_stable") == "exact_stable":
        if kernel.family != "caputo":
            raise ConfigError("exact_stable needs a caputo kernel; use compound_poisson")
        return exact_stable(kernel.alpha, seed)
    delta = cutoff_for_intensity(kernel, float(cfg.get("intensity", 200.0)))
    return compound_poisson(kernel, delta, seed)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_check_scaling(cfg):
    from .scaling import fit_membership
    phi = _phi_from(cfg.get("phi", "power:0.5"))
    if "bounds" in cfg:
        phi = phi.with_bounds(*cfg["bounds"])
    K = int(cfg.get("K", 20))
    fit = fit_membership(phi, K)
    status = "ok" if phi.class_bounds is None else ("pass" if fit.member else "fail")
    return Result(["a_hat", "b_hat", "eps_hat", "member"],
                  [[fit.a_hat, fit.b_hat, fit.eps_hat, fit.member]], status,
                  grid={"lambda": f"2^k, k=-{K}..{K}"})


def _cmd_kernel_info(cfg):
    from .kernel import check_kernel_phi_equivalence, laplace_phi
    kappa = _kernel_from(cfg)
    lam = np.asarray(_as_list(cfg.get("lambda"), np.geomspace(1e-4, 1e4, 33).tolist()))
    rep = check_kernel_phi_equivalence(kappa, lam, float(cfg.get("tol", 0.01)))
    phi = laplace_phi(kappa, lam)
    k_inv = kappa(1.0 / lam)
    rows = [[l, f, k, f / k] for l, f, k in zip(lam, phi, k_inv)]
    return Result(["lambda", "phi", "kappa_inv", "ratio"], rows, rep.status,
                  {"band": rep.band_width, "refinement_delta": rep.refinement_delta},
                  {"lambda": f"{lam.size} points in [{lam.min():g}, {lam.max():g}]"})


def _cmd_extend_kernel(cfg):
    from .kernel import extend_kernel
    kappa = _kernel_from(cfg)
    T = cfg.get("T", kappa.T_horizon)
    if T is None:
        raise ConfigError("extend-kernel needs T (or a kernel with T_horizon)")
    k0 = dc_replace(kappa, T_horizon=float(T))
    ext = extend_kernel(k0, int(cfg.get("K", 20)))
    t = np.asarray(_as_list(cfg.get("t"), (float(T) * np.geomspace(0.01, 1e4, 25)).tolist()))
    v = ext(t)
    ref = kappa(t)
    err = np.abs(v - ref) / ref
    status = "ok"
    if kappa.family == "caputo":
        status = "pass" if float(err.max()) <= float(cfg.get("tol", 1e-8)) else "fail"
    return Result(["t", "extended", "global", "rel_err"],
                  [list(r) for r in zip(t, v, ref, err)], status,
                  {"max_rel_err": float(err.max())}, {"t": f"{t.size} points", "T": T})


def _cmd_simulate(cfg):
    from .subordinator import laplace_check
    kappa = _kernel_from(cfg)
    seed = int(cfg["seed"])
    model = _model_from(cfg, kappa, seed)
    rs = _as_list(cfg.get("r"), [0.5, 1.0, 2.0])
    lams = _as_list(cfg.get("lambda"), [0.5, 1.0, 2.0])
    rows, ok = [], True
    for r in rs:
        for lam in lams:
            est, exact = laplace_check(model, float(r), float(lam), int(cfg["n"]),
                                       int(cfg["jobs"]))
            ok &= est.contains(exact, 3.0)
            z = abs(est.value - exact) / est.half_width_95 if est.half_width_95 > 0 else 0.0
            rows.append([r, lam, est.value, est.half_width_95, exact, z])
    return Result(["r", "lambda", "estimate", "ci", "exact", "z"], rows,
                  "pass" if ok else "fail",
                  grid={"r": rs, "lambda": lams, "n": cfg["n"]})


def _cmd_theta(cfg):
    from .subordinator import theta, theta_closed_form
    kappa = _kernel_from(cfg)
    seed = int(cfg["seed"])
    ts = _as_list(cfg.get("t"), [1.0])
    lams = _as_list(cfg.get("lambda"), [1.0])
    half = kappa.family == "caputo" and abs(kappa.alpha - 0.5) < 1e-15
    rows, ok, wide = [], True, False
    model = None
    if cfg.get("source") == "mc" or not half:
        model = _model_from(cfg, kappa, seed)
    for t in ts:
        for lam in lams:
            if model is None:
                rows.append([t, lam, float(theta_closed_form(float(t), float(lam))), 0.0])
                continue
            est = theta(model, float(t), float(lam), int(cfg["n"]), int(cfg["jobs"]))
            rows.append([t, lam, est.value, est.half_width_95])
            wide |= est.half_width_95 > float(cfg.get("tol", 0.05))
            if half:
                ok &= est.contains(float(theta_closed_form(float(t), float(lam))), 3.0)
    if model is None:
        status = "ok"
    elif wide:
        status = "inconclusive"
    elif half:
        status = "pass" if ok else "fail"
    else:
        status = "ok"
    return Result(["t", "lambda", "theta", "ci"], rows, status,
                  grid={"t": ts, "lambda": lams, "n": cfg["n"]})


def _cmd_sonine(cfg):
    from .subordinator import varkappa_and_sonine_check
    kappa = _kernel_from(cfg)
    source = cfg.get("source", "closed_form")
    model = _model_from(cfg, kappa, int(cfg["seed"])) if source == "mc" else None
    t = np.asarray(_as_list(cfg.get("t"), np.geomspace(0.01, 10.0, 20).tolist()))
    n = int(cfg["n"])
    M = int(cfg.get("M", 256))
    rep = varkappa_and_sonine_check(model, kappa, t, n, source, M,
                                    float(cfg.get("tol", 1e-3)), int(cfg["jobs"]))
    d = rep.details
    rows = [list(r) for r in zip(d["t"], d["varkappa"], d["deviation"], d["half_width"],
                                 d["integral_deviation"])]
    return Result(["t", "varkappa", "deviation", "half_width", "integral_deviation"], rows,
                  rep.status, {"max_deviation": max(d["deviation"])},
                  {"t": f"{t.size} points", "M": M, "n": n if source == "mc" else 0})


def _cmd_ap_constant(cfg):
    from .weights import ap_constant
    w = _weight_from(cfg)
    res = ap_constant(w)
    return Result(["value", "in_ap", "witness_lo", "witness_hi", "n_intervals", "p"],
                  [[res.value, res.in_ap, res.witness[0], res.witness[1], res.n_intervals,
                    res.p]], "pass" if res.in_ap else "fail",
                  grid={"intervals": res.n_intervals})


def _cmd_hardy(cfg):
    from .weights import hardy_constants, hardy_empirical, trace_pair
    w = _weight_from(cfg)
    p = float(cfg["p"])
    pair = trace_pair(w, p)
    hr = hardy_constants(pair, p)
    emp = hardy_empirical(pair, p, int(cfg.get("trials", 200)), int(cfg["seed"]), B=hr.B)
    return Result(["B", "r_variation", "C_emp", "bound", "trials", "passed"],
                  [[hr.B, hr.r_variation(), emp["C_emp"], emp["bound"], emp["trials"],
                    emp["passed"]]], "pass" if emp["passed"] else "fail",
                  grid={"r": "16 per decade on [1e-6, 1e6]"})


def _cmd_extend_weight(cfg):
    from .weights import ap_constant, extend_weight, fit_tail_slope
    w = _weight_from(cfg)
    eps = float(cfg.get("eps", 0.1))
    T = float(cfg.get("T", 1.0))
    we = extend_weight(w, eps, T=T)
    target = -1.0 + eps
    right = fit_tail_slope(we, 1e4 * T, 1e7 * T)
    left = fit_tail_slope(lambda t: we(-t), 1e4 * T, 1e7 * T)
    ap = ap_constant(we)
    tol = float(cfg.get("tol", 0.05))
    ok = abs(right - target) <= tol and abs(left - target) <= tol and ap.in_ap
    return Result(["side", "slope", "target", "ap_value"],
                  [["right", right, target, ap.value], ["left", left, target, ap.value]],
                  "pass" if ok else "fail", grid={"tail": f"[{1e4 * T:g}, {1e7 * T:g}]"})


def _cmd_interp_norm(cfg):
    from .interp import dyadic_norm, j_norm_upper, phi_norm_integral
    couple = _couple_from(cfg)
    phi = _phi_from(cfg.get("phi", "power:0.5"))
    p = float(cfg["p"])
    if "a" in cfg:
        vecs = [("a", couple.embed(np.asarray(cfg["a"], dtype=float), couple.J))]
    else:
        vecs = [(k, couple.unit(int(k))) for k in _as_list(cfg.get("k"), [0])]
    rows, ok = [], True
    for label, a in vecs:
        integral = phi_norm_integral(couple, phi, p, a)
        dyadic = dyadic_norm(couple, phi, p, a)
        ju = j_norm_upper(couple, phi, p, a)
        ratio = integral / dyadic if dyadic > 0 else math.nan
        ok &= bool(np.isfinite(integral) and np.isfinite(dyadic))
        rows.append([label, integral, dyadic, ratio, ju])
    return Result(["k", "integral", "dyadic", "ratio", "j_upper"], rows,
                  "pass" if ok else "fail", grid={"J": couple.J})


def _cmd_besov_norm(cfg):
    from .interp import BesovCouple, besov_norm
    from .kernel import caputo
    from .volterra import interpolation_parameter
    from .weights import power_weight
    p = float(cfg["p"])
    couple = BesovCouple(p, float(cfg.get("s0", 2.0)), float(cfg.get("s1", 0.0)),
                         int(cfg.get("N", 256)))
    q = float(cfg.get("q", 2.0))
    ks = _as_list(cfg.get("k"), [2, 3, 4, 5, 6])
    s = None
    if "phi" in cfg:
        phi = _phi_from(cfg["phi"])
    elif "alpha" in cfg and "gamma" in cfg:
        al, g = float(cfg["alpha"]), float(cfg["gamma"])
        phi = interpolation_parameter(power_weight(g, q), q, caputo(al))
        s = couple.s0 - couple.s0 * (1.0 + g) / (q * al)
    else:
        raise ConfigError("besov-norm needs phi or both alpha and gamma")
    rows, ratios = [], []
    for k in ks:
        c = couple.mode(2 ** int(k))
        nrm = besov_norm(couple, q, c, phi=phi)
        pred = 2.0 ** (int(k) * s) if s is not None else math.nan
        ratios.append(nrm / pred)
        rows.append([k, nrm, pred, nrm / pred])
    status, summary = "ok", {}
    if s is not None:
        band = max(ratios) / min(ratios)
        summary = {"exponent": s, "band": band}
        status = "pass" if band <= float(cfg.get("tol", 4.0)) else "fail"
    return Result(["k", "norm", "predicted", "ratio"], rows, status, summary,
                  {"N": couple.N, "modes": "2^k"})


def _cmd_solve_volterra(cfg):
    from .gridfunc import GridFunction, uniform_time_grid
    from .scaling import compile_expression
    from .volterra import residual_check, solve_volterra_forward
    kappa = _kernel_from(cfg)
    T = float(cfg.get("T", 1.0))
    M = int(cfg.get("M", 2048))
    grid = uniform_time_grid(T, M)
    fdesc = cfg.get("f", 1.0)
    if isinstance(fdesc, str):
        fv = np.broadcast_to(compile_expression(fdesc)(grid), grid.shape).astype(float)
    else:
        fv = np.full(grid.size, float(fdesc))
    f = GridFunction(grid, fv)
    u0 = float(cfg.get("u0", 1.0))
    model = None
    if kappa.family == "caputo":
        from .subordinator import exact_stable
        model = exact_stable(kappa.alpha, int(cfg["seed"]))
    sol = solve_volterra_forward(kappa, u0, f, model, min(int(cfg["n"]), 20_000),
                                 jobs=int(cfg["jobs"]))
    res = residual_check(kappa, sol.u, f, u0)
    step = max(M // 64, 1)
    idx = np.arange(0, grid.size, step)
    if idx[-1] != grid.size - 1:
        idx = np.append(idx, grid.size - 1)
    hw = np.broadcast_to(sol.half_width, grid.shape)
    rows = [[grid[i], sol.u.values[i], hw[i]] for i in idx]
    if sol.status == "inconclusive":
        status = "inconclusive"
    else:
        status = "pass" if res <= float(cfg.get("tol", 5e-3)) else "fail"
    return Result(["t", "u", "half_width"], rows, status, {"residual": res},
                  {"T": T, "M": M, "rows_every": step})


def _extension_inputs(cfg):
    couple = _couple_from(cfg)
    w = _weight_from(cfg)
    mode = cfg.get("mode", "local")
    kernel = _kernel_from(cfg, required=(mode == "nonlocal")) if mode == "nonlocal" else None
    a = couple.unit(int(_as_list(cfg.get("k"), [0])[0]))
    kw = {"theta_source": cfg.get("theta_source", "auto"), "seed": int(cfg["seed"]),
          "n_mc": int(cfg.get("n_mc", 4000)), "jobs": int(cfg["jobs"])}
    return couple, w, mode, kernel, a, kw


def _finite_status(*xs):
    vals = [x for x in xs if not (isinstance(x, float) and math.isnan(x))]
    return "pass" if all(np.isfinite(vals)) else "fail"


def _cmd_extension(cfg):
    from .volterra import roundtrip_experiment
    couple, w, mode, kernel, a, kw = _extension_inputs(cfg)
    ext_r, _, ext = roundtrip_experiment(a, couple, w, float(cfg["p"]), mode, kernel, **kw)
    res = ext.residual() if ext.levels.size else 0.0
    return Result(["norm_a", "norm_u", "norm_f", "ext_ratio", "residual", "ci"],
                  [[ext.norm_a, ext.norm_u, ext.norm_f, ext_r.ratio, res, ext.ci]],
                  _finite_status(ext_r.ratio), grid={"mode": mode, "levels": ext.levels.size})


def _cmd_trace(cfg):
    from .volterra import roundtrip_experiment
    couple, w, mode, kernel, a, kw = _extension_inputs(cfg)
    _, tr_r, ext = roundtrip_experiment(a, couple, w, float(cfg["p"]), mode, kernel, **kw)
    direct = tr_r.config.get("direct", math.nan)
    return Result(["bound", "direct", "profile_norm", "trace_ratio"],
                  [[tr_r.lhs_norm, direct, tr_r.rhs_norm, tr_r.ratio]],
                  _finite_status(tr_r.ratio), grid={"mode": mode, "lambda_per_decade": 32})


def _cmd_finite_interval(cfg):
    from .volterra import construct_extension, finite_interval_trace
    couple, w, mode, kernel, a, kw = _extension_inputs(cfg)
    T = float(cfg.get("T", 1.0))
    ext = construct_extension(a, couple, w, float(cfg["p"]), mode, kernel, **kw)
    tb = finite_interval_trace(ext, T, couple, w, float(cfg["p"]), kernel)
    ratio = tb.bound / tb.direct if tb.direct > 0 else math.nan
    return Result(["T", "bound", "direct", "ratio"], [[T, tb.bound, tb.direct, ratio]],
                  "pass" if np.isfinite(tb.bound) and tb.bound >= tb.direct * (1 - 1e-9)
                  else "fail", grid={"T": T, "mode": mode})


_BATTERY_COLUMNS = ["case_id", "mode", "alpha", "gamma", "p", "ext_ratio", "trace_ratio",
                    "residual", "ci"]


def _cmd_roundtrip(cfg):
    from .volterra import default_battery, run_battery
    battery = default_battery()
    if "cases" in cfg:
        battery["cases"] = cfg["cases"]
    if "couple" in cfg:
        battery["couple"] = cfg["couple"]
    battery["seed"] = int(cfg["seed"])
    rows = run_battery(battery, int(cfg["jobs"]))
    ratios = np.array([[r["ext_ratio"], r["trace_ratio"]] for r in rows], dtype=float).ravel()
    finite = ratios[np.isfinite(ratios)]
    band = float(finite.max() / finite.min()) if finite.size else math.nan
    ok = finite.size == ratios.size and band < float(cfg.get("tol", 100.0))
    return Result(_BATTERY_COLUMNS, [[r[c] for c in _BATTERY_COLUMNS] for r in rows],
                  "pass" if ok else "fail", {"band": band, "cases": len(rows)},
                  {"couple": battery["couple"]})


_HANDLERS = {
    "check-scaling": _cmd_check_scaling, "kernel-info": _cmd_kernel_info,
    "extend-kernel": _cmd_extend_kernel, "simulate": _cmd_simulate, "theta": _cmd_theta,
    "sonine": _cmd_sonine, "ap-constant": _cmd_ap_constant, "hardy": _cmd_hardy,
    "extend-weight": _cmd_extend_weight, "interp-norm": _cmd_interp_norm,
    "besov-norm": _cmd_besov_norm, "solve-volterra": _cmd_solve_volterra,
    "extension": _cmd_extension, "trace": _cmd_trace, "roundtrip": _cmd_roundtrip,
    "finite-interval": _cmd_finite_interval,
}


# ---------------------------------------------------------------------------
# argument parsing


def _numlist(s):
    try:
        vals = [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc
    return vals[0] if len(vals) == 1 else vals


def _intlist(s):
    try:
        vals = [int(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from exc
    return vals[0] if len(vals) == 1 else vals


def _pair(s):
    v = _numlist(s)
    if not isinstance(v, list) or len(v) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers a,b, got {s!r}")
    return v


def _desc(s):
    return json.loads(s) if s.lstrip().startswith("{") else s


def _number_or_expr(s):
    try:
        return float(s)
    except ValueError:
        return s


_FLAG_TYPES = {
    "phi": _desc, "kernel": _desc, "weight": _desc, "couple": json.loads,
    "bounds": _pair, "K": int, "alpha": float, "lambda": _numlist, "tol": float,
    "T": float, "t": _numlist, "strategy": str, "intensity": float, "r": _numlist,
    "n": int, "source": str, "M": int, "gamma": float, "p": float, "trials": int,
    "eps": float, "k": _intlist, "a": lambda s: [float(x) for x in s.split(",")],
    "q": float, "s0": float, "s1": float, "N": int, "u0": float, "f": _number_or_expr,
    "mode": str, "theta_source": str, "n_mc": int,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


_HELP = {
    "check-scaling": "fit the dilation exponents of a scaling function",
    "kernel-info": "Bernstein function and κ* of a kernel",
    "extend-kernel": "extend a kernel beyond its horizon",
    "simulate": "Laplace check of subordinator samples",
    "theta": "relaxation function Θ(t, λ)",
    "sonine": "resolvent ϰ and the Sonine identity",
    "ap-constant": "dyadic A_p constant of a weight",
    "hardy": "two-weight Hardy constants",
    "extend-weight": "extend a weight beyond a finite interval",
    "interp-norm": "interpolation norms of a sequence",
    "besov-norm": "Besov norm with variable smoothness",
    "solve-volterra": "solve the Volterra equation on a graded grid",
    "extension": "extension of trace data with its norm ratio",
    "trace": "trace bound for extended data",
    "roundtrip": "extension and trace ratios over a battery of cases",
    "finite-interval": "trace bound from data on a finite interval",
}


def build_parser():
    parser = _Parser(prog="interptrace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"interptrace {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="report path (default stdout)")
        sp.add_argument("--format", choices=["csv", "json"])
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--selftest", action="store_true",
                        help="run the module's reference examples and exit")
        for key in _FLAGS[name]:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=_FLAG_TYPES[key])
    return parser


def _merge(args):
    cfg = load_config(args.config) if args.config else {}
    if args.config and cfg.get("command") != args.command:
        raise ConfigError(
            f"config command {cfg.get('command')!r} does not match {args.command!r}")
    raw = {k: v for k, v in vars(args).items()
           if v is not None and k not in ("config", "selftest")}
    base = {k: v for k, v in cfg.items()}
    base.update(raw)
    return validate_config(base)


def run_command(argv):
    """Parse ``argv``, run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("a subcommand is required; see --help")
        if args.selftest:
            from .selftest import run_selftest
            return run_selftest(_MODULE_OF[args.command], sys.stdout)
        cfg = _merge(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    header = {"command": cfg["command"], "seed": cfg["seed"],
              "config": {k: v for k, v in sorted(cfg.items()) if k not in ("out", "format", "jobs")}}
    try:
        np.seterr(all="ignore")
        result = _HANDLERS[cfg["command"]](cfg)
        write_report(result, cfg.get("out"), cfg["format"], header)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InterptraceError as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return {"pass": EXIT_PASS, "ok": EXIT_PASS, "fail": EXIT_FAIL,
            "inconclusive": EXIT_INCONCLUSIVE}[result.status]


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
