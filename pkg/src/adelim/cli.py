"""Command-line front end: ``adelim {eliminate,compare,sweep} --config FILE --out DIR``.

Configs are JSON. Exit codes: 0 success, 2 invalid configuration, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import copy
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .elimination import Method, build_projectors, effective_generator, slow_spectrum
from .liouville import BipartiteLindblad, DensityVec, LindbladModel, steady_state
from .models import (
    BRANCHES,
    RabiParams,
    TwoQubitParams,
    build_rabi,
    build_two_qubit,
    rabi_effective_coefficients,
    rabi_fit_coefficients,
    rabi_reference_state,
    two_qubit_branch_state,
    two_qubit_closed_form,
    two_qubit_engine_values,
)
from .numkernel import NumericalError
from .operators import coherent, ket, phi_plus, projector
from .pipelines import boson_set, pauli_set, run_comparison, slow_rate
from .simulate import convergence_scan

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SCHEMAS = {
    "two_qubit": {"required": ("gamma", "chi"), "optional": {}},
    "rabi": {"required": ("g", "eta", "kappa", "Gamma"), "optional": {"fock_cutoff": 12}},
    "custom": {"required": (), "optional": {}},
}
SWEEP_PARAMETER = {"two_qubit": "chi", "rabi": "g"}
DEFAULT_METHOD = {"two_qubit": ("exact", 1), "rabi": ("factorized", 0), "custom": ("exact", 1)}
DEFAULT_POINTS = {"two_qubit": 400, "rabi": 200}
TOP_KEYS = {"model", "parameters", "method", "order", "terms", "times", "initial_state",
            "initial_state_b", "branch", "sweep", "custom"}


class ConfigError(ValueError):
    pass


# -- config parsing ---------------------------------------------------------

def _entry(x, name):
    if isinstance(x, bool):
        raise ConfigError(f"{name}: matrix entries must be numbers or [re, im] pairs")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{name}: matrix entries must be numbers or [re, im] pairs, got {x!r}")


def parse_matrix(value, name: str) -> np.ndarray:
    """Square nested list whose entries are numbers or [re, im] pairs."""
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(f"{name}: expected a non-empty list of rows")
    n = len(value)
    if any(len(r) != n for r in value):
        raise ConfigError(f"{name}: expected a square matrix")
    arr = np.array([[_entry(x, name) for x in row] for row in value], dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name}: matrix has non-finite entries")
    return arr


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    return value


def resolve_config(raw: dict) -> dict:
    """Validate a raw config and fill in every default explicitly."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}; valid keys: {sorted(TOP_KEYS)}")
    model = raw.get("model")
    if model not in SCHEMAS:
        raise ConfigError(f"model must be one of {sorted(SCHEMAS)}, got {model!r}")
    cfg = {"model": model}

    schema = SCHEMAS[model]
    params = raw.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be an object")
    valid = list(schema["required"]) + list(schema["optional"])
    bad = sorted(set(params) - set(valid))
    if bad:
        raise ConfigError(f"unknown parameter(s) {bad} for model {model}; valid names: {valid}")
    missing = [k for k in schema["required"] if k not in params]
    if missing:
        raise ConfigError(f"missing parameter(s) {missing} for model {model}; valid names: {valid}")
    cfg["parameters"] = {k: _number(params.get(k, schema["optional"].get(k)), f"parameters.{k}")
                         for k in valid}

    d_method, d_order = DEFAULT_METHOD[model]
    method = raw.get("method", d_method)
    try:
        cfg["method"] = Method(method).value
    except ValueError:
        raise ConfigError(f"method must be one of {[m.value for m in Method]}, got {method!r}") from None
    order = raw.get("order", d_order)
    if isinstance(order, bool) or not isinstance(order, int) or order < 0:
        raise ConfigError(f"order must be a non-negative integer, got {order!r}")
    cfg["order"] = order
    terms = raw.get("terms", 1)
    if isinstance(terms, bool) or not isinstance(terms, int) or terms < 1:
        raise ConfigError(f"terms must be a positive integer, got {terms!r}")
    cfg["terms"] = terms

    times = raw.get("times")
    if times is not None:
        if not isinstance(times, dict) or set(times) - {"start", "stop", "count"}:
            raise ConfigError("times must be an object with start, stop, count")
        start = _number(times.get("start", 0.0), "times.start")
        stop = _number(times.get("stop"), "times.stop") if "stop" in times else None
        count = times.get("count", DEFAULT_POINTS.get(model, 200))
        if isinstance(count, bool) or not isinstance(count, int) or count < 2:
            raise ConfigError(f"times.count must be an integer >= 2, got {count!r}")
        if start < 0:
            raise ConfigError("times.start must be >= 0")
        if stop is not None and not stop > start:
            raise ConfigError(f"times.stop must exceed times.start (got start={start}, stop={stop})")
        times = {"start": start, "stop": stop, "count": count}
    elif model == "custom":
        raise ConfigError("times is required for the custom model")
    cfg["times"] = times

    if model == "two_qubit":
        branch = raw.get("branch", "s0")
        if branch not in BRANCHES:
            raise ConfigError(f"branch must be one of {list(BRANCHES)}, got {branch!r}")
        cfg["branch"] = branch
    elif "branch" in raw:
        raise ConfigError("branch applies only to the two_qubit model")

    cfg["initial_state"] = _initial_state(raw.get("initial_state"), model)
    b0 = raw.get("initial_state_b", "reference")
    if b0 != "reference":
        if not isinstance(b0, dict) or "matrix" not in b0:
            raise ConfigError("initial_state_b must be 'reference' or {\"matrix\": ...}")
        parse_matrix(b0["matrix"], "initial_state_b.matrix")
    cfg["initial_state_b"] = b0

    if model == "custom":
        cfg["custom"] = _custom_block(raw.get("custom"))
    elif "custom" in raw:
        raise ConfigError("custom block given for a built-in model")

    sweep = raw.get("sweep")
    if sweep is not None:
        if model not in SWEEP_PARAMETER:
            raise ConfigError("sweep is supported for the two_qubit and rabi models")
        name = SWEEP_PARAMETER[model]
        if not isinstance(sweep, dict) or set(sweep) - {"parameter", "values"}:
            raise ConfigError("sweep must be an object with parameter and values")
        if sweep.get("parameter", name) != name:
            raise ConfigError(f"sweep parameter for {model} must be {name!r}")
        values = sweep.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values must be a non-empty list")
        values = [_number(v, "sweep.values") for v in values]
        if any(v <= 0 for v in values) or any(b >= a for a, b in zip(values, values[1:])):
            raise ConfigError("sweep.values must be positive and strictly descending")
        cfg["sweep"] = {"parameter": name, "values": values}
    else:
        cfg["sweep"] = None

    # build every parameter point once so range errors surface before any work
    points = [None] if cfg["sweep"] is None else cfg["sweep"]["values"]
    for value in points:
        trial = copy.deepcopy(cfg["parameters"])
        if value is not None:
            trial[cfg["sweep"]["parameter"]] = value
        try:
            _params({"model": model, "parameters": trial})
        except ValueError as exc:
            raise ConfigError(f"parameters: {exc}") from None
    return cfg


def _initial_state(value, model):
    presets = {"two_qubit": ("phi_plus", "ground", "excited"),
               "rabi": ("coherent", "vacuum"), "custom": ()}[model]
    if value is None:
        if model == "custom":
            raise ConfigError("initial_state is required for the custom model")
        value = presets[0]
    if isinstance(value, str):
        value = {"preset": value}
    if not isinstance(value, dict):
        raise ConfigError("initial_state must be a preset name or an object")
    if "matrix" in value:
        if set(value) != {"matrix"}:
            raise ConfigError("initial_state with a matrix takes no other keys")
        parse_matrix(value["matrix"], "initial_state.matrix")
        return value
    preset = value.get("preset")
    if preset not in presets:
        raise ConfigError(f"initial_state preset must be one of {list(presets)}, got {preset!r}")
    out = {"preset": preset}
    if preset == "coherent":
        alpha = value.get("alpha", [1.0, 0.0])
        if not (isinstance(alpha, list) and len(alpha) == 2):
            raise ConfigError("initial_state.alpha must be [re, im]")
        out["alpha"] = [_number(x, "initial_state.alpha") for x in alpha]
    elif set(value) - {"preset"}:
        raise ConfigError(f"preset {preset!r} takes no options")
    return out


def _custom_block(block):
    if not isinstance(block, dict):
        raise ConfigError("the custom model needs a 'custom' object")
    allowed = {"H_A", "H_B", "H_AB", "jumps_A", "jumps_B", "jumps_AB", "rho_b"}
    bad = set(block) - allowed
    if bad:
        raise ConfigError(f"unknown custom keys {sorted(bad)}; valid keys: {sorted(allowed)}")
    for key in ("H_A", "H_B"):
        if key not in block:
            raise ConfigError(f"custom.{key} is required")
    return block


# -- model construction -----------------------------------------------------

def _params(cfg):
    p = cfg["parameters"]
    if cfg["model"] == "two_qubit":
        return TwoQubitParams(float(p["gamma"]), float(p["chi"]))
    if cfg["model"] == "rabi":
        n = p["fock_cutoff"]
        if not float(n).is_integer():
            raise ValueError(f"fock_cutoff must be an integer, got {n}")
        return RabiParams(float(p["g"]), float(p["eta"]), float(p["kappa"]), float(p["Gamma"]), int(n))
    return None


def _jumps(items, name):
    if items is None:
        return ()
    if not isinstance(items, list):
        raise ConfigError(f"{name} must be a list")
    out = []
    for k, item in enumerate(items):
        if not isinstance(item, dict) or set(item) != {"operator", "rate"}:
            raise ConfigError(f"{name}[{k}] must have exactly 'operator' and 'rate'")
        out.append((parse_matrix(item["operator"], f"{name}[{k}].operator"),
                    float(_number(item["rate"], f"{name}[{k}].rate"))))
    return tuple(out)


def _custom_model(block):
    h_a = parse_matrix(block["H_A"], "custom.H_A")
    h_b = parse_matrix(block["H_B"], "custom.H_B")
    dim = h_a.shape[0] * h_b.shape[0]
    h_ab = parse_matrix(block["H_AB"], "custom.H_AB") if "H_AB" in block else np.zeros((dim, dim))
    try:
        model = BipartiteLindblad.from_models(
            LindbladModel(h_a, _jumps(block.get("jumps_A"), "custom.jumps_A")),
            LindbladModel(h_b, _jumps(block.get("jumps_B"), "custom.jumps_B")),
            LindbladModel(h_ab, _jumps(block.get("jumps_AB"), "custom.jumps_AB")))
    except ValueError as exc:
        raise ConfigError(f"custom: {exc}") from None
    if "rho_b" in block:
        try:
            rho_b = DensityVec.from_matrix(parse_matrix(block["rho_b"], "custom.rho_b"))
        except ValueError as exc:
            raise ConfigError(f"custom.rho_b: {exc}") from None
    else:
        rho_b = steady_state(model.L_B).state
    return model, rho_b


def build(cfg):
    """(model, rho_b, params) for a resolved config."""
    p = _params(cfg)
    if cfg["model"] == "two_qubit":
        return build_two_qubit(p), two_qubit_branch_state(p, cfg["branch"]), p
    if cfg["model"] == "rabi":
        return build_rabi(p), rabi_reference_state(), p
    model, rho_b = _custom_model(cfg["custom"])
    return model, rho_b, None


def initial_states(cfg, model):
    spec = cfg["initial_state"]
    dim_a = model.space.dim_a
    if "matrix" in spec:
        rho = parse_matrix(spec["matrix"], "initial_state.matrix")
    elif spec["preset"] == "phi_plus":
        rho = projector(phi_plus())
    elif spec["preset"] == "ground":
        rho = projector(ket(2, 0))
    elif spec["preset"] == "excited":
        rho = projector(ket(2, 1))
    elif spec["preset"] == "vacuum":
        rho = projector(ket(dim_a, 0))
    else:
        re, im = spec["alpha"]
        rho = projector(coherent(dim_a, complex(re, im)))
    if rho.shape[0] != dim_a:
        raise ConfigError(f"initial_state has dimension {rho.shape[0]}, subsystem A has {dim_a}")
    try:
        rho_a = DensityVec.from_matrix(rho)
        rho_a.check()
        rho_b0 = None
        if cfg["initial_state_b"] != "reference":
            rho_b0 = DensityVec.from_matrix(parse_matrix(cfg["initial_state_b"]["matrix"],
                                                         "initial_state_b.matrix"))
            rho_b0.check()
            if rho_b0.dim != model.space.dim_b:
                raise ValueError("initial_state_b dimension does not match subsystem B")
    except ValueError as exc:
        raise ConfigError(f"initial state: {exc}") from None
    return rho_a, rho_b0


def observable_set(cfg, model):
    space = model.space
    ops = {}
    if cfg["model"] == "rabi":
        ops |= boson_set(space)
    elif space.dim_a == 2:
        ops |= pauli_set("A", space)
    if space.dim_b == 2:
        ops |= pauli_set("B", space)
    return ops


def _eliminate(cfg, model, rho_b):
    pq = build_projectors(rho_b, model.space)
    return effective_generator(model, pq, cfg["method"], cfg["order"], cfg["terms"])


def _times(cfg, eg, p) -> np.ndarray:
    t = cfg["times"] or {"start": 0.0, "stop": None, "count": DEFAULT_POINTS[cfg["model"]]}
    stop = t["stop"]
    if stop is None:
        if cfg["model"] == "two_qubit":
            rate = -slow_rate(eg).real
            if rate <= 0:
                raise ConfigError("no decaying slow mode (chi = 0?); set times.stop explicitly")
            stop = 3.0 / rate
        else:
            stop = 3.0 / p.kappa if p.kappa > 0 else 30.0
        if stop <= t["start"]:
            raise ConfigError("default horizon does not exceed times.start; set times.stop")
    return np.linspace(t["start"], stop, t["count"])


# -- serialization ----------------------------------------------------------

def encode(value):
    """JSON-ready form; complex numbers become [re, im]."""
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return encode(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def provenance(cfg) -> dict:
    return {"version": __version__, "config": cfg}


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, payload: dict, cfg: dict) -> None:
    body = {"provenance": provenance(cfg)} | payload
    write_atomic(path, json.dumps(encode(body), sort_keys=True, indent=2) + "\n")


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header: list, rows, cfg: dict) -> None:
    buf = io.StringIO()
    buf.write(f"# adelim {__version__}\n")
    buf.write("# config: " + json.dumps(encode(cfg), sort_keys=True) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    write_atomic(path, buf.getvalue())


def trajectory_rows(traj, names):
    cols = [traj.times] + [traj.observables[n] for n in names]
    return zip(*cols)


# -- commands ---------------------------------------------------------------

def oracle_section(cfg, eg, p) -> dict | None:
    if cfg["model"] == "two_qubit":
        cf = two_qubit_closed_form(p)
        engine = two_qubit_engine_values(eg.reduced_L0, eg.reduced_L1, eg.reduced_A_generator)
        closed = {"zeta": cf.zeta, "xi": cf.xi, "beta": cf.beta,
                  "zeta_prime": cf.zeta_prime, "xi_prime": cf.xi_prime}
        diff = {k: abs(complex(engine[k]) - complex(closed[k])) for k in closed}
        return {"engine": engine, "closed_form": closed, "abs_difference": diff}
    if cfg["model"] == "rabi":
        shift, rate, resid = rabi_fit_coefficients(eg.reduced_A_generator, p)
        a_shift, a_rate = rabi_effective_coefficients(p)
        return {"engine": {"shift": shift, "rate": rate, "fit_residual": resid},
                "closed_form": {"shift": a_shift, "rate": a_rate},
                "abs_difference": {"shift": abs(shift - a_shift), "rate": abs(rate - a_rate)}}
    return None


def cmd_eliminate(cfg, out: Path) -> None:
    model, rho_b, p = build(cfg)
    eg = _eliminate(cfg, model, rho_b)
    payload = {
        "method": eg.method.value,
        "order": eg.order,
        "validated_order": eg.validated,
        "qlq_singular": eg.qlq_singular,
        "condition_number": eg.condition_number,
        "rho_b": rho_b.matrix(),
        "reduced_L0": eg.reduced_L0,
        "reduced_L1": eg.reduced_L1,
        "reduced_A_generator": eg.reduced_A_generator,
        "reduced_initial_map": eg.reduced_initial_map,
        "spectrum": _sorted_spectrum(slow_spectrum(eg)),
    }
    oracle = oracle_section(cfg, eg, p)
    if oracle is not None:
        payload["oracle"] = oracle
    write_json(out / "eliminate.json", payload, cfg)


def _sorted_spectrum(ev):
    ev = np.round(np.asarray(ev, dtype=complex), 14) + 0.0
    return ev[np.lexsort((ev.imag, ev.real))]


def _compare(cfg, model, rho_b, p):
    eg = _eliminate(cfg, model, rho_b)
    times = _times(cfg, eg, p)
    rho_a, rho_b0 = initial_states(cfg, model)
    echo = dict(cfg["parameters"]) | {"times": {"start": float(times[0]), "stop": float(times[-1]),
                                                "count": int(times.size)}}
    return run_comparison(model, rho_b, rho_a, times, observable_set(cfg, model),
                          cfg["method"], cfg["order"], rho_b0, echo, eg)


def cmd_compare(cfg, out: Path) -> None:
    model, rho_b, p = build(cfg)
    run = _compare(cfg, model, rho_b, p)
    cfg = dict(cfg) | {"times": run.report.parameters["times"]}
    names = sorted(run.exact.observables)
    header = ["time"] + names
    write_csv(out / "exact.csv", header, trajectory_rows(run.exact, names), cfg)
    write_csv(out / "eliminated.csv", header, trajectory_rows(run.approx, names), cfg)
    write_json(out / "report.json", {"report": run.report.to_dict()}, cfg)


def cmd_sweep(cfg, out: Path) -> None:
    if cfg["sweep"] is None:
        raise ConfigError("sweep command needs a 'sweep' block with parameter values")
    name = cfg["sweep"]["parameter"]

    def point(value):
        sub = copy.deepcopy(cfg)
        sub["parameters"][name] = value
        sub["sweep"] = None
        model, rho_b, p = build(sub)
        run = _compare(sub, model, rho_b, p)
        oracle = oracle_section(sub, run.eliminated, p)
        if cfg["model"] == "two_qubit":
            extras = {"zeta_prime": oracle["engine"]["zeta_prime"],
                      "xi_prime": oracle["engine"]["xi_prime"],
                      "zeta_prime_closed_form": oracle["closed_form"]["zeta_prime"],
                      "xi_prime_closed_form": oracle["closed_form"]["xi_prime"]}
        else:
            extras = {"shift": oracle["engine"]["shift"], "rate": oracle["engine"]["rate"],
                      "shift_closed_form": oracle["closed_form"]["shift"],
                      "rate_closed_form": oracle["closed_form"]["rate"]}
        return run.report, extras

    tracked = "sx_A" if cfg["model"] == "two_qubit" else "x_A"
    table = convergence_scan(point, cfg["sweep"]["values"], tracked)
    obs = sorted(table.rows[0].sup_deviation)
    extra_names = list(table.rows[0].extras)
    header = [name] + [f"sup_{o}" for o in obs] + extra_names
    rows = [[r.coupling] + [r.sup_deviation[o] for o in obs] + [r.extras[e] for e in extra_names]
            for r in table.rows]
    write_csv(out / "sweep.csv", header, rows, cfg)
    write_json(out / "sweep.json", {"tracked": table.observable, "monotone": table.monotone,
                                    "violations": list(table.violations),
                                    "header": header, "rows": rows}, cfg)


COMMANDS = {"eliminate": cmd_eliminate, "compare": cmd_compare, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adelim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"adelim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cp = sub.add_parser(name)
        cp.add_argument("--config", required=True, type=Path, help="JSON config file")
        cp.add_argument("--out", required=True, type=Path, help="output directory")
        cp.add_argument("--method", choices=[m.value for m in Method])
        cp.add_argument("--order", type=int)
    return parser


def load_config(path: Path, method=None, order=None) -> dict:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if isinstance(raw, dict):
        if method is not None:
            raw["method"] = method
        if order is not None:
            raw["order"] = order
    return resolve_config(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.method, args.order)
        COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"adelim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"adelim: numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
