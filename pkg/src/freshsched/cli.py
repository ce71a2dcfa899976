"""Command-line front end.

Every subcommand reads a JSON run config (``--config`` or a bundled
``--recipe``), validates it against a strict schema and writes a CSV whose
first line records the SHA-256 of the resolved config.  Exit codes: 0 on
success, 1 when a computation fails, 2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema

from . import info_metrics as im
from .errors import ComputationError, ConfigurationError, InputError
from .gittins import gittins_table
from .multi_source import build_whittle_table, source_arms
from .penalty import (PenaltyCurve, dip_penalty, monotone_penalty, penalty_from_csv,
                      service_from_spec)
from .simulator import (MULTI_POLICIES, Periodic, SimConfig, SourceSpec, Threshold, ZeroWait,
                        optimal_gaw, optimal_sfb, replicate)
from .single_source import mdp_oracle_average_cost, optimal_buffer_offset, threshold_roots

# ---------------------------------------------------------------------------
# schemas

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}

SERVICE = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["constant", "geometric", "lognormal", "pmf"]},
        "T": _POS_INT, "q": _NUM, "T_max": _POS_INT,
        "alpha": _NUM, "sigma": _NUM, "max_truncated_mass": _NUM,
        "pmf": {"type": "object", "additionalProperties": _NUM},
    },
}

PENALTY = {
    "oneOf": [
        {"type": "string"},
        {"type": "object", "additionalProperties": False, "required": ["values"],
         "properties": {"values": {"type": "array", "items": _NUM, "minItems": 2}}},
        {"type": "object", "additionalProperties": False, "required": ["shape"],
         "properties": {"shape": {"enum": ["dip", "monotone"]}, "dip": _POS_INT, "delta_max": _POS_INT,
                        "high": _NUM, "low": _NUM, "plateau": _NUM, "scale": _NUM, "height": _NUM}},
    ]
}

LOSS = {
    "oneOf": [
        {"enum": ["log", "brier", "zero_one", "quadratic"]},
        {"type": "object", "additionalProperties": False, "required": ["family"],
         "properties": {"family": {"enum": ["log", "brier", "zero_one", "alpha", "quadratic"]},
                        "alpha": _NUM}},
    ]
}

SOURCE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["penalty", "service"],
    "properties": {"penalty": PENALTY, "service": SERVICE, "weight": _NUM, "buffer": _POS_INT},
}

POLICY = {
    "oneOf": [
        {"enum": ["zero_wait", "gaw_optimal", "sfb_optimal", *MULTI_POLICIES]},
        {"type": "object", "additionalProperties": False, "required": ["kind", "period"],
         "properties": {"kind": {"const": "periodic"}, "period": _POS_INT, "buffer": _POS_INT}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "b", "beta"],
         "properties": {"kind": {"const": "threshold"}, "b": _NONNEG_INT, "beta": _NUM}},
    ]
}

SCHEMAS = {
    "metrics": {
        "type": "object", "additionalProperties": False, "required": ["theta_max", "loss"],
        "properties": {
            "data": {"type": "string"}, "train": {"type": "string"},
            "chain": {"type": "object", "additionalProperties": False, "required": ["transition"],
                      "properties": {"transition": {"type": "array", "items": {"type": "array", "items": _NUM}},
                                     "label_delay": _NONNEG_INT, "label_map": {"type": "array"},
                                     "window": _POS_INT}},
            "window": _POS_INT, "loss": LOSS, "theta_max": _NONNEG_INT,
        },
        "oneOf": [{"required": ["data"]}, {"required": ["chain"]}],
    },
    "gittins": {
        "type": "object", "additionalProperties": False, "required": ["penalty", "service"],
        "properties": {"penalty": PENALTY, "service": SERVICE, "delta_max": _NONNEG_INT, "tau_max": _POS_INT},
    },
    "threshold": {
        "type": "object", "additionalProperties": False, "required": ["penalty", "service"],
        "properties": {"penalty": PENALTY, "service": SERVICE, "B": _POS_INT, "delta_truncate": _POS_INT},
    },
    "whittle": {
        "type": "object", "additionalProperties": False, "required": ["sources"],
        "properties": {"sources": {"type": "array", "items": SOURCE, "minItems": 1}, "delta_max": _NONNEG_INT},
    },
    "simulate": {
        "type": "object", "additionalProperties": False, "required": ["sources", "policies", "horizon"],
        "properties": {
            "sources": {"type": "array", "items": SOURCE, "minItems": 1},
            "policies": {"type": "array", "items": POLICY, "minItems": 1},
            "horizon": _POS_INT, "warmup": _NONNEG_INT, "seed": _NONNEG_INT, "replications": _POS_INT,
            "sweep": {"type": "object", "additionalProperties": False, "required": ["parameter", "values"],
                      "properties": {"parameter": {"enum": ["sigma", "weight"]},
                                     "values": {"type": "array", "items": _NUM, "minItems": 1},
                                     "source": _NONNEG_INT}},
            "trace": {"type": "object", "additionalProperties": False, "required": ["length", "path"],
                      "properties": {"length": _POS_INT, "path": {"type": "string"}}},
        },
    },
}


# ---------------------------------------------------------------------------
# config plumbing


def load_config(args, command):
    if args.recipe:
        try:
            text = resources.files("freshsched.recipes").joinpath(f"{args.recipe}.json").read_text()
        except FileNotFoundError:
            raise InputError(f"unknown recipe {args.recipe!r}") from None
        base = None
    elif args.config:
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        text = path.read_text()
        base = path.parent
    else:
        raise InputError("one of --config or --recipe is required")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    for key in ("seed", "replications"):
        val = getattr(args, key, None)
        if val is not None:
            if command != "simulate":
                raise InputError(f"--{key} only applies to simulate")
            cfg[key] = val
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config {where}: {exc.message}") from None
    return cfg, base


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _resolve(path, base):
    p = Path(path)
    if not p.is_absolute():
        if base is not None:
            p = base / p
        elif not p.exists():
            p = Path(str(resources.files("freshsched.recipes").joinpath(path)))
    if not p.is_file():
        raise InputError(f"file not found: {p}")
    return p


def build_penalty(spec, base) -> PenaltyCurve:
    if isinstance(spec, str):
        return penalty_from_csv(_resolve(spec, base))
    if "values" in spec:
        return PenaltyCurve(spec["values"])
    kw = {k: v for k, v in spec.items() if k != "shape"}
    return dip_penalty(**kw) if spec["shape"] == "dip" else monotone_penalty(**kw)


def build_sources(cfg, base):
    return [SourceSpec(build_penalty(s["penalty"], base), service_from_spec(s["service"]),
                       float(s.get("weight", 1.0)), int(s.get("buffer", 1)))
            for s in cfg["sources"]]


def _fmt(x):
    return repr(float(x)) if not isinstance(x, (int, str)) else str(x)


def emit(out, cfg, header, rows):
    buf = io.StringIO()
    buf.write(f"# config-sha256: {config_hash(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def note(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_metrics(args):
    cfg, base = load_config(args, "metrics")
    loss = im.loss_from_spec(cfg["loss"])
    window = int(cfg.get("window", 1))
    if "data" in cfg:
        source = im.load_time_series_csv(_resolve(cfg["data"], base), window)
    else:
        ch = cfg["chain"]
        source = im.ChainModel(ch["transition"], ch.get("label_delay", 0),
                               None if "label_map" not in ch else tuple(ch["label_map"]),
                               ch.get("window", window))
    theta_max = cfg["theta_max"]
    dec = im.markov_decomposition(source, loss, theta_max)
    eps = im.lag_epsilons(source, theta_max)
    header, rows = im.curve_rows(dec.direct, eps)
    if "train" in cfg:
        train = im.load_time_series_csv(_resolve(cfg["train"], base), window)
        cross = im.freshness_curve(source, loss, theta_max, train=train)
        header.append("cross_entropy")
        rows = [r + [float(v)] for r, v in zip(rows, cross.values)]
    emit(args.out, cfg, header, rows)


def cmd_gittins(args):
    cfg, base = load_config(args, "gittins")
    p = build_penalty(cfg["penalty"], base)
    S = service_from_spec(cfg["service"])
    gt = gittins_table(p, S, cfg.get("delta_max"), cfg.get("tau_max"))
    n = gt.values.size if "delta_max" not in cfg else cfg["delta_max"] + 1
    emit(args.out, cfg, ["delta", "gittins"], [[d, gt(d)] for d in range(n)])


def cmd_threshold(args):
    cfg, base = load_config(args, "threshold")
    p = build_penalty(cfg["penalty"], base)
    S = service_from_spec(cfg["service"])
    B = int(cfg.get("B", 1))
    gt = gittins_table(p, S)
    roots = threshold_roots(p, S, B, gt)
    b, beta = optimal_buffer_offset(p, S, B, gt)
    emit(args.out, cfg, ["b", "beta"], [[i, r] for i, r in enumerate(roots)])
    print(f"b*={b}")
    print(f"beta*={beta!r}")
    if args.oracle:
        res = mdp_oracle_average_cost(p, S, B, cfg.get("delta_truncate"))
        print(f"oracle_gain={res.gain!r}")
        print(f"oracle_delta={abs(res.gain - beta):.3e}")


def cmd_whittle(args):
    cfg, base = load_config(args, "whittle")
    arms = []
    for l, s in enumerate(build_sources(cfg, base)):
        arms += source_arms(l, s.penalty, s.service, s.weight, range(s.buffer))
    length = None if "delta_max" not in cfg else cfg["delta_max"] + 1
    table = build_whittle_table(arms, length)
    emit(args.out, cfg, ["l", "b", "delta", "whittle"], table.rows())


def _single_policy(spec, src):
    if spec == "zero_wait":
        return ZeroWait()
    if spec == "gaw_optimal":
        return optimal_gaw(src.penalty, src.service)
    if spec == "sfb_optimal":
        return optimal_sfb(src.penalty, src.service, src.buffer)
    if spec["kind"] == "periodic":
        return Periodic(spec["period"], spec.get("buffer", src.buffer))
    return Threshold(spec["b"], spec["beta"])


def _policy_label(spec):
    if isinstance(spec, str):
        return spec
    if spec["kind"] == "periodic":
        return f"periodic_{spec['period']}"
    return f"threshold_b{spec['b']}"


def _swept(sources, cfg, value):
    sw = cfg["sweep"]
    targets = [sw["source"]] if "source" in sw else range(len(sources))
    out = list(sources)
    for l in targets:
        if l >= len(out):
            raise ConfigurationError(f"sweep source {l} does not exist")
        if sw["parameter"] == "weight":
            out[l] = replace(out[l], weight=float(value))
        else:
            spec = dict(cfg["sources"][l]["service"])
            if spec["kind"] != "lognormal":
                if "source" in sw:
                    raise ConfigurationError("sigma sweep needs a lognormal service")
                continue
            spec["sigma"] = float(value)
            out[l] = replace(out[l], service=service_from_spec(spec))
    return out


def _simulate_rows(cfg, sources, sweep_value, trace_cfg):
    rows = []
    for spec in cfg["policies"]:
        label = _policy_label(spec)
        if isinstance(spec, str) and spec in MULTI_POLICIES:
            srcs = [replace(s, policy=spec) for s in sources]
            policy = None
        else:
            if len(sources) != 1:
                raise ConfigurationError(f"policy {label!r} needs exactly one source")
            srcs = sources
            policy = _single_policy(spec, sources[0])
        config = SimConfig(srcs, cfg["horizon"], cfg.get("warmup"), cfg.get("seed", 0),
                           cfg.get("replications", 1))
        rep = replicate(config, policy=policy)
        lead = [] if sweep_value is None else [sweep_value]
        rows.append(lead + [label, "all", "average_error", *rep["average_error"]])
        for l in range(len(sources)):
            for metric in ("error", "aoi"):
                rows.append(lead + [label, l, metric, *rep[f"source{l}_{metric}"]])
        if trace_cfg is not None:
            traced = replace(config, trace_length=trace_cfg["length"])
            res = (replicate(traced, 1, policy=policy)).runs[0]
            _write_trace(trace_cfg["path"], label, sweep_value, res.trace)
    return rows


def _write_trace(path, label, sweep_value, trace):
    tag = label if sweep_value is None else f"{label}_{sweep_value}"
    p = Path(path)
    p = p.with_name(f"{p.stem}_{tag}{p.suffix or '.csv'}")
    cols = trace.shape[1]
    header = ["t", "aoi", "busy"] if cols == 2 else ["t", *(f"aoi{l}" for l in range(cols - 1)), "active"]
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in enumerate(trace):
            w.writerow([t, *row.tolist()])


def cmd_simulate(args):
    cfg, base = load_config(args, "simulate")
    sources = build_sources(cfg, base)
    trace_cfg = cfg.get("trace")
    header = ["policy", "source", "metric", "value", "stderr"]
    rows = []
    if "sweep" in cfg:
        header = ["sweep"] + header
        for v in cfg["sweep"]["values"]:
            rows += _simulate_rows(cfg, _swept(sources, cfg, v), v, trace_cfg)
    else:
        rows = _simulate_rows(cfg, sources, None, trace_cfg)
    emit(args.out, cfg, header, rows)


COMMANDS = {
    "metrics": (cmd_metrics, "inference-error-vs-AoI curve with its decomposition"),
    "gittins": (cmd_gittins, "Gittins index table"),
    "threshold": (cmd_threshold, "per-offset thresholds and the optimal offset"),
    "whittle": (cmd_whittle, "Whittle index tables for every arm"),
    "simulate": (cmd_simulate, "simulate policies and report average errors"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="freshsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="JSON run config")
        src.add_argument("--recipe", help="name of a bundled config")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        if name == "simulate":
            sp.add_argument("--seed", type=int)
            sp.add_argument("--replications", type=int)
        if name == "threshold":
            sp.add_argument("--oracle", action="store_true", help="cross-check with value iteration")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command][0](args)
    except InputError as exc:
        note(f"error: {exc}")
        return 2
    except OSError as exc:
        note(f"error: {exc}")
        return 2
    except ComputationError as exc:
        note(f"error: {exc}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
