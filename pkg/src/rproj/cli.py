"""
Command line entry point: `rproj <command> [--config FILE] [--seed N] [--outdir DIR] [--threads N]`.

Every command writes <outdir>/<command>-<timestamp>/summary.json and
detail.csv.  summary.json embeds the resolved config and no timestamps or
runtimes, so identical config and seed give byte-identical summaries.
Exit codes: 0 all declared checks pass, 1 a check failed, 2 config error.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import time

import numpy as np

from . import experiments as ex
from . import fractal_gen as fg
from . import ledger as lg
from . import nondeg as nd
from . import suites
from .errors import RprojError
from .partition_cover import Grid, PointSet, RTuple
from .regularize import Filtration, bourgain_regularize_measure, bourgain_regularize_set

SCHEMA_VERSION = 1


class SchemaError(Exception):
    def __init__(self, msg, line=None):
        super().__init__(msg)
        self.line = line


# -- schemas ------------------------------------------------------------------
# field: (kind, default); default REQUIRED marks a required field

REQUIRED = object()

_SET = ("set", {"generator": "cantor", "alpha": 4.5, "depth": 7, "window": 4, "seed": 0})

SCHEMAS = {
    "rep-check": {"form": ("form", "sig22"), "n_samples": ("int", 1000),
                  "checks": ("checks", {})},
    "nondeg-scan": {"form": ("form", "sig22"), "step_inv": ("int", 8),
                    "eps_list": ("floats", [1e-1, 1e-2, 1e-3]),
                    "wronskian_grid": ("int", 9), "checks": ("checks", {})},
    "gen": {"generator": ("str", REQUIRED), "alpha": ("float", 4.5), "depth": ("int", 7),
            "window": ("optint", None), "dim": ("int", 9), "form": ("form", "sig22"),
            "dims": ("ints", [8]), "delta": ("scale", 2 ** -6), "checks": ("checks", {})},
    "project-exp": {"set": _SET, "form": ("form", "sig22"), "lam": ("int", 1),
                    "delta": ("scale", REQUIRED), "eps": ("float", 0.1),
                    "n_samples": ("int", 100), "adversarial_k": ("int", 2),
                    "slack_exponent": ("optfloat", None),
                    "covering_levels": ("ints", []),
                    "checks": ("checks", {"max_exceptional_fraction": 0.1})},
    "multislice-exp": {"set": _SET, "form": ("form", "sig22"), "rt64": ("ints", REQUIRED),
                       "rho": ("scale", REQUIRED), "eps": ("float", 0.01),
                       "n_samples": ("int", 100),
                       "checks": ("checks", {"max_exceptional_fraction": 0.1})},
    "energy-improve": {"set": _SET, "form": ("form", "sig22"), "alpha": ("float", 1.0),
                       "delta": ("scale", REQUIRED), "ells": ("floats", [1.0, 1.5, 2.0]),
                       "n_samples": ("int", 50), "n_points": ("int", 50),
                       "strict": ("bool", True),
                       "checks": ("checks", {"median_decreasing": True})},
    "slab-exp": {"set": _SET, "form": ("form", "sig22"), "rt64": ("ints", REQUIRED),
                 "rho": ("scale", REQUIRED), "iota": ("float", 0.05), "n_samples": ("int", 50),
                 "checks": ("checks", {})},
    "regularize": {"input": ("str", REQUIRED), "levels": ("ints", REQUIRED),
                   "kind": ("str", "set"), "checks": ("checks", {"regular": True})},
    "ledger": {"eps0": ("str", REQUIRED), "kappa1": ("str", REQUIRED), "logR": ("str", "1e6"),
               "a": ("str", "2"), "c": ("str", "2"), "D": ("str", "3"), "e1": ("str", "2"),
               "e2": ("str", "2"), "m": ("str", "2"),
               "checks": ("checks", {"require": ["alpha_pfin_lower", "alpha_pfin_upper",
                                                 "delta_pfin_le_delta_fin", "chain_final",
                                                 "log_roundtrip"]})},
}


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_scale(v, key="scale"):
    """A dyadic scale: int n > 0 means 2^-n, a string "2^-n", or an exact power of two."""
    if isinstance(v, bool):
        raise SchemaError(f"{key}: expected a dyadic scale")
    if isinstance(v, int) and v > 0:
        return 2.0 ** -v
    if isinstance(v, str):
        m = re.fullmatch(r"\s*2\s*\^\s*-\s*(\d+)\s*", v)
        if m and int(m.group(1)) > 0:
            return 2.0 ** -int(m.group(1))
    if isinstance(v, float) and 0 < v < 1:
        mant, _ = math.frexp(v)
        if mant == 0.5:
            return v
    raise SchemaError(f"{key}: {v!r} is not a dyadic scale (use n, \"2^-n\" or an exact power of 2)")


def _coerce(kind, v, key):
    bad = SchemaError(f"{key}: expected {kind}, got {v!r}")
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise bad
        return v
    if kind == "optint":
        return None if v is None else _coerce("int", v, key)
    if kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise bad
        return float(v)
    if kind == "optfloat":
        return None if v is None else _coerce("float", v, key)
    if kind == "bool":
        if not isinstance(v, bool):
            raise bad
        return v
    if kind == "str":
        if not isinstance(v, (str, int, float)) or isinstance(v, bool):
            raise bad
        return str(v)
    if kind == "form":
        if not isinstance(v, str) or v.lower() not in ("sig22", "sig31"):
            raise SchemaError(f"{key}: form must be sig22 or sig31")
        return v.lower()
    if kind == "ints":
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, int) for x in v):
            raise bad
        return v
    if kind == "floats":
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float))
                                          for x in v):
            raise bad
        return [float(x) for x in v]
    if kind == "scale":
        parse_scale(v, key)
        return v
    if kind in ("checks", "set"):
        if not isinstance(v, dict):
            raise bad
        return v
    raise bad


def resolve_config(command, raw, text=None):
    """Validate against the command schema and fill defaults."""
    if command not in SCHEMAS:
        raise SchemaError(f"unknown command {command}")
    raw = dict(raw)
    ver = raw.pop("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise SchemaError(f"schema_version must be {SCHEMA_VERSION}", _line_of(text, "schema_version"))
    raw.pop("seed", None)
    schema = SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise SchemaError(f"unknown field {unknown[0]!r}", _line_of(text, unknown[0]))
    out = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            try:
                out[key] = _coerce(kind, raw[key], key)
            except SchemaError as e:
                raise SchemaError(str(e), _line_of(text, key))
        elif default is REQUIRED:
            raise SchemaError(f"missing required field {key!r}", 1)
        else:
            out[key] = json.loads(json.dumps(default))
    if "set" in out:
        s = out["set"]
        if "generator" not in s and "csv" not in s:
            raise SchemaError("set: needs 'generator' or 'csv'", _line_of(text, "set"))
        if "generator" in s:
            s = {"seed": 0, "window": None, **s}
        out["set"] = s
    return out


def load_config(path):
    if path is None:
        return {}, None
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", e.lineno)
    if not isinstance(raw, dict):
        raise SchemaError("config must be a JSON object", 1)
    return raw, text


# -- data sets --------------------------------------------------------------

def make_set(set_cfg, seed):
    if "csv" in set_cfg:
        return PointSet.from_csv(set_cfg["csv"])
    gen = set_cfg["generator"]
    s = int(set_cfg.get("seed", seed))
    if gen == "cantor":
        return fg.gen_cantor(set_cfg["alpha"], set_cfg["depth"], s, window=set_cfg.get("window"),
                             dim=set_cfg.get("dim", 9))
    if gen == "obstructed":
        return fg.gen_obstructed(set_cfg.get("form", "sig22"), set_cfg["alpha"], set_cfg["depth"], s,
                                 window=set_cfg.get("window"))
    if gen in ("net", "grid"):
        return fg.gen_subspace_net(set_cfg["dims"], parse_scale(set_cfg["delta"]))
    raise SchemaError(f"set: unknown generator {gen!r}")


# -- commands ---------------------------------------------------------------

def _rows_csv(rows):
    if not rows:
        return ""
    keys = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ex._fmt(r.get(k)) for k in keys})
    return buf.getvalue()


def _suite_result(rows):
    d = [r.to_dict() for r in rows]
    fails = [r.name for r in rows if not r.passed]
    return {"checks": d}, _rows_csv(d), fails


def cmd_rep_check(cfg, seed, threads):
    rows = (suites.rep_suite(cfg["form"], cfg["n_samples"], seed)
            + suites.symmetric_pair_suite(cfg["form"], cfg["n_samples"], seed)
            + suites.bch_suite(cfg["form"], cfg["n_samples"], 0.02, seed))
    return _suite_result(rows)


def cmd_nondeg_scan(cfg, seed, threads):
    form = cfg["form"]
    scan = nd.nondeg_scan(form, 1.0 / cfg["step_inv"], eps_list=cfg["eps_list"])
    wg = nd.wronskian_grid(form, cfg["wronskian_grid"])
    summary = {"n_points": scan.n_points, "sup": scan.sup, "inf": scan.inf,
               "sublevel": scan.sublevel, "wronskian_min": float(wg.min()),
               "wronskian_max": float(wg.max())}
    fails = [k for k in ("P1", "R1", "S1", "S2") if not scan.sup[k] > 0]
    if not wg.min() > 0:
        fails.append("wronskian_min")
    if form == "sig22":
        ob = suites.obstruction_suite(form, 100, seed)
        summary["obstruction"] = [r.to_dict() for r in ob]
        fails += [r.name for r in ob if not r.passed]
    rows = [{"quantity": k, "sup": scan.sup[k], "inf": scan.inf[k],
             **{f"frac_below_{e!r}": scan.sublevel[k][repr(e)] for e in cfg["eps_list"]}}
            for k in scan.sup]
    return summary, _rows_csv(rows), fails


def cmd_gen(cfg, seed, threads):
    set_cfg = dict(cfg)
    set_cfg.pop("checks")
    f = make_set(set_cfg, seed)
    data = f.to_csv()
    summary = {"n_points": len(f), "sha256": hashlib.sha256(data.encode()).hexdigest()}
    return summary, data, []


def _report_result(rep, checks, extra=None):
    summary = rep.summary()
    if extra:
        summary.update(extra)
    fails = []
    lim = checks.get("max_exceptional_fraction")
    if lim is not None and rep.exceptional_fraction > lim:
        fails.append("max_exceptional_fraction")
    return summary, rep.detail_csv(), fails


def cmd_project_exp(cfg, seed, threads):
    f = make_set(cfg["set"], seed)
    rep = ex.exp_subcritical(f, cfg["form"], cfg["lam"], parse_scale(cfg["delta"]), cfg["eps"],
                             cfg["n_samples"], cfg["adversarial_k"], cfg["slack_exponent"],
                             seed=seed, threads=threads)
    extra = {}
    if cfg["covering_levels"]:
        e, _ = ex.projected_covering_exponent(f, cfg["form"], cfg["lam"], cfg["covering_levels"],
                                              n_samples=20, seed=seed)
        extra["covering_exponent"] = e
    out = _report_result(rep, cfg["checks"], extra)
    lim = cfg["checks"].get("max_covering_exponent")
    if lim is not None and not extra.get("covering_exponent", math.inf) <= lim:
        out[2].append("max_covering_exponent")
    return out


def cmd_multislice_exp(cfg, seed, threads):
    f = make_set(cfg["set"], seed)
    rt = RTuple(tuple(cfg["rt64"]))
    rep = ex.exp_multislice(f, rt, parse_scale(cfg["rho"]), cfg["eps"], cfg["n_samples"],
                            cfg["form"], seed=seed, threads=threads)
    return _report_result(rep, cfg["checks"])


def cmd_energy_improve(cfg, seed, threads):
    f = make_set(cfg["set"], seed)
    reps = ex.energy_trend(f, cfg["ells"], alpha=cfg["alpha"], delta=parse_scale(cfg["delta"]),
                           n_samples=cfg["n_samples"], form=cfg["form"],
                           n_points=cfg["n_points"], strict=cfg["strict"], seed=seed,
                           threads=threads)
    med = [r.fitted["median_ratio"] for r in reps]
    summary = {"ells": cfg["ells"], "median_ratio": med,
               "reports": [r.summary() for r in reps]}
    rows = [dict(rec, ell=r.config["ell"]) for r in reps for rec in r.records]
    fails = []
    if cfg["checks"].get("median_decreasing") and not all(a > b for a, b in zip(med, med[1:])):
        fails.append("median_decreasing")
    return summary, _rows_csv(rows), fails


def cmd_slab_exp(cfg, seed, threads):
    f = make_set(cfg["set"], seed)
    rt = RTuple(tuple(cfg["rt64"]))
    rep = ex.exp_slab_subcritical(f, rt, parse_scale(cfg["rho"]), cfg["iota"], cfg["n_samples"],
                                  cfg["form"], seed=seed, threads=threads)
    return _report_result(rep, cfg["checks"])


def cmd_regularize(cfg, seed, threads):
    f = PointSet.from_csv(cfg["input"])
    filt = Filtration([Grid((64 * n,) * f.points.shape[1]) for n in cfg["levels"]])
    if cfg["kind"] == "set":
        res = bourgain_regularize_set(f, filt)
    elif cfg["kind"] == "measure":
        res = bourgain_regularize_measure(f, filt)
    else:
        raise SchemaError("kind: must be 'set' or 'measure'")
    summary = {"n_in": len(f), "n_out": len(res.subset), "sigma": [float(s) for s in res.sigma],
               "info": ex._clean({k: v for k, v in res.info.items()
                                  if isinstance(v, (int, float, bool, str, list))})}
    fails = []
    if cfg["checks"].get("regular"):
        from .regularize import is_regular_measure, is_regular_set
        ok = (is_regular_set(res.subset, filt, res.sigma) if cfg["kind"] == "set"
              else is_regular_measure(res.subset, filt, res.sigma))
        summary["regular"] = bool(ok)
        if not ok:
            fails.append("regular")
    return summary, res.subset.to_csv(), fails


def cmd_ledger(cfg, seed, threads):
    inp = lg.LedgerInput(cfg["eps0"], cfg["kappa1"], cfg["logR"], a=cfg["a"], c=cfg["c"],
                         D=cfg["D"], e1=cfg["e1"], e2=cfg["e2"], m=cfg["m"])
    rep = lg.check_inequalities(inp)
    summary = rep.to_dict()
    table = rep.table()
    req = cfg["checks"].get("require", [])
    status = {c["name"]: c["pass"] for c in table}
    fails = [n for n in req if not status.get(n, False)]
    return summary, _rows_csv(table), fails


COMMANDS = {
    "rep-check": cmd_rep_check, "nondeg-scan": cmd_nondeg_scan, "gen": cmd_gen,
    "project-exp": cmd_project_exp, "multislice-exp": cmd_multislice_exp,
    "energy-improve": cmd_energy_improve, "slab-exp": cmd_slab_exp,
    "regularize": cmd_regularize, "ledger": cmd_ledger,
}

# per-command flag overrides: flag name -> config key
OVERRIDES = {
    "rep-check": ["form", "n_samples"],
    "nondeg-scan": ["form", "step_inv"],
    "gen": ["generator", "alpha", "depth", "window", "dim", "form"],
    "project-exp": ["form", "lam", "delta", "eps", "n_samples"],
    "multislice-exp": ["form", "rho", "eps", "n_samples"],
    "energy-improve": ["form", "alpha", "delta", "n_samples", "n_points"],
    "slab-exp": ["form", "rho", "iota", "n_samples"],
    "regularize": ["input", "kind"],
    "ledger": ["eps0", "kappa1", "logR"],
}


def _parse_value(v):
    try:
        return json.loads(v)
    except json.JSONDecodeError:
        return v


def build_parser():
    p = argparse.ArgumentParser(prog="rproj", description="Restricted projection experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--outdir", default="runs")
        sp.add_argument("--threads", type=int, default=None)
        for key in OVERRIDES[name]:
            sp.add_argument("--" + key.replace("_", "-"), dest="ov_" + key)
    return p


def _outdir(base, command):
    stamp = time.strftime("%Y%m%dT%H%M%S")
    path = os.path.join(base, f"{command}-{stamp}")
    k = 1
    while os.path.exists(path):
        path = os.path.join(base, f"{command}-{stamp}-{k}")
        k += 1
    os.makedirs(path)
    return path


def run(command, config_path=None, seed=0, outdir="runs", threads=None, overrides=None):
    """Run one command; returns (exit code, output directory or None)."""
    try:
        raw, text = load_config(config_path)
        raw = dict(raw)
        if "seed" in raw and seed == 0:
            seed = raw["seed"]
        for k, v in (overrides or {}).items():
            raw[k] = v
        cfg = resolve_config(command, raw, text)
    except SchemaError as e:
        where = f"{config_path or '<args>'}:{e.line or 1}"
        print(f"{where}: schema error: {e}", file=sys.stderr)
        return 2, None
    threads = threads or os.cpu_count() or 1
    t0 = time.perf_counter()
    try:
        summary, detail, fails = COMMANDS[command](cfg, seed, threads)
    except SchemaError as e:
        print(f"{config_path or '<args>'}:{e.line or 1}: schema error: {e}", file=sys.stderr)
        return 2, None
    except RprojError as e:
        summary, detail, fails = {"error": f"{type(e).__name__}: {e}"}, "", [type(e).__name__]
    path = _outdir(outdir, command)
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "seed": seed,
           "config": cfg, "result": ex._clean(summary), "failed_checks": fails,
           "pass": not fails}
    with open(os.path.join(path, "summary.json"), "w") as fh:
        fh.write(json.dumps(ex._clean(doc), sort_keys=True, indent=1) + "\n")
    with open(os.path.join(path, "detail.csv"), "w") as fh:
        fh.write(detail)
    with open(os.path.join(path, "run.json"), "w") as fh:
        json.dump({"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "threads": threads,
                   "runtime": time.perf_counter() - t0}, fh)
    if fails:
        print(f"{command}: failed checks: {', '.join(fails)}", file=sys.stderr)
        return 1, path
    print(path)
    return 0, path


def main(argv=None):
    args = build_parser().parse_args(argv)
    ov = {k[3:]: _parse_value(v) for k, v in vars(args).items()
          if k.startswith("ov_") and v is not None}
    if "logR" in ov or "eps0" in ov or "kappa1" in ov:
        ov = {k: (str(v) if k in ("logR", "eps0", "kappa1") else v) for k, v in ov.items()}
    code, _ = run(args.command, args.config, args.seed, args.outdir, args.threads, ov)
    return code


if __name__ == "__main__":
    sys.exit(main())
