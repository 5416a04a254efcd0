"""Command-line front end: ``bergman-lab {norm,classify,lattice,khinchine,repro}``.

Settings come from built-in defaults, then an optional INI file (``--config``;
keys in ``[common]`` and in a section named after the command), then flags.
Every run writes ``report.json`` (deterministic for a fixed seed),
``table.csv`` and, where it applies, ``profile.csv`` to ``--out``; timing
goes to the ``run.json`` sidecar.

Exit codes: 0 success, 1 failed acceptance check, 2 invalid input,
3 divergence flagged under ``--strict``.
"""

import argparse
import configparser
import csv
import datetime
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import acceptance, harness
from .lattice import build_lattice, khinchine_estimate, predicted_node_count, verify_lattice
from .quadrature import (
    PairParams,
    QuadratureSpec,
    SpaceParams,
    bergman_norm,
    bergman_norm_schedule,
    equivalent_norm,
)
from .symbols import parse_symbol

log = logging.getLogger("bergman_lab")

SCHEMA_VERSION = harness.SCHEMA_VERSION

# (type, default) for every setting; None means "required" or "off"
SETTINGS = {
    "common": {
        "seed": (int, 0),
        "out": (str, "bergman_out"),
        "threads": (int, 0),
        "strict": (bool, False),
        "radial_nodes": (int, 16),
        "angular_nodes": (int, 256),
        "mc_samples": (int, 2048),
    },
    "norm": {
        "n": (int, 1),
        "p": (float, 2.0),
        "alpha": (float, 0.0),
        "f": (str, None),
        "rmax": (float, 1.0),
        "equivalent": (bool, False),
        "schedule": (str, None),
    },
    "classify": {
        "n": (int, 1),
        "p": (float, 2.0),
        "q": (float, 2.0),
        "alpha": (float, 0.0),
        "beta": (float, 0.0),
        "g": (str, None),
        "probe": (bool, False),
        "schedule": (str, "0.9,0.99,0.999"),
        "w_gaps": (str, "1e-1,1e-2,1e-3"),
        "growth": (float, 10.0),
        "compact": (float, 1e-2),
    },
    "lattice": {
        "n": (int, 1),
        "eta": (float, 0.5),
        "rmax": (float, 0.99),
        "density": (int, 8),
        "probes": (int, 100_000),
    },
    "khinchine": {
        "c": (str, None),
        "p": (float, 2.0),
        "max_exact": (int, 24),
    },
    "repro": {
        "all": (bool, False),
        "only": (str, None),
    },
}


class ValidationError(ValueError):
    pass


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def _floats(text, name):
    try:
        vals = [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"{name}: expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise ValidationError(f"{name}: empty list")
    return vals


def _common_parser():
    # SUPPRESS keeps unset flags out of the namespace, so the flags work both
    # before and after the subcommand without one position clobbering the other
    cp = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    cp.add_argument("--config", help="INI file with [common] and per-command sections")
    cp.add_argument("--seed", type=int)
    cp.add_argument("--out", help="output directory")
    cp.add_argument("--threads", type=int, help="worker cap (default: $BERGMAN_LAB_THREADS)")
    cp.add_argument("--strict", action="store_const", const=True, help="exit 3 on divergence")
    cp.add_argument("--radial-nodes", dest="radial_nodes", type=int)
    cp.add_argument("--angular-nodes", dest="angular_nodes", type=int)
    cp.add_argument("--mc-samples", dest="mc_samples", type=int)
    cp.add_argument("-v", "--verbose", action="store_const", const=True)
    return cp


def build_parser():
    common = _common_parser()
    ap = argparse.ArgumentParser(
        prog="bergman-lab", description=__doc__.splitlines()[0], parents=[common]
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = command("norm", "Bergman norm of a function")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--f", help="function in the symbol grammar, e.g. 'z^5'")
    p.add_argument("--rmax", type=float, help="truncation radius (1 = full ball)")
    p.add_argument("--equivalent", action="store_const", const=True,
                   help="also compute the radial-derivative norm and the ratio")
    p.add_argument("--schedule", help="comma-separated r_max values; diagnoses divergence")

    p = command("classify", "boundedness/compactness of T_g")
    p.add_argument("--n", type=int)
    for name in ("p", "q", "alpha", "beta", "growth", "compact"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--g", help="symbol in the symbol grammar, e.g. 'ces(1)'")
    p.add_argument("--probe", action="store_const", const=True, help="add kernel-probe cross-checks")
    p.add_argument("--schedule", help="comma-separated r_max schedule")
    p.add_argument("--w-gaps", dest="w_gaps", help="comma-separated values of 1-|w|")

    p = command("lattice", "build and certify a Bergman-metric lattice")
    p.add_argument("--n", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--density", type=int)
    p.add_argument("--probes", type=int)

    p = command("khinchine", "int_0^1 |sum c_j r_j(t)|^p dt")
    p.add_argument("--c", help="comma-separated coefficients (complex as 1+2i)")
    p.add_argument("--p", type=float)
    p.add_argument("--max-exact", dest="max_exact", type=int)

    p = command("repro", "run the acceptance suite")
    p.add_argument("--all", action="store_const", const=True)
    p.add_argument("--only", help="comma-separated criterion numbers")
    return ap


def resolve(args):
    """Merge defaults, the config file and explicit flags into one dict."""
    cmd = args.command
    table = dict(SETTINGS["common"], **SETTINGS[cmd])
    conf = {k: default for k, (_, default) in table.items()}
    config = getattr(args, "config", None)
    if config:
        cp = configparser.ConfigParser()
        if not cp.read(config):
            raise ValidationError(f"cannot read config file {config!r}")
        for section in ("common", cmd):
            if cp.has_section(section):
                for key, raw in cp.items(section):
                    key = key.replace("-", "_")
                    if key not in table:
                        raise ValidationError(f"unknown key {key!r} in [{section}]")
                    kind = table[key][0]
                    try:
                        conf[key] = _bool(raw) if kind is bool else kind(raw)
                    except ValueError as exc:
                        raise ValidationError(f"[{section}] {key}: {exc}") from exc
    for key in table:
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = val
    conf["command"] = cmd
    return conf


def _spec(conf):
    try:
        return QuadratureSpec(
            r_max=conf.get("rmax", 1.0) if conf["command"] == "norm" else 1.0,
            radial_nodes=conf["radial_nodes"],
            angular_nodes=conf["angular_nodes"],
            mc_samples=conf["mc_samples"],
            seed=conf["seed"],
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _require(conf, key, what):
    if conf.get(key) in (None, ""):
        raise ValidationError(f"--{key.replace('_', '-')} is required ({what})")
    return conf[key]


# ---------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(out_dir, report, table=None, profile=None, runtime_ms=None):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, rows in (("table.csv", table), ("profile.csv", profile)):
        path = os.path.join(out_dir, name)
        if not rows:
            # do not leave a previous run's file next to this report
            if os.path.exists(path):
                os.remove(path)
            continue
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(rows[0])
            w.writerows(_jsonable(rows[1:]))
    sidecar = {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "runtime_ms": runtime_ms,
        "command": report.get("command"),
    }
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def _envelope(conf, result):
    shown = {k: v for k, v in sorted(conf.items())}
    return {"schema_version": SCHEMA_VERSION, "command": conf["command"], "config": shown, "result": result}


# ---------------------------------------------------------------- commands


def cmd_norm(conf):
    space = _space(conf["n"], conf["p"], conf["alpha"])
    f = parse_symbol(_require(conf, "f", "function to measure"), space.n)
    spec = _spec(conf)
    result = {}
    divergent = False
    if conf["schedule"]:
        sched = _floats(conf["schedule"], "schedule")
        if any(not 0 < r < 1 for r in sched):
            raise ValidationError("schedule values must lie in (0, 1)")
        res = bergman_norm_schedule(f, space, spec, sched)
        result["schedule"] = res.as_dict()
        divergent = res.verdict == "DIVERGENT"
        value = res.limit ** (1 / space.p) if math.isfinite(res.limit) else math.inf
    else:
        value = bergman_norm(f, space, spec)
    result["bergman_norm"] = value
    table = [["quantity", "value"], ["bergman_norm", value]]
    if conf["equivalent"]:
        eq = equivalent_norm(f, space, spec)
        result["equivalent_norm"] = eq
        result["ratio"] = eq / value if value and math.isfinite(value) else None
        table += [["equivalent_norm", eq], ["ratio", result["ratio"]]]
    print(f"bergman_norm = {value:.12g}")
    if conf["equivalent"]:
        print(f"equivalent_norm = {result['equivalent_norm']:.12g}  ratio = {result['ratio']:.6g}")
    return _envelope(conf, result), table, None, divergent


def _space(n, p, alpha):
    try:
        return SpaceParams(n, p, alpha)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def cmd_classify(conf):
    try:
        pair = PairParams.of(conf["n"], conf["p"], conf["q"], conf["alpha"], conf["beta"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    text = _require(conf, "g", "symbol of T_g")
    g = parse_symbol(text, pair.n)
    sched = tuple(_floats(conf["schedule"], "schedule"))
    gaps = tuple(_floats(conf["w_gaps"], "w_gaps"))
    if any(not 0 < r < 1 for r in sched) or any(not 0 < s < 1 for s in gaps):
        raise ValidationError("schedule and w_gaps values must lie in (0, 1)")
    th = harness.Thresholds(schedule=sched, w_gaps=gaps, growth=conf["growth"], compact=conf["compact"])
    spec = _spec(conf)
    threads = conf["threads"] or None
    if conf["probe"]:
        report, _ = harness.consistency_report(g, pair, spec, text, th, threads)
        label = report["classification"]["label"]
        flag = report["classification"]["constancy_flag"]
        status = report["consistency"]["status"]
        result = report
    else:
        v = harness.classify(g, pair, spec, th, threads)
        label, flag, status = v.classification, v.constancy_flag, None
        # same layout as the consistency report, minus the probe blocks
        ev = v.as_dict()["evidence"]
        result = {
            "schema_version": SCHEMA_VERSION,
            "symbol_descriptor": text,
            "pair": pair.as_dict(),
            "branch": v.branch,
            "criterion_schedule": ev.get("criterion_schedule"),
            "seminorm": ev.get("seminorm"),
            "decay_profile": ev.get("decay_profile"),
            "probe_profile": ev.get("probe_profile"),
            "classification": {
                "label": v.classification,
                "criterion_value": harness._value_json(v.criterion_value),
                "constancy_flag": v.constancy_flag,
                "gamma": ev.get("gamma"),
            },
            "thresholds": th.as_dict(),
            "seed": spec.seed,
        }
    table, profile = _classify_tables(result)
    msg = f"classification = {label}  constancy_flag = {flag}"
    if status:
        msg += f"  consistency = {status}"
    print(msg)
    return _envelope(conf, result), table, profile, label == harness.UNBOUNDED


def _classify_tables(result):
    ev = result
    table = [["quantity", "r_max", "value", "verdict"]]
    for key in ("criterion_schedule", "seminorm"):
        block = ev.get(key)
        if block:
            for r, v in zip(block["schedule"], block["values"]):
                table.append([key, r, v, block["verdict"]])
    profile = [["quantity", "x", "value"]]
    dp = ev.get("decay_profile")
    if dp:
        profile += [["decay_profile", r, v] for r, v in zip(dp["radii"], dp["values"])]
    pp = ev.get("probe_profile")
    if pp:
        gaps = [1 - math.hypot(*w[0]) if len(w) == 1 else None for w in pp["w"]]
        profile += [["probe_profile", s, v] for s, v in zip(gaps, pp["values"])]
    lb = result.get("lower_bounds")
    if lb:
        profile += [["lower_bound", pt["gap"], pt["bound"]] for pt in lb["points"]]
    return table, profile if len(profile) > 1 else None


def cmd_lattice(conf):
    if not 0 < conf["eta"] <= 1:
        raise ValidationError(f"eta must lie in (0, 1], got {conf['eta']}")
    if not 0 < conf["rmax"] < 1:
        raise ValidationError(f"rmax must lie in (0, 1), got {conf['rmax']}")
    if conf["probes"] < 1:
        raise ValidationError("probes must be positive")
    lat = build_lattice(conf["eta"], conf["rmax"], conf["n"], conf["density"], conf["seed"])
    cert = verify_lattice(lat, conf["probes"], conf["seed"])
    result = {"lattice": lat.to_json(), "nodes": len(lat)}
    if lat.n == 1:
        result["predicted_nodes"] = predicted_node_count(lat.eta, lat.r_max)
    table = [["index", "re_z1", "im_z1"]] + [
        [i, float(z[0].real), float(z[0].imag)] for i, z in enumerate(lat.nodes)
    ]
    print(
        f"nodes = {len(lat)}  covering_ok = {cert.covering_ok}  "
        f"separation_ok = {cert.separation_ok}  overlap_max = {cert.overlap_max}"
    )
    bad = not (cert.covering_ok and cert.separation_ok)
    return _envelope(conf, result), table, None, bad


def cmd_khinchine(conf):
    raw = _require(conf, "c", "coefficients")
    try:
        c = [complex(s.strip().replace("i", "j")) for s in raw.split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad coefficient list {raw!r}") from exc
    if not c:
        raise ValidationError("empty coefficient list")
    if not conf["p"] > 0:
        raise ValidationError(f"p must be > 0, got {conf['p']}")
    res = khinchine_estimate(c, conf["p"], max_exact=conf["max_exact"], seed=conf["seed"])
    l2 = math.sqrt(sum(abs(x) ** 2 for x in c))
    ratio = res.value ** (1 / conf["p"]) / l2 if l2 else None
    result = {"value": res.value, "stderr": res.stderr, "exact": res.exact, "ratio": ratio}
    print(f"{res.value:.12g}" + ("" if res.exact else f" +- {res.stderr:.3g} (Monte Carlo)"))
    table = [["quantity", "value"], ["integral", res.value], ["ratio", ratio]]
    return _envelope(conf, result), table, None, False


def cmd_repro(conf):
    only = None
    if conf["only"]:
        try:
            only = {int(s) for s in conf["only"].split(",") if s.strip()}
        except ValueError as exc:
            raise ValidationError(f"--only expects criterion numbers, got {conf['only']!r}") from exc
    elif not conf["all"]:
        raise ValidationError("repro needs --all or --only")
    results = acceptance.run_all(conf["seed"], only)
    for r in results:
        print(r.line())
    table = [["criterion", "title", "passed"]] + [[r.number, r.title, r.passed] for r in results]
    # wall-clock measurements are dropped so the report stays byte-stable
    rows = [{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results]
    for row in rows:
        row["measured"] = {k: v for k, v in row["measured"].items() if k != "seconds"}
    failed = [r.number for r in results if not r.passed]
    return _envelope(conf, {"checks": rows, "failed": failed}), table, None, bool(failed)


COMMANDS = {
    "norm": cmd_norm,
    "classify": cmd_classify,
    "lattice": cmd_lattice,
    "khinchine": cmd_khinchine,
    "repro": cmd_repro,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        conf = resolve(args)
        if conf["threads"] < 0:
            raise ValidationError("threads must be >= 0")
        if conf["threads"]:
            os.environ["BERGMAN_LAB_THREADS"] = str(conf["threads"])
        report, table, profile, flagged = COMMANDS[args.command](conf)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    runtime = (time.perf_counter() - t0) * 1000.0
    write_outputs(conf["out"], report, table, profile, runtime)
    if args.command == "repro":
        return 1 if flagged else 0
    if flagged and conf["strict"]:
        print("divergence flagged (--strict)", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
