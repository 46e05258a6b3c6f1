"""Command line entry point: ``rcmperc <subcommand> [--config PATH] [--seed N] [--workers N] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .crossings import CrossingQuery, max_disjoint_crossings
from .errors import ConvergenceFailure, InvalidArgument, UnsupportedOperation, ValidationError
from .exploration import GridDomain, bernoulli_driver, crossings_from_exploration, menger_oracle, run_recorded
from .graph import build_graph, crossing_cluster_ids
from .harness import ExperimentConfig, content_hash, default_workers, read_rows, run_campaign, tail_estimate
from .homogenization import kappa_from_scaling, kappa_rows, strip_sigma
from .models import model_from_spec
from .pointprocess import Region, config_to_json, marks_from_spec, sample_ppp

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4

# single-run defaults: supercritical Boolean disks of radius 1/2 in the plane
DEFAULTS = {
    "model": {"model": "boolean"},
    "marks": {"kind": "dirac", "m": 0.5},
    "rho": 2.2,
    "ell": 8.0,
    "d": 2,
    "truncation": 2.0,
    "pad": None,
    "restrict": True,
    "seed": 0,
    "replicas": 10,
    "ell_list": [4.0, 8.0],
    "M": 3,
    "L": 3,
    "p_site": 0.6,
    "p_link": 0.6,
}


def _load(path):
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise OSError(f"cannot read config {path}: {err}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError("", f"invalid JSON: {err}") from None
    if not isinstance(raw, dict):
        raise ValidationError("", "config must be a JSON object")
    return raw


def _params(args):
    p = dict(DEFAULTS)
    raw = _load(args.config)
    for k in raw:
        if k not in p:
            raise ValidationError(k, "unknown field")
    p.update(raw)
    if args.seed is not None:
        p["seed"] = args.seed
    for key in ("rho", "ell", "truncation"):
        if not isinstance(p[key], (int, float)):
            raise ValidationError(key, "must be a number")
    try:
        p["model_obj"] = model_from_spec(p["model"])
    except (InvalidArgument, UnsupportedOperation, KeyError, TypeError, AttributeError) as err:
        raise ValidationError("model", str(err)) from None
    try:
        p["marks_obj"] = marks_from_spec(p["marks"])
    except (InvalidArgument, UnsupportedOperation, KeyError, TypeError, AttributeError) as err:
        raise ValidationError("marks", str(err)) from None
    return p


def _emit(args, name, text):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_sample(args):
    p = _params(args)
    region = Region.strip(p["ell"], p["d"], truncation=p["truncation"])
    cfg = sample_ppp(region, p["rho"], p["marks_obj"], p["seed"])
    _emit(args, "config.json", config_to_json(cfg) + "\n")


def _graph(p):
    region = Region.strip(p["ell"], p["d"], truncation=p["truncation"])
    g = build_graph(sample_ppp(region, p["rho"], p["marks_obj"], p["seed"]), p["model_obj"], p["seed"])
    pad = 0.5 * p["ell"] if p["pad"] is None else p["pad"]
    keep = crossing_cluster_ids(g, p["ell"], pad) if p["restrict"] else None
    return g, keep


def cmd_crossings(args):
    p = _params(args)
    t0 = time.perf_counter()
    g, keep = _graph(p)
    res = max_disjoint_crossings(g, CrossingQuery(p["ell"], cluster_filter=keep))
    millis = (time.perf_counter() - t0) * 1000
    _emit(args, "crossings.csv", _csv_text(["seed", "rho", "ell", "count", "method", "millis"],
                                           [[p["seed"], p["rho"], p["ell"], res.count, res.method, f"{millis:.1f}"]]))
    if args.out:
        (Path(args.out) / "witnesses.json").write_text(json.dumps(res.witnesses) + "\n")


def cmd_conductivity(args):
    p = _params(args)
    sigma, rn, sol = strip_sigma(p["model_obj"], p["rho"], p["ell"], p["seed"], p["d"], p["marks_obj"],
                                 p["truncation"], p["pad"], p["restrict"])
    _emit(args, "conductivity.csv",
          _csv_text(["seed", "rho", "ell", "sigma", "residual", "iters", "n_nodes", "n_edges"],
                    [[p["seed"], p["rho"], p["ell"], repr(sigma), repr(sol.residual), sol.iterations,
                      rn.n_nodes, rn.n_edges]]))


def cmd_explore(args):
    p = _params(args)
    dom = GridDomain(int(p["M"]), int(p["L"]))
    state, rec = run_recorded(dom, bernoulli_driver(p["p_site"], p["p_link"], p["seed"]))
    n = crossings_from_exploration(state, dom)
    summary = {"domain": dom.to_spec(), "seed": p["seed"], "N_L": n, "menger": menger_oracle(rec, dom)}
    if args.out:
        _emit(args, "transcript.jsonl", rec.to_jsonl())
        _emit(args, "explore.json", json.dumps(summary) + "\n")
    else:
        sys.stdout.write(json.dumps(summary) + "\n")


def cmd_kappa(args):
    p = _params(args)
    est = kappa_from_scaling(p["model_obj"], p["rho"], p["ell_list"], int(p["replicas"]), p["seed"],
                             d=p["d"], marks=p["marks_obj"], T=p["truncation"], pad=p["pad"],
                             restrict=p["restrict"])
    _emit(args, "kappa.csv", _csv_text(["direction", "ell", "mean", "stderr", "n"], kappa_rows(est)))
    if args.out:
        echo = {k: v for k, v in p.items() if not k.endswith("_obj")}
        text = json.dumps(echo, sort_keys=True)
        summary = {"config": echo, "config_hash": content_hash(text),
                   "kappa_hat": est.kappa_hat, "stderr": est.stderr, "rho": est.rho}
        (Path(args.out) / "kappa_summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def cmd_campaign(args):
    if args.config is None:
        raise ValidationError("config", "campaign needs --config")
    raw = _load(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(raw)
    res = run_campaign(cfg, out=args.out, workers=args.workers)
    sys.stdout.write(json.dumps({"out": str(res.out), "rows_written": res.rows_written,
                                 "rows_skipped": res.rows_skipped, "complete": res.complete}) + "\n")


def cmd_tail(args):
    if args.rows is None:
        raise ValidationError("rows", "tail needs --rows PATH")
    rows = read_rows(args.rows)
    est = tail_estimate(rows, args.c1, args.d)
    body = [[ell, v["p_hat"], v["wilson_95"][0], v["wilson_95"][1], v["n"]] for ell, v in est.items()]
    _emit(args, "tail.csv", _csv_text(["ell", "p_hat", "lo", "hi", "n"], body))


COMMANDS = {
    "sample": cmd_sample,
    "crossings": cmd_crossings,
    "conductivity": cmd_conductivity,
    "explore": cmd_explore,
    "kappa": cmd_kappa,
    "campaign": cmd_campaign,
    "tail": cmd_tail,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="rcmperc", description="Random connection model percolation experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: $RCMPERC_WORKERS or 1)")
        sp.add_argument("--out", help="output directory (default: stdout where possible)")
        if name == "tail":
            sp.add_argument("--rows", help="campaign results.csv")
            sp.add_argument("--c1", type=float, required=True)
            sp.add_argument("--d", type=int, default=2)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers is None:
        args.workers = default_workers()
    try:
        COMMANDS[args.command](args)
    except (ValidationError, InvalidArgument, UnsupportedOperation) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceFailure as err:
        print(f"error: {err} (seed {err.seed})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
