"""Campaigns: task grids over (rho, ell, replica), deterministic rows, resumable CSV output."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .crossings import CrossingQuery, max_disjoint_crossings
from .errors import InvalidArgument, UnsupportedOperation, ValidationError
from .exploration import GridDomain, bernoulli_driver, crossings_from_exploration, explore
from .graph import build_graph, crossing_cluster_ids
from .homogenization import _reach_counts, palm_batch, strip_sigma, wilson_interval
from .models import model_from_spec
from .pointprocess import Region, marks_from_spec, sample_ppp
from .rng import derive_seed

SCHEMA_VERSION = 1
TASKS = ("crossings", "conductivity", "explore", "kappa", "dbound", "percprob")
COLUMNS = ("task", "replica", "seed", "rho", "ell", "metric", "value", "aux")
RESULTS = "results.csv"
TIMINGS = "timings.csv"
SUMMARY = "summary.json"


@dataclass
class ExperimentConfig:
    model: dict
    rho: list
    ell: list
    replicas: int
    seed: int
    tasks: list
    marks: dict = field(default_factory=lambda: {"kind": "dirac", "m": 0.5})
    d: int = 2
    pad: float | None = None      # defaults to ell / 2
    truncation: float = 2.0
    restrict: bool = True
    out: str | None = None
    p_site: float | None = None   # explore
    p_link: float | None = None
    a: list | None = None         # dbound
    mark: float | None = None     # percprob

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ValidationError("", "config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        for key in raw:
            if key not in known:
                raise ValidationError(key, "unknown field")
        for key in ("model", "rho", "ell", "replicas", "seed", "tasks"):
            if key not in raw:
                raise ValidationError(key, "required")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ValidationError("", f"invalid JSON: {err}") from None
        return cls.from_dict(raw)

    def validate(self):
        try:
            model_from_spec(self.model)
        except (InvalidArgument, UnsupportedOperation, KeyError, TypeError, ValueError, AttributeError) as err:
            raise ValidationError("model", str(err)) from None
        try:
            marks_from_spec(self.marks)
        except (InvalidArgument, UnsupportedOperation, KeyError, TypeError, ValueError, AttributeError) as err:
            raise ValidationError("marks", str(err)) from None
        for name in ("rho", "ell"):
            grid = getattr(self, name)
            if not isinstance(grid, list) or not grid:
                raise ValidationError(name, "must be a nonempty list")
            for i, v in enumerate(grid):
                if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                    raise ValidationError(f"{name}[{i}]", "must be a finite number")
        if any(v < 0 for v in self.rho):
            raise ValidationError("rho", "intensities must be nonnegative")
        if any(v <= 0 for v in self.ell):
            raise ValidationError("ell", "lengths must be positive")
        if not isinstance(self.replicas, int) or self.replicas < 1:
            raise ValidationError("replicas", "must be an integer >= 1")
        if not isinstance(self.seed, int):
            raise ValidationError("seed", "must be an integer")
        if not isinstance(self.d, int) or self.d < 2:
            raise ValidationError("d", "must be an integer >= 2")
        if not self.truncation > 1:
            raise ValidationError("truncation", "must exceed 1")
        if not isinstance(self.tasks, list) or not self.tasks:
            raise ValidationError("tasks", "must be a nonempty list")
        for i, t in enumerate(self.tasks):
            if t not in TASKS:
                raise ValidationError(f"tasks[{i}]", f"unknown task {t!r}")
        if "explore" in self.tasks:
            for key in ("p_site", "p_link"):
                v = getattr(self, key)
                if v is None or not 0 <= v <= 1:
                    raise ValidationError(key, "explore needs a probability in [0, 1]")
        if "dbound" in self.tasks:
            if not isinstance(self.a, list) or len(self.a) != self.d:
                raise ValidationError("a", f"dbound needs a direction vector of length {self.d}")
        if "percprob" in self.tasks and self.mark is None:
            raise ValidationError("mark", "percprob needs a mark value")
        if self.pad is not None and self.pad < 0:
            raise ValidationError("pad", "must be nonnegative")
        for i, ell in enumerate(self.ell):
            if self.truncation * ell <= ell + _pad(self, ell):
                raise ValidationError("truncation", f"strip too short for the padded window at ell[{i}]")

    def to_dict(self):
        return asdict(self)

    def canonical_json(self):
        body = {k: v for k, v in self.to_dict().items() if k != "out"}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


def content_hash(text: str) -> str:
    """Git blob hash of ``text``."""
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# -- row computation --------------------------------------------------------


@dataclass(frozen=True)
class Job:
    task: str
    rho: float
    ell: float
    replica: int
    seed: int

    @property
    def key(self):
        return (self.task, _fmt(self.rho), _fmt(self.ell), str(self.replica))


def _fmt(v):
    return repr(float(v))


def jobs_for(cfg: ExperimentConfig):
    out = []
    for task in cfg.tasks:
        for rho in cfg.rho:
            for ell in cfg.ell:
                for r in range(cfg.replicas):
                    seed = derive_seed(cfg.seed, task, float(rho), float(ell), r)
                    out.append(Job(task, float(rho), float(ell), r, seed))
    return out


def _pad(cfg, ell):
    return 0.5 * ell if cfg.pad is None else cfg.pad


def compute_row(cfg: ExperimentConfig, job: Job):
    """(metric, value, aux) for one job; a pure function of (cfg, job)."""
    model = model_from_spec(cfg.model)
    marks = marks_from_spec(cfg.marks)
    rho, ell, s = job.rho, job.ell, job.seed
    if job.task == "crossings":
        region = Region.strip(ell, cfg.d, truncation=cfg.truncation)
        g = build_graph(sample_ppp(region, rho, marks, s), model, s)
        keep = crossing_cluster_ids(g, ell, _pad(cfg, ell)) if cfg.restrict else None
        res = max_disjoint_crossings(g, CrossingQuery(ell, cluster_filter=keep))
        n_box = int(np.count_nonzero(np.all(np.abs(g.positions) <= ell, axis=1)))
        return "N", float(res.count), {"method": res.method, "n_box": n_box}
    if job.task in ("conductivity", "kappa"):
        sigma, rn, sol = strip_sigma(model, rho, ell, s, cfg.d, marks, cfg.truncation,
                                     _pad(cfg, ell), cfg.restrict)
        aux = {"residual": sol.residual, "iters": sol.iterations,
               "n_nodes": rn.n_nodes, "n_edges": rn.n_edges}
        if job.task == "conductivity":
            return "sigma", sigma, aux
        if rho <= 0:
            raise InvalidArgument("kappa needs rho > 0")
        return "kappa", (2 * ell) ** (2 - cfg.d) * sigma / rho, aux
    if job.task == "explore":
        size = max(1, int(round(ell)))
        dom = GridDomain(size, size)
        st = explore(dom, bernoulli_driver(cfg.p_site, cfg.p_link, s))
        return "N_L", float(crossings_from_exploration(st, dom)), {"M": size, "L": size}
    if job.task == "dbound":
        batch = palm_batch(model, rho, marks, ell, 1, s, cfg.d, _pad(cfg, ell), cfg.truncation)
        rep = batch.replicas[0]
        a = np.asarray(cfg.a, dtype=float)
        val = 0.5 * float(np.sum((rep.neighbor_displacements @ a) ** 2))
        q = bool(rep.origin_in_proxy_cluster)
        return "half_sq_sum", val if q else float("nan"), {"qualifying": q}
    if job.task == "percprob":
        _, hits = _reach_counts(model, rho, cfg.mark, [ell], 1, s, cfg.d, marks)
        return "reached", float(hits[0]), {"mark": cfg.mark}
    raise InvalidArgument(f"unknown task {job.task!r}")


def _format_row(job: Job, metric, value, aux):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(
        [job.task, job.replica, job.seed, _fmt(job.rho), _fmt(job.ell), metric,
         repr(float(value)), json.dumps(aux, sort_keys=True)])
    return buf.getvalue()


def _work(args):
    cfg_dict, job = args
    cfg = ExperimentConfig(**cfg_dict)
    t0 = time.perf_counter()
    metric, value, aux = compute_row(cfg, job)
    return _format_row(job, metric, value, aux), (time.perf_counter() - t0) * 1000.0


# -- campaign driver --------------------------------------------------------


def default_workers():
    try:
        return max(1, int(os.environ.get("RCMPERC_WORKERS", "1")))
    except ValueError:
        return 1


def _completed_keys(path: Path):
    """Keys of complete rows already on disk; a torn last line is cut off."""
    if not path.exists():
        return set()
    raw = path.read_bytes()
    if raw and not raw.endswith(b"\n"):
        raw = raw[: raw.rfind(b"\n") + 1]
        path.write_bytes(raw)
    rows = list(csv.reader(io.StringIO(raw.decode())))
    if not rows:
        return set()
    if tuple(rows[0]) != COLUMNS:
        raise ValidationError("out", f"{path} is not a results file of this schema")
    return {(r[0], r[3], r[4], r[1]) for r in rows[1:]}


@dataclass
class CampaignResult:
    out: Path
    rows_written: int
    rows_skipped: int
    complete: bool


def run_campaign(cfg: ExperimentConfig, out=None, workers=None, stop_after=None) -> CampaignResult:
    """Run (or resume) the task grid, writing rows in job order.

    ``stop_after`` ends the run after that many new rows, leaving the output
    as an interrupted run would.
    """
    out = Path(out or cfg.out or "campaign_out")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValidationError("workers", "must be >= 1")
    out.mkdir(parents=True, exist_ok=True)
    cfg_text = cfg.canonical_json()
    cfg_path = out / "config.json"
    if cfg_path.exists() and json.loads(cfg_path.read_text()) != json.loads(cfg_text):
        raise ValidationError("out", "directory holds a run with a different config")
    cfg_path.write_text(cfg_text + "\n")

    results = out / RESULTS
    done = _completed_keys(results)
    todo = [j for j in jobs_for(cfg) if j.key not in done]
    if stop_after is not None:
        todo = todo[: int(stop_after)]
    fresh = not results.exists() or results.stat().st_size == 0
    cfg_dict = cfg.to_dict()
    written = 0
    with open(results, "a", newline="") as fh, open(out / TIMINGS, "a", newline="") as th:
        if fresh:
            fh.write(",".join(COLUMNS) + "\n")
        tw = csv.writer(th, lineterminator="\n")
        args = [(cfg_dict, j) for j in todo]
        if workers == 1:
            stream = map(_work, args)
            pool = None
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            stream = pool.map(_work, args, chunksize=1)
        try:
            for job, (line, millis) in zip(todo, stream):
                fh.write(line)
                fh.flush()
                tw.writerow([job.task, job.replica, _fmt(job.rho), _fmt(job.ell), f"{millis:.3f}"])
                written += 1
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    complete = len(_completed_keys(results)) == len(jobs_for(cfg))
    if complete:
        write_summary(cfg, out)
    return CampaignResult(out, written, len(done), complete)


def read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["replica"] = int(r["replica"])
        r["seed"] = int(r["seed"])
        r["rho"] = float(r["rho"])
        r["ell"] = float(r["ell"])
        r["value"] = float(r["value"])
        r["aux"] = json.loads(r["aux"])
    return rows


def aggregate(rows):
    """{(task, rho, ell): (mean, stderr, n)} over finite values."""
    groups = {}
    for r in rows:
        if math.isfinite(r["value"]):
            groups.setdefault((r["task"], r["rho"], r["ell"]), []).append(r["value"])
    out = {}
    for key in sorted(groups):
        v = np.asarray(groups[key])
        se = float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else float("nan")
        out[key] = (float(v.mean()), se, len(v))
    return out


def write_summary(cfg: ExperimentConfig, out: Path):
    rows = read_rows(out / RESULTS)
    agg = aggregate(rows)
    text = cfg.canonical_json()
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": json.loads(text),
        "config_hash": content_hash(text),
        "n_rows": len(rows),
        "groups": [{"task": t, "rho": rho, "ell": ell, "mean": m, "stderr": se, "n": n}
                   for (t, rho, ell), (m, se, n) in agg.items()],
    }
    (out / SUMMARY).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# -- analysis ---------------------------------------------------------------


def tail_estimate(rows, c1: float, d: int):
    """Per ell: frequency of {N_ell >= c1 ell^(d-1)} with a Wilson 95% interval."""
    rows = [r for r in rows if r.get("task", "crossings") == "crossings"]
    if not rows:
        raise InvalidArgument("no crossing rows")
    rhos = {float(r["rho"]) for r in rows}
    if len(rhos) > 1:
        raise InvalidArgument(f"rows mix intensities {sorted(rhos)}")
    by_ell = {}
    for r in rows:
        by_ell.setdefault(float(r["ell"]), []).append(float(r["value"]))
    out = {}
    for ell in sorted(by_ell):
        vals = np.asarray(by_ell[ell])
        k = int(np.count_nonzero(vals >= c1 * ell ** (d - 1)))
        out[ell] = {"p_hat": k / len(vals), "wilson_95": wilson_interval(k, len(vals)), "n": len(vals)}
    return out


PLOT_COLUMNS = ("x", "y", "yerr", "series")


def emit_plotdata(rows, spec, path):
    """Long-format (x, y, yerr, series) CSV of per-group means.

    ``spec``: {"task": name or None, "x": "ell" | "rho", "series": "rho" | "ell" | "task"}.
    """
    task = spec.get("task")
    xk, sk = spec.get("x", "ell"), spec.get("series", "rho")
    if xk not in ("ell", "rho") or sk not in ("ell", "rho", "task"):
        raise InvalidArgument("x must be ell or rho; series must be ell, rho or task")
    groups = {}
    for r in rows:
        if task is not None and r["task"] != task:
            continue
        if math.isfinite(r["value"]):
            groups.setdefault((str(r[sk]), float(r[xk])), []).append(r["value"])
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for (series, x) in sorted(groups):
            v = np.asarray(groups[(series, x)])
            se = float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
            w.writerow([repr(x), repr(float(v.mean())), repr(se), series])
    return path


def read_plotdata(path):
    with open(path, newline="") as fh:
        return [(float(r["x"]), float(r["y"]), float(r["yerr"]), r["series"]) for r in csv.DictReader(fh)]
