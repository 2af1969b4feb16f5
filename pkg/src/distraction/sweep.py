"""eta x seed grids, Pareto fronts over (demographic parity, accuracy), and AOC summaries."""

import csv
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import spearmanr

from .errors import ConfigError
from .metrics import area_over_curve, evaluate
from .model import ModelConfig, build_model, predict_proba
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)

DEFAULT_ETAS = (0.0, 1.0, 10.0, 100.0, 1000.0)
POINT_FIELDS = ("eta", "seed", "accuracy", "average_precision", "demographic_parity", "equal_opportunity")


@dataclass
class SweepSpec:
    model: ModelConfig
    train: TrainConfig = field(default_factory=TrainConfig)
    etas: tuple = DEFAULT_ETAS
    seeds: tuple = (0, 1, 2, 3, 4)
    workers: int = 1

    def __post_init__(self):
        self.etas = tuple(float(e) for e in self.etas)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.etas:
            raise ConfigError("eta grid is empty")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(e < 0 for e in self.etas):
            raise ConfigError(f"eta values must be non-negative: {self.etas}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class ParetoPoint:
    eta: float
    seed: int
    accuracy: float
    average_precision: float | None
    demographic_parity: float
    equal_opportunity: float | None
    trace: tuple = field(default=(), compare=False, repr=False)

    @property
    def dp(self):
        return self.demographic_parity

    def row(self):
        return {k: getattr(self, k) for k in POINT_FIELDS}


@dataclass
class SweepResult:
    points: list
    failures: list

    @property
    def status(self):
        if not self.failures:
            return "ok"
        return "failed" if not self.points else "partial"

    def cells(self):
        return cell_summaries(self.points)


def run_one(model_cfg, train_cfg, eta, seed, train_set, test_set):
    cfg = replace(train_cfg, eta=float(eta), seed=int(seed))
    model = build_model(replace(model_cfg, input_dim=train_set.x.shape[1], seed=int(seed)))
    _, trace = train(model, train_set, cfg)
    r = evaluate(predict_proba(model, test_set.x), test_set.y, test_set.a)
    return ParetoPoint(
        eta=float(eta), seed=int(seed), accuracy=r.accuracy, average_precision=r.average_precision,
        demographic_parity=r.demographic_parity, equal_opportunity=r.equal_opportunity,
        trace=tuple((rec.epoch, rec.classifier_loss, rec.fairness_loss) for rec in trace.records),
    )


def _task(args):
    try:
        return run_one(*args), None
    except Exception as exc:  # a failed cell must not sink the sweep
        return None, (args[2], args[3], f"{type(exc).__name__}: {exc}", traceback.format_exc())


def run_sweep(spec, train_set, test_set):
    """Train one model per (eta, seed) and evaluate it on ``test_set``.

    Results are sorted by (eta, seed) whatever the execution order.
    """
    tasks = [(spec.model, spec.train, eta, seed, train_set, test_set)
             for eta in spec.etas for seed in spec.seeds]
    if spec.workers == 1:
        outcomes = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_task, tasks))
    points = sorted((p for p, _ in outcomes if p is not None), key=lambda p: (p.eta, p.seed))
    failures = sorted((f for _, f in outcomes if f is not None), key=lambda f: (f[0], f[1]))
    for eta, seed, msg, _ in failures:
        log.error("run eta=%g seed=%d failed: %s", eta, seed, msg)
    return SweepResult(points, failures)


def cell_summaries(points):
    """Per-eta mean/max demographic parity and mean accuracy across seeds."""
    out = []
    for eta in sorted({p.eta for p in points}):
        cell = [p for p in points if p.eta == eta]
        dps = np.array([p.demographic_parity for p in cell])
        accs = np.array([p.accuracy for p in cell])
        out.append({
            "eta": eta,
            "n": len(cell),
            "mean_accuracy": float(accs.mean()),
            "mean_dp": float(dps.mean()),
            "max_dp": float(dps.max()),
            "min_dp": float(dps.min()),
        })
    return out


def _spearman(x, y):
    # undefined (None) for fewer than two cells or a constant column
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(spearmanr(x, y).statistic)


def eta_correlations(points):
    """Spearman rank correlation of eta against per-cell mean dp and mean accuracy."""
    cells = cell_summaries(points)
    etas = [c["eta"] for c in cells]
    return {
        "spearman_eta_dp": _spearman(etas, [c["mean_dp"] for c in cells]),
        "spearman_eta_accuracy": _spearman(etas, [c["mean_accuracy"] for c in cells]),
    }


def _coords(p):
    if isinstance(p, ParetoPoint):
        return p.demographic_parity, p.accuracy
    return float(p[0]), float(p[1])


def dominates(p, q):
    (dp_p, acc_p), (dp_q, acc_q) = _coords(p), _coords(q)
    return dp_p <= dp_q and acc_p >= acc_q and (dp_p < dp_q or acc_p > acc_q)


def pareto_front(points):
    """Non-dominated subset (minimise dp, maximise accuracy), sorted by dp.

    Sorting by dp ascending then accuracy descending means a point survives iff
    its accuracy beats every point before it.
    """
    pts = list(points)
    order = sorted(range(len(pts)), key=lambda i: (_coords(pts[i])[0], -_coords(pts[i])[1]))
    front, best, last = [], -np.inf, None
    for i in order:
        dp, acc = _coords(pts[i])
        if acc > best:
            front.append(pts[i])
            best, last = acc, (dp, acc)
        elif (dp, acc) == last:
            front.append(pts[i])  # exact duplicates do not dominate each other
    return front


def load_baselines(path):
    """Read transcribed comparison curves: CSV with columns method, demographic_parity, accuracy."""
    curves = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"method", "demographic_parity", "accuracy"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ConfigError(f"{path}: baseline file needs columns {sorted(need)}")
        for row in reader:
            curves.setdefault(row["method"], []).append((float(row["demographic_parity"]), float(row["accuracy"])))
    return curves


def summarize(methods, acc_base, dp_max=None, baselines=None):
    """Per-method AOC and Pareto fronts under one shared (dp_max, acc_base).

    ``methods`` maps a name to a list of points (ParetoPoint or (dp, acc));
    ``baselines`` are transcribed curves and are labelled as such.
    """
    curves = {name: [_coords(p) for p in pts] for name, pts in methods.items()}
    transcribed = set()
    for name, pts in (baselines or {}).items():
        label = f"{name} (transcribed)"
        curves[label] = [_coords(p) for p in pts]
        transcribed.add(label)
    curves = {k: v for k, v in curves.items() if v}
    if not curves:
        raise ConfigError("nothing to summarise")
    if not 0 <= acc_base <= 1:
        raise ConfigError(f"acc_base must lie in [0, 1], got {acc_base}")
    if dp_max is None:
        dp_max = max(dp for pts in curves.values() for dp, _ in pts)
    if dp_max <= 0:
        raise ConfigError(f"dp_max must be positive, got {dp_max}")
    report = {"acc_base": acc_base, "dp_max": dp_max, "methods": {}}
    for name, pts in curves.items():
        report["methods"][name] = {
            "aoc": area_over_curve(pts, dp_max, acc_base),
            "transcribed": name in transcribed,
            "n_points": len(pts),
            "front": [list(p) for p in pareto_front(pts)],
        }
    return report


def write_points(path, points):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=POINT_FIELDS, lineterminator="\n")
        w.writeheader()
        for p in points:
            w.writerow({k: ("" if v is None else repr(v)) for k, v in p.row().items()})


def read_points(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def num(k):
                return float(row[k]) if row[k] != "" else None
            out.append(ParetoPoint(eta=float(row["eta"]), seed=int(row["seed"]), accuracy=float(row["accuracy"]),
                                   average_precision=num("average_precision"),
                                   demographic_parity=float(row["demographic_parity"]),
                                   equal_opportunity=num("equal_opportunity")))
    return out


def write_curve(path, pts):
    pts = sorted(_coords(p) for p in pts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["demographic_parity", "accuracy"])
        for dp, acc in pts:
            w.writerow([repr(dp), repr(acc)])

