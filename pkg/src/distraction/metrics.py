"""Accuracy, average precision, demographic parity and equal-opportunity gaps,
plus the area-over-curve summary used to compare trade-off curves."""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, MetricError

THRESHOLD = 0.5


def _vec(v, name):
    v = np.asarray(v).ravel()
    if v.size == 0:
        raise MetricError(f"{name} is empty")
    return v


def _lengths(**arrays):
    n = {k: len(v) for k, v in arrays.items()}
    if len(set(n.values())) != 1:
        raise MetricError(f"length mismatch: {n}")


def hard_labels(s, threshold=THRESHOLD):
    return (np.asarray(s, dtype=np.float64).ravel() >= threshold).astype(np.int64)


def accuracy(y_hat, y):
    y_hat, y = _vec(y_hat, "y_hat"), _vec(y, "y")
    _lengths(y_hat=y_hat, y=y)
    return float(np.mean(y_hat == y))


def _group_ids(a, groups):
    present = np.unique(a)
    if groups is None:
        return present
    groups = np.asarray(groups)
    missing = np.setdiff1d(groups, present)
    if missing.size:
        raise MetricError(f"group {missing[0]!r} has no samples")
    return groups


def positive_rates(y_hat, a, groups=None):
    y_hat, a = _vec(y_hat, "y_hat"), _vec(a, "a")
    _lengths(y_hat=y_hat, a=a)
    return {int(g): float(np.mean(y_hat[a == g])) for g in _group_ids(a, groups)}


def true_positive_rates(y_hat, y, a, groups=None):
    y_hat, y, a = _vec(y_hat, "y_hat"), _vec(y, "y"), _vec(a, "a")
    _lengths(y_hat=y_hat, y=y, a=a)
    out = {}
    for g in _group_ids(a, groups):
        pos = (a == g) & (y == 1)
        if not pos.any():
            raise MetricError(f"group {g!r} has no positive labels; TPR undefined")
        out[int(g)] = float(np.mean(y_hat[pos]))
    return out


def _max_gap(rates):
    vals = list(rates.values())
    return float(max(vals) - min(vals)) if vals else 0.0


def demographic_parity(y_hat, a, groups=None):
    """max over group pairs of |P(y_hat=1 | a=i) - P(y_hat=1 | a=j)|."""
    return _max_gap(positive_rates(y_hat, a, groups))


def equal_opportunity_gap(y_hat, y, a, groups=None):
    return _max_gap(true_positive_rates(y_hat, y, a, groups))


def average_precision(s, y):
    """Step-wise AP: mean precision at the rank of each positive.

    Ranking is by descending score with ties broken by original index.
    """
    s, y = _vec(s, "s").astype(np.float64), _vec(y, "y")
    _lengths(s=s, y=y)
    n_pos = int(np.sum(y == 1))
    if n_pos == 0:
        raise MetricError("average precision needs at least one positive label")
    order = np.argsort(-s, kind="stable")
    hits = (y[order] == 1).astype(np.float64)
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(np.sum(precision * hits) / n_pos)


def area_over_curve(points, dp_max, acc_base):
    """Normalised area between the best-accuracy-so-far step curve and ``acc_base``.

    ``acc*(t)`` is the best accuracy among points with dp <= t (``acc_base`` if
    none); the integrand is ``max(0, acc*(t) - acc_base)`` over ``[0, dp_max]``,
    divided by ``dp_max``. The step function is integrated exactly.
    """
    if dp_max <= 0:
        raise ConfigError(f"dp_max must be positive, got {dp_max}")
    points = list(points)
    if not points:
        raise ConfigError("area_over_curve needs at least one point")
    # breakpoints only where acc* rises, so dominated points cannot perturb the sum
    steps, best = [], acc_base
    for dp, acc in sorted((float(dp), float(acc)) for dp, acc in points if dp <= dp_max):
        if acc > best:
            best = acc
            steps.append((max(dp, 0.0), best))
    area = 0.0
    for i, (dp, acc) in enumerate(steps):
        right = steps[i + 1][0] if i + 1 < len(steps) else dp_max
        area += (right - dp) * (acc - acc_base)
    return area / dp_max


@dataclass
class MetricsReport:
    n: int
    accuracy: float
    average_precision: float
    demographic_parity: float
    equal_opportunity: float
    positive_rates: dict
    true_positive_rates: dict
    group_counts: dict

    KEYS = ("n", "accuracy", "average_precision", "demographic_parity", "equal_opportunity",
            "positive_rates", "true_positive_rates", "group_counts")

    def to_dict(self):
        d = asdict(self)
        for k in ("positive_rates", "true_positive_rates", "group_counts"):
            d[k] = {str(g): v for g, v in sorted(d[k].items())}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def evaluate(s, y, a, threshold=THRESHOLD):
    s = _vec(s, "s").astype(np.float64)
    y = _vec(y, "y").astype(np.int64)
    a = _vec(a, "a").astype(np.int64)
    _lengths(s=s, y=y, a=a)
    y_hat = hard_labels(s, threshold)
    groups, counts = np.unique(a, return_counts=True)
    try:
        tprs = true_positive_rates(y_hat, y, a)
        eo = _max_gap(tprs)
    except MetricError:
        tprs, eo = {}, None
    try:
        ap = average_precision(s, y)
    except MetricError:
        ap = None
    return MetricsReport(
        n=int(len(s)),
        accuracy=accuracy(y_hat, y),
        average_precision=ap,
        demographic_parity=demographic_parity(y_hat, a),
        equal_opportunity=eo,
        positive_rates=positive_rates(y_hat, a),
        true_positive_rates=tprs,
        group_counts={int(g): int(c) for g, c in zip(groups, counts)},
    )
