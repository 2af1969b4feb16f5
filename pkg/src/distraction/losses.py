"""Classification loss and the two fairness losses driving the distraction block."""

import math
import warnings

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError

GROUP_GAP = "group-gap"
PROTECTED_NLL = "protected-nll"
FAIRNESS_KINDS = (GROUP_GAP, PROTECTED_NLL)

PROB_CLAMP = 1e-12
LOGIT_CLAMP = 30.0
VAR_FLOOR = 1e-8


def _column(v, m, name):
    v = np.asarray(v).ravel()
    if v.shape[0] != m:
        raise ShapeError(f"{name} has length {v.shape[0]}, scores have {m} rows")
    return v


def bce_loss(s, y):
    """Mean binary cross-entropy of probabilities ``s`` (m x 1) against labels ``y``.

    If ``s`` came straight out of a sigmoid, the logits are reused through the
    fused log-sigmoid so saturated outputs stay finite.
    """
    m = s.shape[0]
    if s.shape[1] != 1:
        raise ShapeError(f"scores must be m x 1, got {s.shape}")
    y = _column(y, m, "y").astype(np.float64).reshape(-1, 1)
    if s.op == "sigmoid":
        z = s.parents[0]
        log_p, log_q = ad.log_sigmoid(z), ad.log_sigmoid(ad.neg(z))
    else:
        sc = ad.clip(s, PROB_CLAMP, 1.0 - PROB_CLAMP)
        log_p, log_q = ad.log(sc), ad.log(ad.add(ad.neg(sc), np.ones((1, 1))))
    ll = ad.add(ad.mul(log_p, y), ad.mul(log_q, 1.0 - y))
    return ad.neg(ad.mean(ll))


def group_stats(a, m=None):
    """Counts, priors and row indices per group present in ``a``."""
    a = np.asarray(a).ravel()
    groups, counts = np.unique(a, return_counts=True)
    n = a.shape[0] if m is None else m
    return [(int(g), int(c), c / n, np.flatnonzero(a == g)) for g, c in zip(groups, counts)]


def group_gap_loss(s, a):
    """sum_g pi_g * (mean_g(s) - mean(s))**2, the prior-weighted spread of group means."""
    m = s.shape[0]
    a = _column(a, m, "a")
    stats = group_stats(a)
    if len(stats) < 2:
        return ad.scale(ad.mean(s), 0.0)
    overall = ad.mean(s)
    total = None
    for _, _, prior, idx in stats:
        gap = ad.sub(ad.mean(ad.select_rows(s, idx)), overall)
        term = ad.scale(ad.square(gap), prior)
        total = term if total is None else ad.add(total, term)
    return total


def _logit(s):
    lo = 1.0 / (1.0 + math.exp(LOGIT_CLAMP))
    sc = ad.clip(s, lo, 1.0 - lo)
    z = ad.sub(ad.log(sc), ad.log(ad.add(ad.neg(sc), np.ones((1, 1)))))
    return ad.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)


def protected_nll_loss(s, a):
    """Mean -log p(a_i | s_i) under per-group Gaussians fitted to logit(s) on this batch.

    Group means and (biased) variances are differentiable functions of ``s``;
    the posterior combines them with the batch priors by Bayes' rule. If any
    present group has fewer than two rows the posterior collapses to the prior.
    """
    m = s.shape[0]
    a = _column(a, m, "a")
    stats = group_stats(a)
    if len(stats) < 2 or any(c < 2 for _, c, _, _ in stats):
        prior = {g: p for g, _, p, _ in stats}
        value = -np.mean([math.log(prior[int(g)]) for g in a])
        return ad.add(ad.scale(ad.mean(s), 0.0), np.array([[value]]))

    z = _logit(s)
    cols = []
    onehot = np.zeros((m, len(stats)))
    for j, (_, _, prior, idx) in enumerate(stats):
        onehot[idx, j] = 1.0
        zg = ad.select_rows(z, idx)
        mu = ad.mean(zg)
        var = ad.mean(ad.square(ad.sub(zg, mu)))
        if var.value[0, 0] < VAR_FLOOR:
            warnings.warn(f"group variance {var.value[0, 0]:.3g} below floor {VAR_FLOOR}; flooring",
                          RuntimeWarning, stacklevel=2)
        var = ad.clip(var, VAR_FLOOR)
        # log pi_g - 0.5 log(2 pi var) - (z - mu)^2 / (2 var)
        const = ad.add(ad.scale(ad.log(var), -0.5), np.array([[math.log(prior) - 0.5 * math.log(2 * math.pi)]]))
        quad = ad.matmul(ad.square(ad.sub(z, mu)), ad.scale(ad.reciprocal(var), -0.5))
        cols.append(ad.add(quad, const))
    joint = ad.concat_cols(cols)
    evidence = ad.logsumexp_rows(joint)
    picked = ad.scale(ad.sum(ad.mul(joint, onehot)), 1.0 / m)
    return ad.sub(ad.mean(evidence), picked)


def fairness_loss(kind, s, a):
    if kind == GROUP_GAP:
        return group_gap_loss(s, a)
    if kind == PROTECTED_NLL:
        return protected_nll_loss(s, a)
    raise ConfigError(f"unknown fairness loss {kind!r}; choose from {FAIRNESS_KINDS}")


def scaled_fairness_loss(kind, s, a, eta):
    """The quantity the distraction optimizer *descends*.

    group-gap is minimised directly. protected-nll is negated so that
    descending it ascends -log p(a|s), i.e. makes the protected group harder
    to read off the scores.
    """
    if eta < 0:
        raise ConfigError(f"eta must be non-negative, got {eta}")
    base = fairness_loss(kind, s, a)
    sign = -1.0 if kind == PROTECTED_NLL else 1.0
    return ad.scale(base, sign * eta)
