"""Alternating two-optimizer training.

Each minibatch iteration first steps the distraction parameters on the
eta-scaled fairness loss, then steps the classifier parameters on BCE with the
distraction block frozen. Both steps see the same minibatch.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError
from .losses import FAIRNESS_KINDS, GROUP_GAP, bce_loss, scaled_fairness_loss
from .metrics import accuracy, demographic_parity, hard_labels
from .model import forward, partition_params, predict_proba
from .optim import Optimizer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    eta: float = 100.0
    lr_net: float = 1e-3
    lr_distraction: float = 1e-5
    batch_size: int = 100
    epochs: int = 50
    seed: int = 0
    fairness_loss: str = GROUP_GAP
    optimizer: str = "adam"
    distraction_optimizer: str | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle: bool = True
    resample_classifier_batch: bool = False

    def __post_init__(self):
        if self.eta < 0:
            raise ConfigError(f"eta must be non-negative, got {self.eta}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.fairness_loss not in FAIRNESS_KINDS:
            raise ConfigError(f"unknown fairness loss {self.fairness_loss!r}; choose from {FAIRNESS_KINDS}")
        for kind in (self.optimizer, self.distraction_optimizer or self.optimizer):
            if kind not in ("adam", "sgd"):
                raise ConfigError(f"unknown optimizer {kind!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    classifier_loss: float
    fairness_loss: float
    train_accuracy: float
    train_dp: float
    val_accuracy: float | None
    val_dp: float | None
    skipped_distraction_steps: int
    seconds: float


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    skipped_distraction_steps: int = 0
    iterations: int = 0

    def to_dicts(self):
        return [asdict(r) for r in self.records]

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(asdict(r)) + "\n")


def make_optimizers(model, cfg):
    theta_c, theta_d = partition_params(model)
    kw = dict(beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    opt_c = Optimizer(theta_c, cfg.optimizer, cfg.lr_net, **(kw if cfg.optimizer == "adam" else {}))
    kind_d = cfg.distraction_optimizer or cfg.optimizer
    opt_d = Optimizer(theta_d, kind_d, cfg.lr_distraction, **(kw if kind_d == "adam" else {}))
    return opt_c, opt_d


def _zero_all(model):
    ad.reset_grads(model.parameters())


def distraction_step(model, xb, ab, opt_d, eta, kind=GROUP_GAP):
    """One update of theta_d on the eta-scaled fairness loss.

    Returns the loss value, or None when the batch holds a single group and the
    step is skipped. Gradients flow through the whole network but only theta_d
    moves.
    """
    if len(np.unique(ab)) < 2:
        return None
    _zero_all(model)
    loss = scaled_fairness_loss(kind, forward(model, xb), ab, eta)
    ad.backward(loss)
    opt_d.step()
    _zero_all(model)
    return loss.item()


def classifier_step(model, xb, yb, opt_c):
    _zero_all(model)
    loss = bce_loss(forward(model, xb), yb)
    ad.backward(loss)
    opt_c.step()
    _zero_all(model)
    return loss.item()


def _snapshot(model, x, y, a):
    y_hat = hard_labels(predict_proba(model, x))
    dp = demographic_parity(y_hat, a) if len(np.unique(a)) > 1 else 0.0
    return accuracy(y_hat, y), dp


def epoch_rng(seed, epoch):
    return np.random.default_rng([seed, epoch])


def train(model, dataset, cfg, validation=None, optimizers=None, start_epoch=0, on_epoch=None):
    """Run epochs ``start_epoch .. cfg.epochs - 1``; returns ``(model, trace)``.

    Shuffling for each epoch is drawn from ``(cfg.seed, epoch)``, so a run
    resumed from a checkpoint (parameters, optimizer states, epoch count)
    continues exactly as an uninterrupted one would.
    """
    if dataset.x.shape[1] != model.input_dim:
        raise ConfigError(f"dataset has {dataset.x.shape[1]} features, model expects {model.input_dim}")
    opt_c, opt_d = optimizers or make_optimizers(model, cfg)
    x, y, a = dataset.x, dataset.y, dataset.a
    n = len(y)
    trace = TrainTrace()

    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.perf_counter()
        rng = epoch_rng(cfg.seed, epoch)
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        c_losses, f_losses, skipped = [], [], 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            f = distraction_step(model, x[idx], a[idx], opt_d, cfg.eta, cfg.fairness_loss)
            if f is None:
                skipped += 1
            else:
                f_losses.append(f)
            if cfg.resample_classifier_batch:
                idx = rng.choice(n, size=len(idx), replace=False)
            c_losses.append(classifier_step(model, x[idx], y[idx], opt_c))
            trace.iterations += 1
        trace.skipped_distraction_steps += skipped

        tr_acc, tr_dp = _snapshot(model, x, y, a)
        va_acc = va_dp = None
        if validation is not None:
            va_acc, va_dp = _snapshot(model, validation.x, validation.y, validation.a)
        rec = EpochRecord(
            epoch=epoch + 1,
            classifier_loss=float(np.mean(c_losses)),
            fairness_loss=float(np.mean(f_losses)) if f_losses else 0.0,
            train_accuracy=tr_acc,
            train_dp=tr_dp,
            val_accuracy=va_acc,
            val_dp=va_dp,
            skipped_distraction_steps=skipped,
            seconds=time.perf_counter() - t0,
        )
        trace.records.append(rec)
        log.debug("epoch %d bce=%.4f fair=%.4g acc=%.4f dp=%.4f", rec.epoch, rec.classifier_loss,
                  rec.fairness_loss, rec.train_accuracy, rec.train_dp)
        if on_epoch is not None:
            on_epoch(rec)
    return model, trace
