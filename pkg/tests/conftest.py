import numpy as np
import pytest

from distraction import autodiff as ad
from distraction.data import SynthSpec, split, synth_generate
from distraction.model import ModelConfig, build_model


def finite_difference(f, x, h=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of array ``x`` (mutated in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


# Entries whose true gradient is exactly zero (e.g. the head bias under the
# shift-invariant posterior) show central-difference round-off of ~eps*|L|/h,
# about 1e-10 at h=1e-5. A 1e-4 relative bound over a denominator floor F acts
# as an absolute tolerance of 1e-4*F, so F must sit well above 1e-6 for the check
# to measure gradients rather than round-off; 1e-5 leaves one decade of margin.
REL_FLOOR = 1e-5


def rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(REL_FLOOR, np.abs(a) + np.abs(b))))


def max_param_rel_error(model, loss_fn):
    """Max relative error of analytic vs finite-difference gradients over every parameter."""
    params = model.parameters()
    ad.reset_grads(params)
    ad.backward(loss_fn())
    analytic = [p.grad.copy() for p in params]
    ad.reset_grads(params)
    worst = 0.0
    for p, g in zip(params, analytic):
        num = finite_difference(lambda: loss_fn().item(), p.value)
        worst = max(worst, rel_error(g, num))
    return worst


@pytest.fixture
def tiny_model():
    return build_model(ModelConfig(input_dim=5, pre_widths=(8, 8), head_widths=(1,), seed=3))


@pytest.fixture
def batch():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((6, 5))
    y = np.array([1, 0, 1, 1, 0, 0])
    a = np.array([0, 0, 0, 1, 1, 1])
    return x, y, a


@pytest.fixture(scope="session")
def synth_small():
    ds = synth_generate(SynthSpec(n=600, seed=0))
    return split(ds, 2 / 3, seed=0)
