import numpy as np

from .errors import ConfigError, ContractError


class AdamState:
    """Moments and step counter for one parameter list. Never shared between optimizers."""

    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def to_dict(self):
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "t": self.t,
            "m": [x.tolist() for x in self.m], "v": [x.tolist() for x in self.v],
        }

    @classmethod
    def from_dict(cls, d):
        st = cls([], d["lr"], d["beta1"], d["beta2"], d["eps"])
        st.t = int(d["t"])
        st.m = [np.array(x, dtype=np.float64) for x in d["m"]]
        st.v = [np.array(x, dtype=np.float64) for x in d["v"]]
        return st


def _check(params, grads):
    if len(params) != len(grads):
        raise ContractError(f"{len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != np.shape(g):
            raise ContractError(f"parameter {i} has shape {p.shape}, gradient {np.shape(g)}")


def adam_step(params, grads, state):
    """Bias-corrected Adam update of ``params`` (arrays, updated in place)."""
    _check(params, grads)
    if len(state.m) != len(params) or any(m.shape != p.shape for m, p in zip(state.m, params)):
        raise ContractError("Adam state does not match the parameter list")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def sgd_step(params, grads, lr):
    _check(params, grads)
    for p, g in zip(params, grads):
        p -= lr * g
    return params


class Optimizer:
    """Owns a parameter list (autodiff leaves) and applies their ``.grad``."""

    def __init__(self, params, kind="adam", lr=1e-3, **adam_kw):
        self.params = list(params)
        self.kind = kind
        self.lr = float(lr)
        if kind == "adam":
            self.state = AdamState([p.shape for p in self.params], lr=lr, **adam_kw)
        elif kind == "sgd":
            self.state = None
        else:
            raise ConfigError(f"unknown optimizer {kind!r}; choose 'adam' or 'sgd'")

    def step(self):
        values = [p.value for p in self.params]
        grads = [p.grad for p in self.params]
        if self.kind == "adam":
            adam_step(values, grads, self.state)
        else:
            sgd_step(values, grads, self.lr)

    def zero_grad(self):
        for p in self.params:
            p.grad = np.zeros_like(p.value)

    def state_dict(self):
        return {"kind": self.kind, "lr": self.lr, "adam": self.state.to_dict() if self.state else None}

    def load_state_dict(self, d):
        if d["kind"] != self.kind:
            raise ConfigError(f"optimizer kind mismatch: {d['kind']} vs {self.kind}")
        self.lr = float(d["lr"])
        if d["adam"] is not None:
            self.state = AdamState.from_dict(d["adam"])
