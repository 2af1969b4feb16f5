"""Fully connected binary classifier with an embedded distraction block.

Layout::

    x -> pre layers -> distraction layers -> head layers -> sigmoid

The distraction layers (``theta_d``) sit directly before the head and map the
last pre-layer width back onto itself, so any depth >= 1 slots in without
changing the rest of the network. Everything else is ``theta_c``.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "none")
CHECKPOINT_FORMAT = "distraction-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    in_width: int
    out_width: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_width < 1 or self.out_width < 1:
            raise ConfigError(f"layer widths must be >= 1, got {self.in_width}->{self.out_width}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass
class ModelConfig:
    input_dim: int
    pre_widths: tuple = (32, 32)
    distraction_depth: int = 1
    distraction_width: int | None = None
    head_widths: tuple = (1,)
    activation: str = "relu"
    distraction_activation: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.pre_widths = tuple(int(w) for w in self.pre_widths)
        self.head_widths = tuple(int(w) for w in self.head_widths)
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.pre_widths:
            raise ConfigError("at least one pre-layer is required to host the distraction block")
        if any(w < 1 for w in self.pre_widths + self.head_widths):
            raise ConfigError(f"zero or negative width in {self.pre_widths} / {self.head_widths}")
        if self.distraction_depth < 1:
            raise ConfigError(f"distraction_depth must be >= 1, got {self.distraction_depth}")
        if self.distraction_width is not None and self.distraction_width < 1:
            raise ConfigError(f"distraction_width must be >= 1, got {self.distraction_width}")
        if not self.head_widths or self.head_widths[-1] != 1:
            raise ConfigError(f"head must end in a single output unit, got {self.head_widths}")
        for act in (self.activation, self.distraction_activation or self.activation):
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")

    def to_dict(self):
        d = asdict(self)
        d["pre_widths"] = list(self.pre_widths)
        d["head_widths"] = list(self.head_widths)
        return d


# Hidden widths are not given for the tabular presets; 32 is our default.
PRESETS = {
    "adult": dict(pre_widths=(32, 32), distraction_depth=1, head_widths=(1,)),
    "health": dict(pre_widths=(32, 32), distraction_depth=3, head_widths=(1,)),
}


def preset_config(name, input_dim, **overrides):
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(overrides)
    return ModelConfig(input_dim=input_dim, **base)


@dataclass
class Layer:
    spec: LayerSpec
    weight: ad.Node
    bias: ad.Node
    role: str  # "pre" | "distraction" | "head"

    def __call__(self, h):
        z = ad.add(ad.matmul(h, self.weight), self.bias)
        return _activate(z, self.spec.activation)


def _activate(z, kind):
    if kind == "relu":
        return ad.relu(z)
    if kind == "tanh":
        return ad.tanh(z)
    if kind == "sigmoid":
        return ad.sigmoid(z)
    return z


@dataclass
class PartitionedModel:
    config: ModelConfig
    pre: list = field(default_factory=list)
    distraction: list = field(default_factory=list)
    head: list = field(default_factory=list)

    @property
    def layers(self):
        return self.pre + self.distraction + self.head

    @property
    def input_dim(self):
        return self.config.input_dim

    def parameters(self):
        return [p for layer in self.layers for p in (layer.weight, layer.bias)]

    def n_parameters(self):
        return int(sum(p.value.size for p in self.parameters()))

    def __call__(self, x):
        return forward(self, x)


def _layer_specs(cfg):
    act = cfg.activation
    widths = (cfg.input_dim,) + cfg.pre_widths
    pre = [LayerSpec(widths[i], widths[i + 1], act) for i in range(len(cfg.pre_widths))]

    h = cfg.pre_widths[-1]
    inner = cfg.distraction_width or h
    dw = [h] + [inner] * (cfg.distraction_depth - 1) + [h]
    dact = cfg.distraction_activation or act
    dist = [LayerSpec(dw[i], dw[i + 1], dact) for i in range(cfg.distraction_depth)]

    hw = (h,) + cfg.head_widths
    head = [LayerSpec(hw[i], hw[i + 1], act) for i in range(len(cfg.head_widths) - 1)]
    head.append(LayerSpec(hw[-2], hw[-1], "sigmoid"))
    return pre, dist, head


def build_model(cfg):
    rng = np.random.default_rng(cfg.seed)
    pre, dist, head = _layer_specs(cfg)

    def make(spec, role):
        bound = np.sqrt(6.0 / (spec.in_width + spec.out_width))
        w = rng.uniform(-bound, bound, size=(spec.in_width, spec.out_width))
        return Layer(spec, ad.parameter(w), ad.parameter(np.zeros((1, spec.out_width))), role)

    return PartitionedModel(
        config=cfg,
        pre=[make(s, "pre") for s in pre],
        distraction=[make(s, "distraction") for s in dist],
        head=[make(s, "head") for s in head],
    )


def _as_input(model, x):
    x = ad.constant(x)
    if x.shape[1] != model.input_dim:
        raise ShapeError(f"input has {x.shape[1]} columns, model expects {model.input_dim} (shape {x.shape})")
    return x


def embed(model, x):
    h = _as_input(model, x)
    for layer in model.pre + model.distraction:
        h = layer(h)
    return h


def forward(model, x):
    """Probabilities s = C(x, D(x)) as an m x 1 node."""
    h = embed(model, x)
    for layer in model.head:
        h = layer(h)
    return h


def export_embeddings(model, x):
    """Activations entering the head (the distraction block's output), m x k."""
    return embed(model, x).value.copy()


def predict_proba(model, x):
    return forward(model, x).value[:, 0].copy()


def partition_params(model):
    theta_c = [p for layer in model.pre + model.head for p in (layer.weight, layer.bias)]
    theta_d = [p for layer in model.distraction for p in (layer.weight, layer.bias)]
    return theta_c, theta_d


# -- checkpoints --------------------------------------------------------------

def model_state(model):
    layers = []
    for layer in model.layers:
        layers.append({
            "role": layer.role,
            "partition": "theta_d" if layer.role == "distraction" else "theta_c",
            "in_width": layer.spec.in_width,
            "out_width": layer.spec.out_width,
            "activation": layer.spec.activation,
            "weight": layer.weight.value.tolist(),
            "bias": layer.bias.value.ravel().tolist(),
        })
    return {"config": model.config.to_dict(), "layers": layers}


def model_from_state(state):
    cfg = ModelConfig(**state["config"])
    model = build_model(cfg)
    if len(state["layers"]) != len(model.layers):
        raise ConfigError(f"checkpoint has {len(state['layers'])} layers, config implies {len(model.layers)}")
    for layer, rec in zip(model.layers, state["layers"]):
        if rec["role"] != layer.role:
            raise ConfigError(f"checkpoint layer role {rec['role']!r} does not match {layer.role!r}")
        w = np.array(rec["weight"], dtype=np.float64).reshape(layer.weight.shape)
        b = np.array(rec["bias"], dtype=np.float64).reshape(layer.bias.shape)
        layer.weight.value = w
        layer.bias.value = b
        ad.reset_grads([layer.weight, layer.bias])
    return model


def save_checkpoint(path, model, extra=None):
    """JSON dump; Python float repr round-trips, so reload is bit-exact."""
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "model": model_state(model)}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return path


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a distraction checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    return model_from_state(doc["model"]), doc
