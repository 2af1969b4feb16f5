"""Tabular ingestion, encoding, splitting, and a synthetic biased-data generator.

Raw rows are kept on every :class:`Dataset` so that :func:`split` can refit the
encoder (z-score statistics, one-hot vocabularies) on the training rows only.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd
import yaml
from scipy.stats import norm

from .errors import ConfigError, DataError
from .metrics import demographic_parity


@dataclass
class Schema:
    label: str
    protected: str
    positive: str = "1"
    protected_values: list | None = None
    categorical: list = field(default_factory=list)
    numeric: list | str = "auto"
    vocabularies: dict = field(default_factory=dict)
    include_protected: bool = False

    def __post_init__(self):
        if self.label == self.protected:
            raise ConfigError("label and protected attribute must be different columns")
        if self.protected_values is not None:
            self.protected_values = [str(v) for v in self.protected_values]
            if len(self.protected_values) < 2:
                raise ConfigError("protected attribute needs at least two groups")
        self.positive = str(self.positive)
        self.vocabularies = {k: [str(v) for v in vs] for k, vs in self.vocabularies.items()}

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def feature_columns(self, columns):
        reserved = {self.label, self.protected}
        if self.numeric == "auto":
            numeric = [c for c in columns if c not in reserved and c not in self.categorical]
        else:
            numeric = list(self.numeric)
        missing = [c for c in [self.label, self.protected, *numeric, *self.categorical] if c not in columns]
        if missing:
            raise DataError(f"columns missing from header: {missing}")
        return numeric, list(self.categorical)


def load_schema(path):
    with open(path) as fh:
        doc = yaml.safe_load(fh)  # JSON is a subset of YAML
    return Schema.from_dict(doc)


def save_schema(path, schema):
    with open(path, "w") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class Encoder:
    numeric: list
    categorical: list
    means: list
    stds: list
    vocabularies: dict
    groups: list
    include_protected: bool = False

    @property
    def width(self):
        w = len(self.numeric) + sum(len(self.vocabularies[c]) for c in self.categorical)
        return w + (len(self.groups) if self.include_protected else 0)

    def feature_names(self):
        names = list(self.numeric)
        for c in self.categorical:
            names += [f"{c}={v}" for v in self.vocabularies[c]]
        if self.include_protected:
            names += [f"protected={g}" for g in self.groups]
        return names

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def decode_categorical(self, x, column):
        off = len(self.numeric)
        for c in self.categorical:
            if c == column:
                block = np.asarray(x)[:, off:off + len(self.vocabularies[c])]
                return [self.vocabularies[c][i] for i in block.argmax(axis=1)]
            off += len(self.vocabularies[c])
        raise KeyError(column)


def _numeric_block(frame, columns):
    out = np.empty((len(frame), len(columns)))
    for j, c in enumerate(columns):
        vals = pd.to_numeric(frame[c], errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise DataError(f"column {c!r}: non-numeric value {frame[c].iloc[bad[0]]!r} at row {bad[0]}")
        out[:, j] = vals
    return out


def _check_missing(frame, columns):
    for c in columns:
        col = frame[c]
        blank = col.isna() | (col.astype(str).str.strip().isin(["", "?"]))
        if blank.any():
            row = int(np.flatnonzero(blank.to_numpy())[0])
            raise DataError(f"missing value in column {c!r} at row {row} (no imputation is performed)")


def fit_encoder(frame, schema):
    numeric, categorical = schema.feature_columns(list(frame.columns))
    _check_missing(frame, [schema.label, schema.protected, *numeric, *categorical])
    num = _numeric_block(frame, numeric)
    means = num.mean(axis=0) if len(frame) else np.zeros(len(numeric))
    stds = num.std(axis=0) if len(frame) else np.ones(len(numeric))
    stds = np.where(stds > 0, stds, 1.0)
    vocab = {}
    for c in categorical:
        vocab[c] = list(schema.vocabularies.get(c) or sorted(frame[c].astype(str).str.strip().unique()))
    groups = schema.protected_values or sorted(frame[schema.protected].astype(str).str.strip().unique())
    if len(groups) < 2:
        raise DataError(f"protected column {schema.protected!r} has fewer than two groups: {groups}")
    return Encoder(numeric, categorical, means.tolist(), stds.tolist(), vocab, list(groups),
                   schema.include_protected)


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    provenance: str = ""
    split: str = "full"
    frame: pd.DataFrame | None = field(default=None, repr=False)
    schema: Schema | None = field(default=None, repr=False)
    encoder: Encoder | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self):
        return self.x.shape[1]

    @property
    def n_groups(self):
        return len(self.encoder.groups) if self.encoder else int(self.a.max()) + 1


def encode(frame, schema, encoder, provenance="", split="full"):
    _check_missing(frame, [schema.label, schema.protected, *encoder.numeric, *encoder.categorical])
    num = (_numeric_block(frame, encoder.numeric) - np.array(encoder.means)) / np.array(encoder.stds)
    blocks = [num.reshape(len(frame), len(encoder.numeric))]
    for c in encoder.categorical:
        vocab = {v: i for i, v in enumerate(encoder.vocabularies[c])}
        vals = frame[c].astype(str).str.strip()
        oh = np.zeros((len(frame), len(vocab)))
        for r, v in enumerate(vals):
            if v not in vocab:
                raise DataError(f"column {c!r}: unknown category {v!r} (row {r})")
            oh[r, vocab[v]] = 1.0
        blocks.append(oh)

    gid = {g: i for i, g in enumerate(encoder.groups)}
    a = np.empty(len(frame), dtype=np.int64)
    for r, v in enumerate(frame[schema.protected].astype(str).str.strip()):
        if v not in gid:
            raise DataError(f"protected column {schema.protected!r}: unknown group {v!r} (row {r})")
        a[r] = gid[v]
    if encoder.include_protected:
        blocks.append(np.eye(len(gid))[a])

    y = (frame[schema.label].astype(str).str.strip() == schema.positive).to_numpy().astype(np.int64)
    x = np.concatenate(blocks, axis=1) if blocks else np.zeros((len(frame), 0))
    return Dataset(x=x, y=y, a=a, provenance=provenance, split=split,
                   frame=frame, schema=schema, encoder=encoder)


def _file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_frame(path):
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None


def load_csv(path, schema, encoder=None):
    """Load and encode a CSV. The encoder is fitted on this file unless one is given."""
    frame = read_frame(path)
    schema.feature_columns(list(frame.columns))
    enc = encoder or fit_encoder(frame, schema)
    return encode(frame, schema, enc, provenance=f"sha256:{_file_hash(path)}")


def split(dataset, fraction=2 / 3, seed=0):
    """Seeded shuffle split into (train, test); the encoder is refit on train rows."""
    if not 0 < fraction < 1:
        raise ConfigError(f"split fraction must be in (0, 1), got {fraction}")
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fraction * n))
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    if dataset.frame is None or dataset.schema is None:
        def take(idx, tag):
            return replace(dataset, x=dataset.x[idx], y=dataset.y[idx], a=dataset.a[idx], split=tag, frame=None)
        return take(tr, "train"), take(te, "test")
    ftr = dataset.frame.iloc[tr].reset_index(drop=True)
    fte = dataset.frame.iloc[te].reset_index(drop=True)
    enc = fit_encoder(ftr, dataset.schema)
    if dataset.encoder is not None:
        # keep group ordering and vocabularies stable across the split
        enc.groups = list(dataset.encoder.groups)
        enc.vocabularies = {c: list(v) for c, v in dataset.encoder.vocabularies.items()}
    prov = f"{dataset.provenance}|split={fraction:.6g}@{seed}"
    return (encode(ftr, dataset.schema, enc, prov, "train"),
            encode(fte, dataset.schema, enc, prov, "test"))


def write_csv(path, dataset):
    if dataset.frame is None:
        raise DataError("dataset has no raw rows to export")
    dataset.frame.to_csv(path, index=False, lineterminator="\n")
    return path


# -- synthetic data -------------------------------------------------------------

@dataclass
class SynthSpec:
    """Generator for a binary task whose labels and proxy features leak the group.

    ``a ~ Bernoulli(prior)``; base features are standard normal; each proxy is
    ``beta * a + noise * N(0, 1)``; the label is ``1[w . x_base + beta * a + noise * N(0, 1) > 0]``.
    """

    n: int = 4000
    d: int = 6
    prior: float = 0.5
    beta: float = 2.0
    n_proxy: int = 2
    weights: list | None = None
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.prior < 1:
            raise ConfigError(f"prior must be in (0, 1), got {self.prior}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.noise <= 0:
            raise ConfigError(f"noise must be > 0, got {self.noise}")
        if not 0 <= self.n_proxy < self.d:
            raise ConfigError(f"need 0 <= n_proxy < d, got n_proxy={self.n_proxy}, d={self.d}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.weights is not None and len(self.weights) != self.d_base:
            raise ConfigError(f"weights must have length d - n_proxy = {self.d_base}")

    @property
    def d_base(self):
        return self.d - self.n_proxy

    @property
    def w(self):
        return np.ones(self.d_base) if self.weights is None else np.asarray(self.weights, dtype=np.float64)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


SYNTH_SCHEMA = dict(label="label", protected="group", positive="1", protected_values=["0", "1"])


def _sample(spec, n, rng):
    a = (rng.random(n) < spec.prior).astype(np.int64)
    base = rng.standard_normal((n, spec.d_base))
    proxies = spec.beta * a[:, None] + spec.noise * rng.standard_normal((n, spec.n_proxy))
    logit = base @ spec.w + spec.beta * a + spec.noise * rng.standard_normal(n)
    y = (logit > 0).astype(np.int64)
    return base, proxies, a, y


def synth_generate(spec):
    rng = np.random.default_rng(spec.seed)
    base, proxies, a, y = _sample(spec, spec.n, rng)
    cols = {f"x{j}": base[:, j] for j in range(spec.d_base)}
    cols.update({f"proxy{j}": proxies[:, j] for j in range(spec.n_proxy)})
    cols["group"] = a
    cols["label"] = y
    frame = pd.DataFrame(cols)
    schema = Schema(**SYNTH_SCHEMA)
    enc = fit_encoder(frame, schema)
    digest = hashlib.sha256(json.dumps(spec.to_dict(), sort_keys=True).encode()).hexdigest()[:16]
    return encode(frame, schema, enc, provenance=f"synth:{digest}")


def bayes_posterior(spec, base, proxies):
    """P(y=1 | x) for the generator's known model, with a marginalised out."""
    if spec.n_proxy:
        # log-likelihood ratio of the proxies for a=1 vs a=0
        llr = (spec.beta * proxies.sum(axis=1) - 0.5 * spec.n_proxy * spec.beta ** 2) / spec.noise ** 2
    else:
        llr = np.zeros(len(base))
    p_a1 = 1.0 / (1.0 + np.exp(-(np.log(spec.prior / (1 - spec.prior)) + llr)))
    score = base @ spec.w
    return p_a1 * norm.cdf((score + spec.beta) / spec.noise) + (1 - p_a1) * norm.cdf(score / spec.noise)


@dataclass
class OracleResult:
    accuracy: float
    accuracy_se: float
    demographic_parity: float
    demographic_parity_se: float
    signed_gap: float
    n_mc: int

    def to_dict(self):
        return asdict(self)


def bias_oracle(spec, n_mc=100_000, seed=None):
    """Monte-Carlo accuracy and demographic parity of the Bayes-optimal classifier on x."""
    rng = np.random.default_rng(spec.seed + 1_000_003 if seed is None else seed)
    base, proxies, a, y = _sample(spec, n_mc, rng)
    y_hat = (bayes_posterior(spec, base, proxies) > 0.5).astype(np.int64)
    acc = float(np.mean(y_hat == y))
    rates, ses = [], []
    for g in (0, 1):
        sel = y_hat[a == g]
        p = float(sel.mean()) if sel.size else 0.0
        rates.append(p)
        ses.append(p * (1 - p) / max(sel.size, 1))
    dp = demographic_parity(y_hat, a) if len(np.unique(a)) > 1 else 0.0
    return OracleResult(
        accuracy=acc,
        accuracy_se=float(np.sqrt(acc * (1 - acc) / n_mc)),
        demographic_parity=float(dp),
        demographic_parity_se=float(np.sqrt(sum(ses))),
        signed_gap=rates[1] - rates[0],
        n_mc=int(n_mc),
    )
