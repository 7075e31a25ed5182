"""Differentiable categorical survival models on a flat parameter vector.

Three parameterizations share one interface:

- ``mlp``: ReLU MLP from features to K softmax logits (conditional model).
- ``marginal``: K free logits through a softmax (no features).
- ``marginal-prob``: the first K-1 bin probabilities as raw coordinates,
  the last bin holding the leftover mass. This is the parameterization the
  per-(player, horizon) game descends directly; simplex feasibility is
  maintained by the training step's projection, not by the model.

Gradients are computed by hand against the flat vector so the training loop
can treat the other player's probabilities as constants: the frozen side
enters losses only through plain numbers, never through a gradient path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import Batch, CategoricalSurvival
from .losses import ClampStats, LossSpec, batch_loss

__all__ = ["ArchSpec", "Model", "LossGradient", "loss_and_grad"]

KINDS = ("mlp", "marginal", "marginal-prob")


@dataclass(frozen=True)
class ArchSpec:
    """Shape of a model: kind, bin count, and (for MLPs) layer widths."""

    kind: str
    n_bins: int
    feature_dim: int = 0
    hidden: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_bins < 2:
            raise ValueError("need at least two bins")
        if self.kind == "mlp":
            if self.feature_dim < 1:
                raise ValueError("mlp needs feature_dim >= 1")
        elif self.feature_dim != 0 or self.hidden:
            raise ValueError(f"{self.kind} takes no features or hidden layers")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        if self.kind == "marginal":
            return [("logits", (self.n_bins,))]
        if self.kind == "marginal-prob":
            return [("theta", (self.n_bins - 1,))]
        sizes = (self.feature_dim, *self.hidden, self.n_bins)
        out = []
        for i in range(len(sizes) - 1):
            out.append((f"W{i}", (sizes[i + 1], sizes[i])))
            out.append((f"b{i}", (sizes[i + 1],)))
        return out

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layout())


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class Model:
    """Flat parameter vector plus an :class:`ArchSpec` describing its layout."""

    def __init__(self, arch: ArchSpec, params: np.ndarray):
        params = np.asarray(params, dtype=float).copy()
        if params.shape != (arch.n_params,):
            raise ValueError(f"expected {arch.n_params} params, got {params.shape}")
        self.arch = arch
        self.params = params
        self._slices = {}
        start = 0
        for name, shape in arch.layout():
            size = int(np.prod(shape))
            self._slices[name] = (slice(start, start + size), shape)
            start += size

    def view(self, name: str) -> np.ndarray:
        sl, shape = self._slices[name]
        return self.params[sl].reshape(shape)

    @classmethod
    def init(cls, arch: ArchSpec, seed=0, init_scale: float = 0.1) -> "Model":
        """Weights and logits ~ N(0, init_scale^2), biases zero; the direct
        probability parameterization starts uniform."""
        rng = np.random.default_rng(seed)
        params = np.zeros(arch.n_params)
        model = cls(arch, params)
        for name, shape in arch.layout():
            if name == "theta":
                model.view(name)[...] = 1.0 / arch.n_bins
            elif name.startswith("b"):
                continue
            else:
                model.view(name)[...] = rng.normal(0.0, init_scale, shape)
        return model

    def copy(self) -> "Model":
        return Model(self.arch, self.params)

    # -- forward ---------------------------------------------------------

    def _batch_n(self, features: np.ndarray | None, n: int | None) -> int:
        if self.arch.kind == "mlp":
            if features is None:
                raise ValueError("mlp model needs features")
            return features.shape[0]
        if n is not None:
            return n
        if features is not None:
            return features.shape[0]
        raise ValueError("marginal model needs n (or features to infer it)")

    def forward(self, features: np.ndarray | None = None, n: int | None = None):
        """Predicted pmfs (n, K) plus the cache needed for backprop."""
        n = self._batch_n(features, n)
        kind = self.arch.kind
        if kind == "marginal":
            pmf_row = _softmax(self.view("logits"))
            return np.broadcast_to(pmf_row, (n, self.arch.n_bins)), ("marginal", n, pmf_row)
        if kind == "marginal-prob":
            theta = self.view("theta")
            last = 1.0 - theta.sum()
            if np.any(theta < 0) or last < 0:
                raise ValueError("probability coordinates left the simplex")
            pmf_row = np.concatenate([theta, [last]])
            return np.broadcast_to(pmf_row, (n, self.arch.n_bins)), ("marginal-prob", n)
        x = np.asarray(features, dtype=float)
        if x.shape != (n, self.arch.feature_dim):
            raise ValueError(f"features must be (n, {self.arch.feature_dim})")
        acts = [x]
        h = x
        depth = len(self.arch.hidden)
        for i in range(depth):
            h = np.maximum(h @ self.view(f"W{i}").T + self.view(f"b{i}"), 0.0)
            acts.append(h)
        logits = h @ self.view(f"W{depth}").T + self.view(f"b{depth}")
        pmf = _softmax(logits)
        return pmf, ("mlp", acts, pmf)

    def predict_pmf(self, features: np.ndarray | None = None, n: int | None = None) -> np.ndarray:
        pmf, _ = self.forward(features, n)
        return np.array(pmf)

    # -- backward --------------------------------------------------------

    def backprop(self, cache, dpmf: np.ndarray) -> np.ndarray:
        """Gradient of sum_i <dpmf[i], pmf[i]>-style losses w.r.t. the flat
        parameter vector. ``dpmf`` must already carry any batch weights."""
        kind = cache[0]
        grad = np.zeros_like(self.params)
        out = Model(self.arch, grad)  # reuse the layout views
        if kind == "marginal":
            _, _, pmf_row = cache
            g = dpmf.sum(axis=0)
            out.view("logits")[...] = pmf_row * (g - g @ pmf_row)
        elif kind == "marginal-prob":
            g = dpmf.sum(axis=0)
            out.view("theta")[...] = g[:-1] - g[-1]
        else:
            _, acts, pmf = cache
            gdot = (dpmf * pmf).sum(axis=1, keepdims=True)
            delta = pmf * (dpmf - gdot)
            depth = len(self.arch.hidden)
            for i in range(depth, -1, -1):
                out.view(f"W{i}")[...] = delta.T @ acts[i]
                out.view(f"b{i}")[...] = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ self.view(f"W{i}")) * (acts[i] > 0)
        return out.params

    # -- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "arch": {
                "kind": self.arch.kind,
                "n_bins": self.arch.n_bins,
                "feature_dim": self.arch.feature_dim,
                "hidden": list(self.arch.hidden),
            },
            "params": self.params.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Model":
        a = payload["arch"]
        arch = ArchSpec(a["kind"], a["n_bins"], a["feature_dim"], tuple(a["hidden"]))
        return cls(arch, np.asarray(payload["params"], dtype=float))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Model":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class LossGradient:
    value: float
    grad: np.ndarray


def _frozen_pmf(frozen, batch: Batch) -> np.ndarray | None:
    if frozen is None:
        return None
    if isinstance(frozen, Model):
        return frozen.predict_pmf(batch.features, n=batch.n)
    if isinstance(frozen, CategoricalSurvival):
        return frozen.pmf
    return np.asarray(frozen, dtype=float)


def loss_and_grad(
    model: Model,
    frozen_other,
    batch: Batch,
    spec: LossSpec,
    stats: ClampStats | None = None,
) -> LossGradient:
    """Batch loss and its exact gradient for one player.

    ``frozen_other`` supplies the other player's probabilities (a Model, an
    (n, K) array, a (K,) pmf, or a CategoricalSurvival); it is evaluated
    once and treated as a constant, so the returned gradient has exactly
    ``model.arch.n_params`` entries and no path into the other player.
    """
    pmf, cache = model.forward(batch.features, n=batch.n)
    frozen = _frozen_pmf(frozen_other, batch)
    value, dpmf = batch_loss(spec, pmf, frozen, batch, stats)
    return LossGradient(value, model.backprop(cache, dpmf))
