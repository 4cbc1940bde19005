"""Dense feed-forward network with ReLU hidden layers and a linear output.

All math is float64. Weights are stored as (output_dim, input_dim)
matrices; a batch is (n, input_dim) and the forward pass computes
``a @ W.T + b`` layer by layer. Gradients come from exact reverse-mode
differentiation of the mean-squared-error loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, InternalError, ModelMismatchError


class Activation(Enum):
    RELU = "relu"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LayerSpec:
    """One dense layer: input_dim -> output_dim with an activation."""

    input_dim: int
    output_dim: int
    activation: Activation

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigError(
                f"layer dims must be >= 1, got {self.input_dim}->{self.output_dim}"
            )


def validate_layer_chain(specs: list[LayerSpec]) -> None:
    if not specs:
        raise ConfigError("network needs at least one layer")
    for i in range(len(specs) - 1):
        if specs[i].output_dim != specs[i + 1].input_dim:
            raise ConfigError(
                f"layer {i} output_dim {specs[i].output_dim} does not match "
                f"layer {i + 1} input_dim {specs[i + 1].input_dim}"
            )


def mlp_specs(input_dim: int, hidden: list[int], output_dim: int = 1) -> list[LayerSpec]:
    """ReLU hidden layers plus a linear output layer.

    ``hidden=[]`` yields a plain linear model.
    """
    dims = [input_dim] + list(hidden)
    specs = [
        LayerSpec(dims[i], dims[i + 1], Activation.RELU) for i in range(len(hidden))
    ]
    specs.append(LayerSpec(dims[-1], output_dim, Activation.IDENTITY))
    return specs


DEFAULT_HIDDEN = [256, 256, 256]


@dataclass
class NetworkParameters:
    """Weight matrices and bias vectors, one pair per layer."""

    specs: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "NetworkParameters":
        return NetworkParameters(
            specs=list(self.specs),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


@dataclass
class GradientSet:
    """Loss gradients, shape-identical to the parameters they came from."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by backward()."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray] = field(default_factory=list)
    post_activations: list[np.ndarray] = field(default_factory=list)


def init_network(specs: list[LayerSpec], seed: int) -> NetworkParameters:
    """Glorot-uniform weights (bounds +/- sqrt(6/(fan_in+fan_out))), zero biases.

    The same seed always yields bit-identical parameters.
    """
    validate_layer_chain(specs)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for spec in specs:
        limit = np.sqrt(6.0 / (spec.input_dim + spec.output_dim))
        weights.append(
            rng.uniform(-limit, limit, size=(spec.output_dim, spec.input_dim))
        )
        biases.append(np.zeros(spec.output_dim))
    return NetworkParameters(specs=list(specs), weights=weights, biases=biases)


def count_parameters(params: NetworkParameters) -> int:
    return sum(w.size + b.size for w, b in zip(params.weights, params.biases))


def layer_parameter_counts(params: NetworkParameters) -> list[int]:
    return [w.size + b.size for w, b in zip(params.weights, params.biases)]


def _apply_activation(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def forward(
    params: NetworkParameters, batch: np.ndarray
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a (n, input_dim) batch.

    Returns predictions of shape (n,) and the cache backward() needs.
    The output layer must have a single unit.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise InputError(f"batch must be 2-D (n, input_dim), got shape {x.shape}")
    if x.shape[1] != params.specs[0].input_dim:
        raise InputError(
            f"batch has {x.shape[1]} features, network expects "
            f"{params.specs[0].input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise InputError("batch contains non-finite values")
    if params.specs[-1].output_dim != 1:
        raise InputError("forward() requires a single-unit output layer")

    cache = ForwardCache(inputs=x)
    a = x
    for spec, w, b in zip(params.specs, params.weights, params.biases):
        z = a @ w.T + b
        a = _apply_activation(z, spec.activation)
        cache.pre_activations.append(z)
        cache.post_activations.append(a)
    return a[:, 0], cache


def loss_mse(predictions: np.ndarray, targets: np.ndarray) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise InputError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise InputError("loss needs at least one sample")
    return float(np.mean((p - t) ** 2))


def loss_mae(predictions: np.ndarray, targets: np.ndarray) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise InputError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise InputError("loss needs at least one sample")
    return float(np.mean(np.abs(p - t)))


def backward(
    params: NetworkParameters, cache: ForwardCache, targets: np.ndarray
) -> GradientSet:
    """Exact gradients of the batch MSE with respect to every weight and bias.

    The ReLU subgradient at exactly zero is taken as 0. The cache must come
    from a forward() call on these parameters with the batch the targets
    belong to.
    """
    n_layers = len(params.specs)
    if (
        len(cache.pre_activations) != n_layers
        or len(cache.post_activations) != n_layers
        or cache.inputs.shape[1] != params.specs[0].input_dim
    ):
        raise InternalError("forward cache does not match network parameters")
    for z, w in zip(cache.pre_activations, params.weights):
        if z.shape[1] != w.shape[0]:
            raise InternalError("forward cache does not match network parameters")

    t = np.asarray(targets, dtype=np.float64)
    n = cache.inputs.shape[0]
    if t.shape != (n,):
        raise InputError(f"targets shape {t.shape} does not match batch size {n}")

    predictions = cache.post_activations[-1][:, 0]
    # dJ/dz for the linear output layer, J = mean((pred - t)^2)
    delta = ((2.0 / n) * (predictions - t))[:, None]

    grad_w = [np.empty(0)] * n_layers
    grad_b = [np.empty(0)] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        a_prev = cache.inputs if layer == 0 else cache.post_activations[layer - 1]
        grad_w[layer] = delta.T @ a_prev
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = delta @ params.weights[layer]
            if params.specs[layer - 1].activation is Activation.RELU:
                delta = delta * (cache.pre_activations[layer - 1] > 0.0)
    return GradientSet(weights=grad_w, biases=grad_b)


# --- model persistence ----------------------------------------------------
#
# JSON schema: layer_specs (list of {in, out, activation}), weights (per
# layer, row-major), biases, normalization ({means, stds} or null), seed.
# repr() of a float round-trips exactly, and json uses it, so save/load is
# value-exact at double precision.


def save_model(
    path: str | Path,
    params: NetworkParameters,
    normalization=None,
    seed: int = 0,
) -> None:
    doc = {
        "layer_specs": [
            {"in": s.input_dim, "out": s.output_dim, "activation": s.activation.value}
            for s in params.specs
        ],
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "normalization": None
        if normalization is None
        else {"means": list(normalization.means), "stds": list(normalization.stds)},
        "seed": seed,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | Path):
    """Returns (params, normalization_stats_or_None, seed)."""
    from .data import NormalizationStats  # local import to avoid a cycle

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        specs = [
            LayerSpec(int(s["in"]), int(s["out"]), Activation(s["activation"]))
            for s in doc["layer_specs"]
        ]
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        seed = int(doc["seed"])
        norm_doc = doc["normalization"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelMismatchError(f"malformed model file {path}: {exc}") from exc

    validate_layer_chain(specs)
    for spec, w, b in zip(specs, weights, biases):
        if w.shape != (spec.output_dim, spec.input_dim) or b.shape != (spec.output_dim,):
            raise ModelMismatchError(
                f"model file {path}: stored arrays do not match layer_specs"
            )
    norm = None
    if norm_doc is not None:
        norm = NormalizationStats(
            means=np.asarray(norm_doc["means"], dtype=np.float64),
            stds=np.asarray(norm_doc["stds"], dtype=np.float64),
        )
    return NetworkParameters(specs=specs, weights=weights, biases=biases), norm, seed
