"""Leakage probes: how much gender/ethnicity can be read off the fused embeddings."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError
from .numerics import AdamState, DenseLayer, RngStream, adam_step, dense_backward, dense_forward, stream_id_for

PROBE_KINDS = ("logistic", "linear_svm", "mlp")
MLP_HIDDEN = 16


class DegenerateDataError(DataError):
    pass


@dataclass
class Probe:
    kind: str
    n_classes: int
    mean: np.ndarray
    scale: np.ndarray
    layers: list

    def scores(self, x: np.ndarray) -> np.ndarray:
        h = (np.asarray(x, dtype=float) - self.mean) / self.scale
        for layer in self.layers:
            h = dense_forward(layer, h)
        return h

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(x), axis=1)


@dataclass
class ProbeResult:
    kind: str
    attribute: str
    train_accuracy: float
    val_accuracy: float
    chance_level: float

    def to_dict(self) -> dict:
        return asdict(self)


def _softmax(s: np.ndarray) -> np.ndarray:
    z = s - s.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_grad(kind: str, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the batch-mean loss w.r.t. the class scores."""
    n = len(y)
    rows = np.arange(n)
    if kind == "linear_svm":
        # Crammer-Singer multiclass hinge: max(0, 1 + max_{j != y} s_j - s_y)
        masked = s.copy()
        masked[rows, y] = -np.inf
        rival = np.argmax(masked, axis=1)
        active = (1.0 + s[rows, rival] - s[rows, y]) > 0
        g = np.zeros_like(s)
        g[rows[active], rival[active]] += 1.0
        g[rows[active], y[active]] -= 1.0
        return g / n
    g = _softmax(s)
    g[rows, y] -= 1.0
    return g / n


def train_probe(embeddings, labels, kind: str = "logistic", seed: int = 0, epochs: int = 200,
                batch_size: int = 128, learning_rate: float = 0.001) -> Probe:
    """Fit a probe with minibatch Adam on standardised features for a fixed number of epochs."""
    if kind not in PROBE_KINDS:
        raise ValueError(f"probe kind must be one of {PROBE_KINDS}, got {kind!r}")
    x = np.asarray(embeddings, dtype=float)
    y = np.asarray(labels, dtype=int)
    if len(np.unique(y)) < 2:
        raise DegenerateDataError("probe labels contain a single class")
    n_classes = int(y.max()) + 1
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    xs = (x - mean) / scale

    rng = RngStream(seed, stream_id_for(f"probe-{kind}"))
    d = x.shape[1]
    if kind == "mlp":
        layers = [
            DenseLayer.initialized(d, MLP_HIDDEN, "relu", rng.spawn("hidden")),
            DenseLayer.initialized(MLP_HIDDEN, n_classes, "identity", rng.spawn("out")),
        ]
    else:
        layers = [DenseLayer(np.zeros((n_classes, d)), np.zeros(n_classes), "identity")]
    arrays = {}
    for j, layer in enumerate(layers):
        arrays[f"w{j}"] = layer.weights
        arrays[f"b{j}"] = layer.bias
    state = AdamState.for_params(arrays, alpha=learning_rate)

    n = len(y)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            acts = [xs[idx]]
            for layer in layers:
                acts.append(dense_forward(layer, acts[-1]))
            g = _loss_grad(kind, acts[-1], y[idx])
            grads = {}
            for j in range(len(layers) - 1, -1, -1):
                g, grads[f"w{j}"], grads[f"b{j}"] = dense_backward(layers[j], acts[j], acts[j + 1], g)
            adam_step(arrays, grads, state)
    return Probe(kind, n_classes, mean, scale, layers)


def eval_probe(probe: Probe, embeddings, labels) -> float:
    labels = np.asarray(labels, dtype=int)
    if len(labels) == 0:
        return 0.0
    return float(np.mean(probe.predict(embeddings) == labels))


def leakage_audit(model_params, dataset, scenario=None, seed: int = 0, kinds=PROBE_KINDS,
                  epochs: int = 200) -> list:
    """Train every probe kind on train-split embeddings, score it on the validation split."""
    from .model import extract_embeddings, require_trained

    require_trained(model_params)
    scenario = scenario or model_params.scenario
    x_tr = extract_embeddings(model_params, dataset, dataset.train_ids, scenario)
    x_va = extract_embeddings(model_params, dataset, dataset.val_ids, scenario)
    results = []
    for attribute in ("gender", "ethnicity"):
        getter = dataset.genders if attribute == "gender" else dataset.ethnicities
        y_tr, y_va = getter(dataset.train_ids), getter(dataset.val_ids)
        chance = 0.5 if attribute == "gender" else 1.0 / 3.0
        for kind in kinds:
            probe = train_probe(x_tr, y_tr, kind, seed=seed ^ stream_id_for(attribute), epochs=epochs)
            results.append(ProbeResult(kind, attribute, eval_probe(probe, x_tr, y_tr),
                                       eval_probe(probe, x_va, y_va), chance))
    return results
