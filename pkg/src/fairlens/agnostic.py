"""Adversarial removal of gender/ethnicity information from face embeddings.

A small two-layer transform is trained against logistic (gender) and softmax
(ethnicity) adversaries. Each transform update minimises

    utility_weight * MAE(f_a, f) + log(1 + |p* - P(male | f_a)|) + log(1 + |p* - P(ref | f_a)|)

while the adversaries are refit on the current transformed embeddings for
``adversary_steps`` Adam steps before every transform step.

Three details make the penalty actually remove information instead of just
shifting it around:

* adversaries are fit with class weights that put their prior at ``p*``, so an
  embedding carrying no information scores exactly ``p*`` and sits at the
  penalty's zero;
* adversaries see batch-centred embeddings, so a constant offset (which holds
  no information) is never rewarded;
* the returned transform is the running average of the iterates over the last
  part of training, which smooths out the chatter of the ``|p* - P|`` kink.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from . import checkpoint
from .datagen import FACE_DIM, MALE, face_directions
from .errors import ConfigError, NumericError
from .numerics import AdamState, DenseLayer, RngStream, adam_step, dense_backward, dense_forward, stream_id_for
from .probes import eval_probe, train_probe


@dataclass
class RemovalConfig:
    adversary_steps: int = 5
    utility_weight: float = 3.0
    target: float = 0.9
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 0.001
    adversary_learning_rate: float = 0.01
    ethnicity_reference: int = 0
    average_from: float = 0.5  # fraction of epochs after which iterates are averaged
    seed: int = 42

    def validate(self):
        if self.adversary_steps < 1:
            raise ConfigError("adversary_steps must be >= 1")
        if not 0.5 < self.target < 1.0:
            raise ConfigError("target must lie in (0.5, 1)")
        if self.epochs < 0 or self.utility_weight < 0:
            raise ConfigError("epochs and utility_weight must be >= 0")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.learning_rate <= 0 or self.adversary_learning_rate <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.ethnicity_reference not in (0, 1, 2):
            raise ConfigError("ethnicity_reference must be a group id in {0, 1, 2}")
        if not 0.0 <= self.average_from <= 1.0:
            raise ConfigError("average_from must lie in [0, 1]")
        return self


@dataclass
class AgnosticTransform:
    layer1: DenseLayer
    layer2: DenseLayer

    @classmethod
    def identity(cls, dim: int = FACE_DIM) -> "AgnosticTransform":
        # relu(f + 1) - 1 == f for unit-norm inputs, so training starts from a
        # perfect reconstruction.
        eye = np.eye(dim)
        return cls(DenseLayer(eye.copy(), np.ones(dim), "relu"),
                   DenseLayer(eye.copy(), -np.ones(dim), "identity"))

    def arrays(self) -> dict:
        return {"w1": self.layer1.weights, "b1": self.layer1.bias,
                "w2": self.layer2.weights, "b2": self.layer2.bias}


@dataclass
class AdversaryProbe:
    gender: DenseLayer
    ethnicity: DenseLayer

    @classmethod
    def fresh(cls, rng: RngStream, dim: int = FACE_DIM) -> "AdversaryProbe":
        return cls(DenseLayer.initialized(dim, 1, "sigmoid", rng.spawn("gender")),
                   DenseLayer.initialized(dim, 3, "identity", rng.spawn("ethnicity")))

    def arrays(self) -> dict:
        return {"gw": self.gender.weights, "gb": self.gender.bias,
                "ew": self.ethnicity.weights, "eb": self.ethnicity.bias}

    def p_male(self, y: np.ndarray) -> np.ndarray:
        return dense_forward(self.gender, y)[:, 0]

    def ethnicity_probs(self, y: np.ndarray) -> np.ndarray:
        return _softmax(dense_forward(self.ethnicity, y))


def _softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def delta_penalty(p, target: float = 0.9):
    """``log(1 + |target - p|)``: zero when the adversary outputs exactly ``target``."""
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("probability must lie in [0, 1]")
    out = np.log1p(np.abs(target - arr))
    return float(out) if out.ndim == 0 else out


def _delta_grad(p: np.ndarray, target: float) -> np.ndarray:
    return -np.sign(target - p) / (1.0 + np.abs(target - p))


def _transform_forward(t: AgnosticTransform, f: np.ndarray) -> dict:
    h = dense_forward(t.layer1, f)
    o = dense_forward(t.layer2, h)
    norm = np.linalg.norm(o, axis=1, keepdims=True)
    if np.any(norm == 0.0):
        raise NumericError("agnostic transform produced a zero vector")
    return {"f": f, "h": h, "o": o, "norm": norm, "y": o / norm}


def _transform_backward(t: AgnosticTransform, cache: dict, g_y: np.ndarray) -> dict:
    y, norm = cache["y"], cache["norm"]
    g_o = (g_y - y * np.sum(y * g_y, axis=1, keepdims=True)) / norm
    g_h, g_w2, g_b2 = dense_backward(t.layer2, cache["h"], cache["o"], g_o)
    _, g_w1, g_b1 = dense_backward(t.layer1, cache["f"], cache["h"], g_h)
    return {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def apply_transform(transform: AgnosticTransform, f) -> np.ndarray:
    """Map one face (or a batch of faces) to unit-norm agnostic embeddings."""
    f = np.asarray(f, dtype=float)
    y = _transform_forward(transform, np.atleast_2d(f))["y"]
    return y[0] if f.ndim == 1 else y


def _centred(y: np.ndarray) -> np.ndarray:
    return y - y.mean(axis=0)


def removal_objective(transform: AgnosticTransform, adversary: AdversaryProbe, f: np.ndarray,
                      config: RemovalConfig) -> tuple:
    """Transform loss and its gradients with the adversary held fixed.

    The adversary reads batch-centred embeddings, so the penalty gradient is
    centred as well before it flows back through the transform.
    """
    cache = _transform_forward(transform, f)
    y = cache["y"]
    n, d = y.shape
    diff = y - f
    loss = config.utility_weight * float(np.mean(np.abs(diff)))
    g_util = config.utility_weight * np.sign(diff) / (n * d)

    yc = _centred(y)
    p = adversary.p_male(yc)
    loss += float(np.mean(delta_penalty(np.clip(p, 0.0, 1.0), config.target)))
    g_logit = (_delta_grad(p, config.target) * p * (1.0 - p) / n)[:, None]
    g_adv = g_logit @ adversary.gender.weights

    q = adversary.ethnicity_probs(yc)
    ref = config.ethnicity_reference
    q_ref = q[:, ref]
    loss += float(np.mean(delta_penalty(np.clip(q_ref, 0.0, 1.0), config.target)))
    # d q_ref / d logits = q_ref * (onehot(ref) - q)
    jac = -q * q_ref[:, None]
    jac[:, ref] += q_ref
    g_e = (_delta_grad(q_ref, config.target) / n)[:, None] * jac
    g_adv += g_e @ adversary.ethnicity.weights
    g_y = g_util + _centred(g_adv)
    return loss, _transform_backward(transform, cache, g_y)


def _prior_weights(labels: np.ndarray, n_classes: int, favoured: int, target: float) -> np.ndarray:
    """Per-sample weights that make the weighted class prior ``target`` for ``favoured``."""
    share = np.bincount(labels, minlength=n_classes) / len(labels)
    prior = np.full(n_classes, (1.0 - target) / (n_classes - 1))
    prior[favoured] = target
    ratio = np.divide(prior, share, out=np.zeros(n_classes), where=share > 0)
    return ratio[labels]


def _adversary_grads(adversary: AdversaryProbe, y: np.ndarray, gender: np.ndarray, ethnicity: np.ndarray,
                     config: RemovalConfig) -> dict:
    """Prior-weighted cross-entropy gradients for both adversary heads."""
    n = len(y)
    male = (gender == MALE).astype(float)
    w_g = _prior_weights(gender, 2, MALE, config.target)
    p = expit(y @ adversary.gender.weights.T + adversary.gender.bias)[:, 0]
    g_gl = (w_g * (p - male) / n)[:, None]
    w_e = _prior_weights(ethnicity, 3, config.ethnicity_reference, config.target)
    q = adversary.ethnicity_probs(y)
    q[np.arange(n), ethnicity] -= 1.0
    g_el = q * (w_e / n)[:, None]
    return {"gw": g_gl.T @ y, "gb": g_gl.sum(axis=0), "ew": g_el.T @ y, "eb": g_el.sum(axis=0)}


def train_agnostic_transform(faces, gender, ethnicity, config: RemovalConfig | None = None,
                             history: list | None = None) -> AgnosticTransform:
    """Alternate adversary fitting and transform updates over shuffled minibatches."""
    config = (config or RemovalConfig()).validate()
    f_all = np.asarray(faces, dtype=float)
    gender = np.asarray(gender, dtype=int)
    ethnicity = np.asarray(ethnicity, dtype=int)
    if len(np.unique(gender)) < 2:
        raise ValueError("gender labels contain a single class")
    rng = RngStream(config.seed, stream_id_for("agnostic"))
    transform = AgnosticTransform.identity(f_all.shape[1])
    adversary = AdversaryProbe.fresh(rng.spawn("adversary"), f_all.shape[1])
    t_arrays, a_arrays = transform.arrays(), adversary.arrays()
    t_state = AdamState.for_params(t_arrays, alpha=config.learning_rate)
    a_state = AdamState.for_params(a_arrays, alpha=config.adversary_learning_rate)
    average = {k: np.zeros_like(v) for k, v in t_arrays.items()}
    n_averaged = 0
    first_averaged = int(np.floor(config.average_from * config.epochs))

    n = len(f_all)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:
                continue
            f = f_all[idx]
            y = _centred(apply_transform(transform, f))
            for _ in range(config.adversary_steps):
                adam_step(a_arrays, _adversary_grads(adversary, y, gender[idx], ethnicity[idx], config), a_state)
            loss, grads = removal_objective(transform, adversary, f, config)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite removal loss in epoch {epoch}")
            adam_step(t_arrays, grads, t_state)
            if epoch >= first_averaged:
                n_averaged += 1
                for k in average:
                    average[k] += (t_arrays[k] - average[k]) / n_averaged
            total += loss * len(idx)
        if history is not None:
            history.append(total / n)
    if n_averaged:
        for k in t_arrays:
            t_arrays[k][...] = average[k]
    return transform


# --- audit ----------------------------------------------------------------


def demographic_basis() -> np.ndarray:
    u, ethnic = face_directions()
    return np.vstack([u, ethnic])


def orthogonal_part(f: np.ndarray) -> np.ndarray:
    """Coordinates of ``f`` in the complement of the injected demographic directions."""
    basis = demographic_basis()
    q, _ = np.linalg.qr(np.vstack([basis, np.eye(FACE_DIM)]).T)
    complement = q[:, basis.shape[0]:]
    return np.asarray(f) @ complement


def oracle_projection(f: np.ndarray) -> np.ndarray:
    """Ideal removal using the known directions: project them out and renormalise."""
    basis = demographic_basis()
    g = f - (f @ basis.T) @ basis
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def removal_audit(transform: AgnosticTransform, train_faces, train_gender, train_ethnicity,
                  val_faces, val_gender, val_ethnicity, seed: int = 0, probe_epochs: int = 50) -> dict:
    """Fresh (never co-trained) logistic probes before and after the transform, plus utility checks."""
    train_faces, val_faces = np.asarray(train_faces), np.asarray(val_faces)
    tr_a, va_a = apply_transform(transform, train_faces), apply_transform(transform, val_faces)
    out = {}
    for name, (y_tr, y_va) in {"gender": (train_gender, val_gender),
                               "ethnicity": (train_ethnicity, val_ethnicity)}.items():
        raw = train_probe(train_faces, y_tr, "logistic", seed=seed, epochs=probe_epochs)
        new = train_probe(tr_a, y_tr, "logistic", seed=seed, epochs=probe_epochs)
        out[f"{name}_probe_raw"] = eval_probe(raw, val_faces, y_va)
        out[f"{name}_probe_agnostic"] = eval_probe(new, va_a, y_va)
    perp_f, perp_a = orthogonal_part(val_faces), orthogonal_part(va_a)
    perp_oracle = orthogonal_part(oracle_projection(val_faces))
    out["orthogonal_correlation"] = float(np.corrcoef(perp_f.ravel(), perp_a.ravel())[0, 1])
    out["orthogonal_mae"] = float(np.mean(np.abs(perp_a - perp_f)))
    out["orthogonal_mae_oracle"] = float(np.mean(np.abs(perp_oracle - perp_f)))
    out["reconstruction_mae"] = float(np.mean(np.abs(va_a - val_faces)))
    return out


def save_transform(transform: AgnosticTransform, path, meta: dict | None = None) -> str:
    return checkpoint.save(path, "agnostic-transform", transform.arrays(), dict(meta or {}))


def load_transform(path) -> tuple:
    t, meta = checkpoint.load(path, kind="agnostic-transform")
    return AgnosticTransform(DenseLayer(t["w1"], t["b1"], "relu"), DenseLayer(t["w2"], t["b2"], "identity")), meta


def removal_config_dict(config: RemovalConfig) -> dict:
    return asdict(config)
