"""Three-branch scoring network (face, bio text, competencies) with a fusion MLP.

Text branch: learned 16-d token embeddings, mean pooled, projected to 32 units
with tanh. The fused 59-d input (20 face + 32 text + 7 competencies) feeds
dense layers of 40 and 20 relu units and a single sigmoid output. Training
minimises mean absolute error with minibatch Adam.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import checkpoint
from .datagen import FACE_DIM, Dataset, Profile
from .errors import ConfigError, DataError, ShapeError, StateError
from .numerics import AdamState, DenseLayer, RngStream, adam_step, dense_backward, dense_forward, mae_grad, stream_id_for

UNK = "<unk>"
EMBED_DIM = 16
TEXT_DIM = 32
N_COMPETENCIES = 7
FUSION_IN = FACE_DIM + TEXT_DIM + N_COMPETENCIES
HIDDEN = (40, 20)

SCENARIO_KINDS = ("neutral", "biased", "agnostic")
BIAS_ATTRIBUTES = ("gender", "ethnicity")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    bias_attribute: str = "gender"

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigError(f"scenario must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if self.bias_attribute not in BIAS_ATTRIBUTES:
            raise ConfigError(f"bias attribute must be one of {BIAS_ATTRIBUTES}, got {self.bias_attribute!r}")
        if self.kind == "neutral" and self.bias_attribute != "gender":
            # the attribute is meaningless for neutral; normalise it so names are canonical
            object.__setattr__(self, "bias_attribute", "gender")

    @property
    def name(self) -> str:
        return "neutral" if self.kind == "neutral" else f"{self.kind}-{self.bias_attribute}"

    @classmethod
    def parse(cls, name: str) -> "ScenarioSpec":
        kind, _, attr = name.partition("-")
        return cls(kind, attr or "gender")

    @property
    def target_key(self) -> str:
        if self.kind == "neutral":
            return "score_u"
        return "score_g" if self.bias_attribute == "gender" else "score_e"

    @property
    def agnostic_inputs(self) -> bool:
        return self.kind == "agnostic"


@dataclass
class TrainConfig:
    epochs: int = 16
    batch_size: int = 128
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 42

    def validate(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        return self


@dataclass
class TextEncoderParams:
    tokens: list
    embed: np.ndarray
    proj: DenseLayer
    vocab: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.vocab = {t: i for i, t in enumerate(self.tokens)}


@dataclass
class ModelParams:
    text: TextEncoderParams
    fusion_h1: DenseLayer
    fusion_h2: DenseLayer
    out: DenseLayer
    scenario: ScenarioSpec
    trained_epochs: int = 0

    def arrays(self) -> dict:
        """Live references to every trainable array, keyed by name."""
        return {
            "embed": self.text.embed,
            "proj_w": self.text.proj.weights,
            "proj_b": self.text.proj.bias,
            "h1_w": self.fusion_h1.weights,
            "h1_b": self.fusion_h1.bias,
            "h2_w": self.fusion_h2.weights,
            "h2_b": self.fusion_h2.bias,
            "out_w": self.out.weights,
            "out_b": self.out.bias,
        }

    def copy(self) -> "ModelParams":
        return from_tensors({k: v.copy() for k, v in self.arrays().items()}, list(self.text.tokens),
                            self.scenario, self.trained_epochs)


def from_tensors(t: dict, tokens: list, scenario: ScenarioSpec, trained_epochs: int = 0) -> ModelParams:
    text = TextEncoderParams(tokens, t["embed"], DenseLayer(t["proj_w"], t["proj_b"], "tanh"))
    return ModelParams(
        text,
        DenseLayer(t["h1_w"], t["h1_b"], "relu"),
        DenseLayer(t["h2_w"], t["h2_b"], "relu"),
        DenseLayer(t["out_w"], t["out_b"], "sigmoid"),
        scenario,
        trained_epochs,
    )


# --- inputs ---------------------------------------------------------------


def _bio_of(profile: Profile, scenario: ScenarioSpec) -> list:
    return profile.blind_bio if scenario.agnostic_inputs else profile.bio


def _face_of(profile: Profile, scenario: ScenarioSpec) -> np.ndarray:
    if scenario.agnostic_inputs:
        if profile.agnostic_face is None:
            raise DataError(f"profile {profile.id} has no agnostic face; run the debias step first")
        return profile.agnostic_face
    return profile.face


def build_vocab(token_lists) -> list:
    return [UNK] + sorted({t for toks in token_lists for t in toks if t != UNK})


def bag_of_tokens(text: TextEncoderParams, token_lists) -> sp.csr_matrix:
    """Row-normalised token counts, so ``bag @ embed`` is the mean token embedding."""
    rows, cols, vals = [], [], []
    for r, toks in enumerate(token_lists):
        idx = [text.vocab.get(t, 0) for t in toks] or [0]
        w = 1.0 / len(idx)
        rows.extend([r] * len(idx))
        cols.extend(idx)
        vals.extend([w] * len(idx))
    shape = (len(token_lists), len(text.tokens))
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


@dataclass
class Batch:
    ids: np.ndarray
    faces: np.ndarray
    bag: sp.csr_matrix
    competencies: np.ndarray
    targets: np.ndarray | None

    def __len__(self):
        return len(self.ids)

    def take(self, rows) -> "Batch":
        t = None if self.targets is None else self.targets[rows]
        return Batch(self.ids[rows], self.faces[rows], self.bag[rows], self.competencies[rows], t)


def prepare_inputs(params: ModelParams, dataset: Dataset, ids, scenario: ScenarioSpec | None = None,
                   with_targets: bool = True) -> Batch:
    scenario = scenario or params.scenario
    profiles = dataset.subset(ids)
    faces = np.array([_face_of(p, scenario) for p in profiles], dtype=float).reshape(-1, FACE_DIM)
    comps = np.array([p.competencies for p in profiles], dtype=float).reshape(-1, N_COMPETENCIES)
    bag = bag_of_tokens(params.text, [_bio_of(p, scenario) for p in profiles])
    targets = None
    if with_targets:
        vals = [getattr(p, scenario.target_key) for p in profiles]
        if any(v is None for v in vals):
            raise DataError("dataset is not scored; run the scoring step first")
        targets = np.array(vals, dtype=float)
    return Batch(np.asarray(list(ids), dtype=int), faces, bag, comps, targets)


# --- construction ---------------------------------------------------------


def build_model(dataset: Dataset, scenario: ScenarioSpec, seed: int = 42) -> ModelParams:
    """Fresh parameters; vocabulary comes from the training split only.

    Token embeddings start at zero so tokens the target never rewards stay
    near the origin; dense layers use He (relu) or Glorot (tanh/sigmoid) init.
    """
    tokens = build_vocab(_bio_of(p, scenario) for p in dataset.subset(dataset.train_ids))
    if len(tokens) <= 1:
        raise DataError("training split has no bio tokens to build a vocabulary from")
    rng = RngStream(seed, stream_id_for("model-init"))
    text = TextEncoderParams(
        tokens,
        np.zeros((len(tokens), EMBED_DIM)),
        DenseLayer.initialized(EMBED_DIM, TEXT_DIM, "tanh", rng.spawn("proj")),
    )
    return ModelParams(
        text,
        DenseLayer.initialized(FUSION_IN, HIDDEN[0], "relu", rng.spawn("h1")),
        DenseLayer.initialized(HIDDEN[0], HIDDEN[1], "relu", rng.spawn("h2")),
        DenseLayer.initialized(HIDDEN[1], 1, "sigmoid", rng.spawn("out")),
        scenario,
    )


# --- forward / backward ---------------------------------------------------


def encode_text(params: ModelParams, tokens) -> np.ndarray:
    """32-d text representation; order-invariant, unknown tokens use the ``<unk>`` row."""
    bag = bag_of_tokens(params.text, [list(tokens)])
    return dense_forward(params.text.proj, np.asarray(bag @ params.text.embed))[0]


def _forward_batch(params: ModelParams, batch: Batch) -> dict:
    mean = np.asarray(batch.bag @ params.text.embed)
    text = dense_forward(params.text.proj, mean)
    x = np.hstack([batch.faces, text, batch.competencies])
    h1 = dense_forward(params.fusion_h1, x)
    h2 = dense_forward(params.fusion_h2, h1)
    out = dense_forward(params.out, h2)
    return {"mean": mean, "text": text, "x": x, "h1": h1, "h2": h2, "out": out}


def _backward_batch(params: ModelParams, batch: Batch, cache: dict, grad_out: np.ndarray) -> dict:
    g_h2, g_out_w, g_out_b = dense_backward(params.out, cache["h2"], cache["out"], grad_out)
    g_h1, g_h2_w, g_h2_b = dense_backward(params.fusion_h2, cache["h1"], cache["h2"], g_h2)
    g_x, g_h1_w, g_h1_b = dense_backward(params.fusion_h1, cache["x"], cache["h1"], g_h1)
    g_text = g_x[:, FACE_DIM:FACE_DIM + TEXT_DIM]
    g_mean, g_proj_w, g_proj_b = dense_backward(params.text.proj, cache["mean"], cache["text"], g_text)
    g_embed = np.asarray(batch.bag.T @ g_mean)
    return {
        "embed": g_embed,
        "proj_w": g_proj_w,
        "proj_b": g_proj_b,
        "h1_w": g_h1_w,
        "h1_b": g_h1_b,
        "h2_w": g_h2_w,
        "h2_b": g_h2_b,
        "out_w": g_out_w,
        "out_b": g_out_b,
    }


def loss_and_grads(params: ModelParams, batch: Batch) -> tuple:
    """Batch MAE and its gradient w.r.t. every array in ``params.arrays()``."""
    cache = _forward_batch(params, batch)
    pred = cache["out"][:, 0]
    loss = float(np.mean(np.abs(pred - batch.targets)))
    grad_out = mae_grad(pred, batch.targets)[:, None]
    return loss, _backward_batch(params, batch, cache, grad_out)


def forward(params: ModelParams, face, tokens, competencies) -> float:
    face = np.asarray(face, dtype=float)
    competencies = np.asarray(competencies, dtype=float)
    if face.shape != (FACE_DIM,) or competencies.shape != (N_COMPETENCIES,):
        raise ShapeError("forward expects a 20-d face and 7 competencies")
    batch = Batch(np.zeros(1, dtype=int), face[None, :], bag_of_tokens(params.text, [list(tokens)]),
                  competencies[None, :], None)
    return float(_forward_batch(params, batch)["out"][0, 0])


# --- training / inference -------------------------------------------------


def train(dataset: Dataset, scenario: ScenarioSpec, config: TrainConfig | None = None,
          params: ModelParams | None = None) -> tuple:
    """Minibatch Adam on MAE; returns ``(params, per-epoch mean training MAE)``."""
    config = (config or TrainConfig()).validate()
    params = params if params is not None else build_model(dataset, scenario, config.seed)
    data = prepare_inputs(params, dataset, dataset.train_ids, scenario)
    arrays = params.arrays()
    state = AdamState.for_params(arrays, alpha=config.learning_rate, beta1=config.beta1,
                                 beta2=config.beta2, eps=config.adam_eps)
    shuffle = RngStream(config.seed, stream_id_for("train-shuffle"))
    history = []
    n = len(data)
    for _ in range(config.epochs):
        order = shuffle.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = data.take(order[start:start + config.batch_size])
            loss, grads = loss_and_grads(params, batch)
            adam_step(arrays, grads, state)
            total += loss * len(batch)
        history.append(total / n)
        params.trained_epochs += 1
    return params, history


def predict_batch(params: ModelParams, batch: Batch) -> np.ndarray:
    return _forward_batch(params, batch)["out"][:, 0]


def predict_split(params: ModelParams, dataset: Dataset, split: str, scenario: ScenarioSpec | None = None) -> dict:
    ids = dataset.split_ids(split)
    batch = prepare_inputs(params, dataset, ids, scenario, with_targets=False)
    return {int(i): float(s) for i, s in zip(batch.ids, predict_batch(params, batch))}


def extract_embeddings(params: ModelParams, dataset: Dataset, ids, scenario: ScenarioSpec | None = None) -> np.ndarray:
    """Post-relu activations of the first fusion layer, one 40-d row per id."""
    batch = prepare_inputs(params, dataset, ids, scenario, with_targets=False)
    return _forward_batch(params, batch)["h1"]


def extract_embedding(params: ModelParams, profile: Profile, scenario: ScenarioSpec | None = None) -> np.ndarray:
    scenario = scenario or params.scenario
    batch = Batch(np.array([profile.id]), _face_of(profile, scenario)[None, :],
                  bag_of_tokens(params.text, [_bio_of(profile, scenario)]),
                  np.asarray(profile.competencies, dtype=float)[None, :], None)
    return _forward_batch(params, batch)["h1"][0]


def require_trained(params: ModelParams):
    if params.trained_epochs <= 0:
        raise StateError("model has not been trained")


# --- persistence ----------------------------------------------------------


def save_model(params: ModelParams, path, meta: dict | None = None) -> str:
    doc_meta = {
        "scenario": {"kind": params.scenario.kind, "bias_attribute": params.scenario.bias_attribute},
        "vocab": list(params.text.tokens),
        "trained_epochs": params.trained_epochs,
    }
    doc_meta.update(meta or {})
    return checkpoint.save(path, "model", params.arrays(), doc_meta)


def load_model(path) -> tuple:
    tensors, meta = checkpoint.load(path, kind="model")
    scenario = ScenarioSpec(**meta["scenario"])
    return from_tensors(tensors, meta["vocab"], scenario, meta["trained_epochs"]), meta


def train_config_dict(config: TrainConfig) -> dict:
    return asdict(config)
