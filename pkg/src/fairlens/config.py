"""Run configuration: one flat set of keys covering every pipeline stage.

Config files are plain ``key = value`` lines; ``#`` starts a comment. Values
are converted to the type of the matching field, and unknown keys or
unparseable values raise :class:`ConfigError` naming the key.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .agnostic import RemovalConfig
from .datagen import GenConfig
from .errors import ConfigError
from .model import TrainConfig
from .scoring import DEFAULT_ALPHA, BiasSpec, ScoreWeights, default_gender_spec


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    # data generation
    n_profiles: int = 24000
    face_gender_leakage: float = 1.25
    face_ethnicity_leakage: float = 1.5
    face_noise: float = 1.0
    competency_ethnicity_proxy: float = 0.5
    train_fraction: float = 0.8
    # target scores
    alpha: tuple = DEFAULT_ALPHA
    alpha_s: float = 0.3
    beta_sigma: float = 0.01
    gender_penalty: float = 0.2
    ethnicity_penalty: float = 0.2
    penalized_ethnicity: int = 2
    boosted_ethnicity: int = 0
    # scoring network
    epochs: int = 16
    batch_size: int = 128
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    # sensitive-information removal
    removal_adversary_steps: int = 5
    removal_utility_weight: float = 3.0
    removal_target: float = 0.9
    removal_epochs: int = 20
    removal_learning_rate: float = 0.001
    removal_adversary_learning_rate: float = 0.01
    removal_ethnicity_reference: int = 0
    removal_average_from: float = 0.5
    # audit
    probe_epochs: int = 200
    k: int = 1000
    out: str = "fairlens-out"

    def gen_config(self) -> GenConfig:
        return GenConfig(
            n_profiles=self.n_profiles,
            seed=self.seed,
            face_gender_leakage=self.face_gender_leakage,
            face_ethnicity_leakage=self.face_ethnicity_leakage,
            face_noise=self.face_noise,
            competency_ethnicity_proxy=self.competency_ethnicity_proxy,
            train_fraction=self.train_fraction,
        )

    def score_weights(self) -> ScoreWeights:
        return ScoreWeights(tuple(self.alpha), self.alpha_s, self.beta_sigma)

    def bias_specs(self) -> tuple:
        boosted = None if self.boosted_ethnicity < 0 else self.boosted_ethnicity
        return (default_gender_spec(self.gender_penalty),
                BiasSpec("ethnicity", self.ethnicity_penalty, self.penalized_ethnicity, boosted))

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.beta1, self.beta2,
                           self.adam_eps, self.seed)

    def removal_config(self) -> RemovalConfig:
        return RemovalConfig(
            adversary_steps=self.removal_adversary_steps,
            utility_weight=self.removal_utility_weight,
            target=self.removal_target,
            epochs=self.removal_epochs,
            batch_size=self.batch_size,
            learning_rate=self.removal_learning_rate,
            adversary_learning_rate=self.removal_adversary_learning_rate,
            ethnicity_reference=self.removal_ethnicity_reference,
            average_from=self.removal_average_from,
            seed=self.seed,
        )

    def validate(self) -> "RunConfig":
        self.gen_config().validate()
        self.score_weights().validate()
        if self.penalized_ethnicity not in (0, 1, 2) or self.boosted_ethnicity not in (-1, 0, 1, 2):
            raise ConfigError("penalized_ethnicity must be 0-2; boosted_ethnicity 0-2 or -1 for none")
        for spec in self.bias_specs():
            spec.validate()
        self.train_config().validate()
        self.removal_config().validate()
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        n_val = self.n_profiles - int(round(self.train_fraction * self.n_profiles))
        if self.k > n_val:
            raise ConfigError(f"k={self.k} exceeds the validation pool of {n_val} profiles")
        if self.probe_epochs < 1:
            raise ConfigError("probe_epochs must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["alpha"] = list(self.alpha)
        return d

    def provenance(self) -> dict:
        """Config as recorded inside artifacts: everything except the output location,
        so identical runs in different directories produce identical files."""
        d = self.to_dict()
        del d["out"]
        return d

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw):
    kind = FIELD_TYPES[key]
    try:
        if kind == "tuple":
            if isinstance(raw, str):
                raw = [v for v in raw.replace(",", " ").split() if v]
            return tuple(float(v) for v in raw)
        if kind == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if kind == "float":
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot interpret {raw!r} as {kind}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a dict of typed overrides."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = _convert(key, value)
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``; validated."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        values.update(parse_config_text(text, str(path)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(key, value)
    return RunConfig(**values).validate()


def format_config(config: RunConfig, include_out: bool = True) -> str:
    """Inverse of :func:`parse_config_text` (round-trips every field)."""
    lines = []
    for key, value in (config.to_dict() if include_out else config.provenance()).items():
        if isinstance(value, list):
            value = ", ".join(repr(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
