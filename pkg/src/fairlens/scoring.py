"""Target scores: the blind linear score and its gender/ethnicity-penalised variants."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .datagen import COMPETENCY_DOMAINS, FEMALE, SECTOR_SUITABILITY, Dataset, Demographics
from .errors import ConfigError
from .numerics import RngStream, stream_id_for

log = logging.getLogger(__name__)

DEFAULT_ALPHA = (0.2, 0.05, 0.05, 0.25, 0.05, 0.05, 0.05)


@dataclass(frozen=True)
class ScoreWeights:
    alpha: tuple = DEFAULT_ALPHA
    alpha_s: float = 0.3
    beta_sigma: float = 0.01

    def validate(self):
        if len(self.alpha) != len(COMPETENCY_DOMAINS):
            raise ConfigError(f"alpha needs {len(COMPETENCY_DOMAINS)} entries")
        if min(self.alpha) < 0 or self.alpha_s < 0 or self.beta_sigma < 0:
            raise ConfigError("score weights and beta_sigma must be non-negative")
        top = sum(a * max(dom) for a, dom in zip(self.alpha, COMPETENCY_DOMAINS))
        top += self.alpha_s * max(SECTOR_SUITABILITY)
        if top > 1.0 + 1e-12:
            raise ConfigError(f"weights allow a noiseless score of {top:.4f} > 1")
        return self


@dataclass(frozen=True)
class BiasSpec:
    attribute: str
    penalty: float = 0.2
    penalized_group: int = FEMALE
    boosted_group: int | None = None

    def validate(self):
        if self.attribute not in ("gender", "ethnicity"):
            raise ConfigError(f"bias attribute must be gender or ethnicity, got {self.attribute!r}")
        if not 0.0 <= self.penalty <= 0.5:
            raise ConfigError("penalty must lie in [0, 0.5]")
        if self.boosted_group is not None:
            if self.attribute == "gender":
                raise ConfigError("a boosted group is only defined for ethnicity bias")
            if self.boosted_group == self.penalized_group:
                raise ConfigError("penalized and boosted groups must differ")
        return self


def default_gender_spec(penalty: float = 0.2) -> BiasSpec:
    return BiasSpec("gender", penalty, FEMALE, None)


def default_ethnicity_spec(penalty: float = 0.2) -> BiasSpec:
    return BiasSpec("ethnicity", penalty, 2, 0)


@dataclass(frozen=True)
class TargetScores:
    t_u: float
    t_g: float
    t_e: float


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def unbiased_score(competencies, suitability: float, weights: ScoreWeights, rng: RngStream | None = None,
                   noise: float | None = None) -> float:
    """Noisy linear score of competencies and sector suitability, clamped to [0, 1].

    Pass ``noise`` to reuse an already drawn Gaussian term instead of drawing
    one from ``rng``.
    """
    if noise is None:
        noise = float(rng.normal(0.0, weights.beta_sigma)) if rng is not None else 0.0
    lin = float(np.dot(weights.alpha, competencies)) + weights.alpha_s * suitability
    return _clamp01(noise + lin)


def apply_bias(t_u: float, demographics: Demographics, spec: BiasSpec) -> float:
    group = demographics.gender if spec.attribute == "gender" else demographics.ethnicity
    if group == spec.penalized_group:
        return _clamp01(t_u - spec.penalty)
    if spec.boosted_group is not None and group == spec.boosted_group:
        return _clamp01(t_u + spec.penalty)
    return t_u


def score_dataset(dataset: Dataset, weights: ScoreWeights | None = None,
                  gender_spec: BiasSpec | None = None, ethnicity_spec: BiasSpec | None = None,
                  seed: int | None = None) -> Dataset:
    """Fill ``score_u``, ``score_g`` and ``score_e`` on every profile in place.

    The Gaussian term is drawn once per profile (from a stream keyed by the
    profile id) and shared by all three scores.
    """
    weights = (weights or ScoreWeights()).validate()
    gender_spec = (gender_spec or default_gender_spec()).validate()
    ethnicity_spec = (ethnicity_spec or default_ethnicity_spec()).validate()
    if gender_spec.attribute != "gender" or ethnicity_spec.attribute != "ethnicity":
        raise ConfigError("gender_spec/ethnicity_spec attributes are swapped")
    seed = dataset.config.seed if seed is None else seed
    if any(p.score_u is not None for p in dataset.profiles):
        log.warning("dataset already scored; overwriting target scores")
    base = stream_id_for("scores")
    for p in dataset.profiles:
        noise = float(RngStream(seed, base + p.id).normal(0.0, weights.beta_sigma))
        t_u = unbiased_score(p.competencies, p.suitability, weights, noise=noise)
        p.score_u = t_u
        p.score_g = apply_bias(t_u, p.demographics, gender_spec)
        p.score_e = apply_bias(t_u, p.demographics, ethnicity_spec)
    return dataset
