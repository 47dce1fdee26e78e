"""Outcome audit: score-distribution KL divergence, top-k screening, p% and the 4/5 rule."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeError

N_BINS = 50
SMOOTHING = 1e-6
FOUR_FIFTHS = 80.0


class UndefinedRateError(ValueError):
    """Both groups have a zero selection rate, so their ratio is undefined."""


@dataclass
class ScoreHistogram:
    counts: np.ndarray
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @classmethod
    def from_scores(cls, scores, n_bins: int = N_BINS, lo: float = 0.0, hi: float = 1.0) -> "ScoreHistogram":
        counts, _ = np.histogram(np.asarray(scores, dtype=float), bins=n_bins, range=(lo, hi))
        return cls(counts, lo, hi)

    def probabilities(self, eps: float = SMOOTHING) -> np.ndarray:
        p = self.counts / self.total + eps
        return p / p.sum()


def kl_divergence(p: ScoreHistogram, q: ScoreHistogram, eps: float = SMOOTHING) -> float:
    """KL(P || Q) in nats between two smoothed histograms with identical binning."""
    if p.n_bins != q.n_bins or (p.lo, p.hi) != (q.lo, q.hi):
        raise ValueError("histograms must share the same binning")
    if p.total < 1 or q.total < 1:
        raise ValueError("histograms must hold at least one sample")
    pp, qq = p.probabilities(eps), q.probabilities(eps)
    return float(max(0.0, np.sum(pp * np.log(pp / qq))))


def ethnicity_kl(hists) -> tuple:
    """Pairwise KL for groups (0||1, 0||2, 1||2) and their mean."""
    if len(hists) != 3:
        raise ValueError("expected three group histograms")
    pairs = (
        kl_divergence(hists[0], hists[1]),
        kl_divergence(hists[0], hists[2]),
        kl_divergence(hists[1], hists[2]),
    )
    return pairs, float(np.mean(pairs))


@dataclass
class TopKSelection:
    k: int
    selected_ids: list
    group_counts: dict = field(default_factory=dict)


def select_top_k(scores: dict, k: int, groups: dict | None = None) -> TopKSelection:
    """Highest ``k`` scores, ties broken by ascending id; optionally tally ``groups[id]``."""
    if k > len(scores) or k < 0:
        raise ValueError(f"k={k} exceeds the pool of {len(scores)} candidates")
    ranked = sorted(scores, key=lambda i: (-scores[i], i))
    chosen = ranked[:k]
    counts = {}
    if groups is not None:
        for i in chosen:
            counts[groups[i]] = counts.get(groups[i], 0) + 1
    return TopKSelection(k, chosen, counts)


def p_percent_from_rates(rate_a: float, rate_b: float) -> float:
    if rate_a <= 0 and rate_b <= 0:
        raise UndefinedRateError("both selection rates are zero")
    if rate_a <= 0 or rate_b <= 0:
        return 0.0
    return 100.0 * min(rate_a / rate_b, rate_b / rate_a)


def p_percent(selection: TopKSelection, pool_counts: dict, group_a, group_b) -> float:
    """100 * min ratio of the two groups' selection rates (selected / pool)."""
    if pool_counts.get(group_a, 0) <= 0 or pool_counts.get(group_b, 0) <= 0:
        raise ValueError("both groups need a non-empty pool")
    rate_a = selection.group_counts.get(group_a, 0) / pool_counts[group_a]
    rate_b = selection.group_counts.get(group_b, 0) / pool_counts[group_b]
    return p_percent_from_rates(rate_a, rate_b)


def four_fifths_flag(p_score: float) -> bool:
    """True when p% falls strictly below 80, i.e. potential disparate impact."""
    return p_score < FOUR_FIFTHS


@dataclass
class FairnessReport:
    scenario: str
    k: int
    pool_size: int
    kl_gender: float
    kl_ethnicity_pairs: list
    kl_ethnicity_mean: float
    gender_shares: dict
    ethnicity_shares: dict
    p_gender: float
    p_ethnicity: list
    four_fifths: dict
    histograms: dict
    leakage: object = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def summary_row(self) -> dict:
        row = {
            "scenario": self.scenario,
            "male_pct": self.gender_shares["male"],
            "female_pct": self.gender_shares["female"],
            "p_pct": self.p_gender,
            "group1_pct": self.ethnicity_shares["group1"],
            "group2_pct": self.ethnicity_shares["group2"],
            "group3_pct": self.ethnicity_shares["group3"],
            "p1_pct": self.p_ethnicity[0],
            "p2_pct": self.p_ethnicity[1],
            "p3_pct": self.p_ethnicity[2],
            "kl_gender": round(self.kl_gender, 6),
            "kl_ethnicity_mean": round(self.kl_ethnicity_mean, 6),
        }
        if isinstance(self.leakage, list):
            for r in self.leakage:
                row[f"probe_{r['attribute']}_{r['kind']}"] = round(r["val_accuracy"], 4)
        return row


def build_report(dataset, predictions: dict, scenario: str, k: int = 1000,
                 probe_results=None, config: dict | None = None) -> FairnessReport:
    """Aggregate the validation-pool audit for one scenario's predictions."""
    ids = sorted(predictions)
    if len(ids) < k:
        raise ShapeError(f"{len(ids)} predictions cannot fill a top-{k}")
    gender = {i: dataset.profiles[i].gender for i in ids}
    ethnic = {i: dataset.profiles[i].ethnicity for i in ids}
    scores = np.array([predictions[i] for i in ids])
    g = np.array([gender[i] for i in ids])
    e = np.array([ethnic[i] for i in ids])

    hist_g = [ScoreHistogram.from_scores(scores[g == v]) for v in (0, 1)]
    hist_e = [ScoreHistogram.from_scores(scores[e == v]) for v in (0, 1, 2)]
    kl_g = kl_divergence(hist_g[0], hist_g[1])
    kl_pairs, kl_mean = ethnicity_kl(hist_e)

    pool_g = {v: int(np.sum(g == v)) for v in (0, 1)}
    pool_e = {v: int(np.sum(e == v)) for v in (0, 1, 2)}
    sel_g = select_top_k(predictions, k, gender)
    sel_e = TopKSelection(k, sel_g.selected_ids, {})
    for i in sel_e.selected_ids:
        sel_e.group_counts[ethnic[i]] = sel_e.group_counts.get(ethnic[i], 0) + 1

    p_g = p_percent(sel_g, pool_g, 0, 1)
    p_e = [p_percent(sel_e, pool_e, a, b) for a, b in ((0, 1), (0, 2), (1, 2))]

    def share(counts, v):
        return round(100.0 * counts.get(v, 0) / k, 2)

    if probe_results is None:
        leakage = "absent"
    else:
        leakage = [r.to_dict() if hasattr(r, "to_dict") else dict(r) for r in probe_results]

    return FairnessReport(
        scenario=scenario,
        k=k,
        pool_size=len(ids),
        kl_gender=kl_g,
        kl_ethnicity_pairs=list(kl_pairs),
        kl_ethnicity_mean=kl_mean,
        gender_shares={"male": share(sel_g.group_counts, 0), "female": share(sel_g.group_counts, 1)},
        ethnicity_shares={f"group{v + 1}": share(sel_e.group_counts, v) for v in (0, 1, 2)},
        p_gender=round(p_g, 2),
        p_ethnicity=[round(v, 2) for v in p_e],
        four_fifths={
            "gender": four_fifths_flag(round(p_g, 2)),
            "ethnicity": [four_fifths_flag(round(v, 2)) for v in p_e],
        },
        histograms={
            "bins": N_BINS,
            "male": hist_g[0].counts.astype(int).tolist(),
            "female": hist_g[1].counts.astype(int).tolist(),
            "group1": hist_e[0].counts.astype(int).tolist(),
            "group2": hist_e[1].counts.astype(int).tolist(),
            "group3": hist_e[2].counts.astype(int).tolist(),
        },
        leakage=leakage,
        config=dict(config or {}),
    )
