"""Synthetic resume profiles with controllable demographic leakage.

Each profile carries demographics, seven competencies, an occupation and its
sector suitability, a unit-norm 20-d face embedding and a templated bio
(plus its gender-blinded variant). Profile ``i`` is generated from its own
RNG stream, so generation order does not matter.
"""
from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError
from .numerics import RngStream, stream_id_for

N_CELLS = 24  # 2 genders x 3 ethnicities x 4 sectors
FACE_DIM = 20
MAX_BIO_TOKENS = 64

MALE, FEMALE = 0, 1

EDUCATION_LEVELS = (0.2, 0.4, 0.6, 0.8, 1.0)
RECOMMENDATION_LEVELS = (0.0, 1.0)
AVAILABILITY_LEVELS = (0.2, 0.4, 0.6, 0.8, 1.0)
EXPERIENCE_LEVELS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
LANGUAGE_LEVELS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
COMPETENCY_DOMAINS = (
    EDUCATION_LEVELS,
    RECOMMENDATION_LEVELS,
    AVAILABILITY_LEVELS,
    EXPERIENCE_LEVELS,
    LANGUAGE_LEVELS,
    LANGUAGE_LEVELS,
    LANGUAGE_LEVELS,
)

OCCUPATIONS = (
    "journalist",
    "photographer",
    "filmmaker",
    "attorney",
    "accountant",
    "surgeon",
    "nurse",
    "physician",
    "professor",
    "teacher",
)
OCCUPATION_SECTOR = (0, 0, 0, 1, 1, 2, 2, 2, 3, 3)
SECTOR_NAMES = ("media", "administration", "healthcare", "education")
SECTOR_SUITABILITY = (0.25, 0.5, 0.75, 1.0)

SUBJECT_PRONOUN = ("he", "she")
POSSESSIVE_PRONOUN = ("his", "her")
TITLE = ("mr", "ms")
NEUTRAL_FORMS = {"he": "they", "she": "they", "his": "their", "her": "their", "mr": "mx", "ms": "mx"}
GENDERED_WORDS = frozenset(
    {"he", "she", "his", "her", "him", "hers", "himself", "herself", "mr", "ms", "mrs"}
)


@dataclass(frozen=True)
class GenConfig:
    n_profiles: int = 24000
    seed: int = 42
    face_gender_leakage: float = 1.25
    face_ethnicity_leakage: float = 1.5
    face_noise: float = 1.0
    competency_ethnicity_proxy: float = 0.5
    train_fraction: float = 0.8

    def validate(self):
        if self.n_profiles <= 0 or self.n_profiles % N_CELLS:
            raise ConfigError(
                f"n_profiles must be a positive multiple of {N_CELLS}, got {self.n_profiles}"
            )
        if self.face_gender_leakage < 0 or self.face_ethnicity_leakage < 0:
            raise ConfigError("face leakage parameters must be >= 0")
        if self.face_noise <= 0:
            raise ConfigError("face_noise must be > 0")
        if not 0.0 <= self.competency_ethnicity_proxy <= 1.0:
            raise ConfigError("competency_ethnicity_proxy must lie in [0, 1]")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        return self


@dataclass(frozen=True)
class Demographics:
    gender: int
    ethnicity: int


@dataclass(frozen=True)
class Occupation:
    occupation_id: int
    sector_id: int
    suitability: float


@dataclass(frozen=True)
class Bio:
    tokens: tuple
    blinded_tokens: tuple


@dataclass
class Profile:
    id: int
    gender: int
    ethnicity: int
    name: str
    occupation_id: int
    sector_id: int
    suitability: float
    competencies: np.ndarray
    face: np.ndarray
    bio: list
    blind_bio: list
    agnostic_face: np.ndarray | None = None
    score_u: float | None = None
    score_g: float | None = None
    score_e: float | None = None

    @property
    def demographics(self) -> Demographics:
        return Demographics(self.gender, self.ethnicity)

    @property
    def cell(self) -> tuple:
        return (self.gender, self.ethnicity, self.sector_id)


@dataclass
class Dataset:
    profiles: list
    train_ids: list
    val_ids: list
    config: GenConfig = field(default_factory=GenConfig)

    def __len__(self):
        return len(self.profiles)

    def split_ids(self, split: str) -> list:
        if split == "train":
            return self.train_ids
        if split == "val":
            return self.val_ids
        if split == "all":
            return [p.id for p in self.profiles]
        raise ValueError(f"unknown split {split!r}; expected 'train', 'val' or 'all'")

    def subset(self, ids) -> list:
        return [self.profiles[i] for i in ids]

    def genders(self, ids=None) -> np.ndarray:
        ids = range(len(self.profiles)) if ids is None else ids
        return np.array([self.profiles[i].gender for i in ids], dtype=int)

    def ethnicities(self, ids=None) -> np.ndarray:
        ids = range(len(self.profiles)) if ids is None else ids
        return np.array([self.profiles[i].ethnicity for i in ids], dtype=int)

    def faces(self, ids=None, agnostic: bool = False) -> np.ndarray:
        ids = range(len(self.profiles)) if ids is None else ids
        key = "agnostic_face" if agnostic else "face"
        return np.array([getattr(self.profiles[i], key) for i in ids], dtype=float)

    def competencies(self, ids=None) -> np.ndarray:
        ids = range(len(self.profiles)) if ids is None else ids
        return np.array([self.profiles[i].competencies for i in ids], dtype=float)


# --- static corpora -------------------------------------------------------


def _data_lines(name: str) -> list:
    text = resources.files("fairlens.data").joinpath(name).read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@functools.lru_cache(maxsize=None)
def name_lists() -> tuple:
    return tuple(_data_lines("names_male.txt")), tuple(_data_lines("names_female.txt"))


@functools.lru_cache(maxsize=None)
def bio_templates() -> tuple:
    return tuple(_data_lines("bio_templates.txt"))


@functools.lru_cache(maxsize=None)
def sector_keywords() -> tuple:
    rows = {}
    for ln in _data_lines("sector_keywords.txt"):
        sector, words = ln.split("\t")
        rows[int(sector)] = tuple(words.split())
    return tuple(rows[s] for s in range(len(SECTOR_NAMES)))


@functools.lru_cache(maxsize=None)
def _fillers() -> tuple:
    return tuple(_data_lines("organizations.txt")), tuple(_data_lines("years.txt"))


@functools.lru_cache(maxsize=None)
def gendered_lexicon() -> frozenset:
    male, female = name_lists()
    return GENDERED_WORDS | frozenset(male) | frozenset(female)


@functools.lru_cache(maxsize=None)
def face_directions() -> tuple:
    """Fixed unit gender direction ``u`` and three orthonormal ethnicity directions.

    All four are mutually orthogonal; they are derived from a constant key so
    they never change with the dataset seed.
    """
    g = RngStream(0x5EED_FACE, 0).normal(size=(FACE_DIM, 4))
    q, _ = np.linalg.qr(g)
    u = q[:, 0].copy()
    ethnic = q[:, 1:4].T.copy()
    return u, ethnic


# --- per-profile sampling -------------------------------------------------


@functools.lru_cache(maxsize=8)
def _cell_table(n_profiles: int, seed: int) -> np.ndarray:
    # Round-robin over the 24 (gender, ethnicity, sector) cells, then a seeded
    # shuffle: every cell ends up with exactly n/24 profiles.
    perm = RngStream(seed, stream_id_for("demographics")).permutation(n_profiles)
    table = perm % N_CELLS
    table.setflags(write=False)
    return table


def _cell_of(i: int, config: GenConfig) -> tuple:
    c = int(_cell_table(config.n_profiles, config.seed)[i])
    return c % 2, (c // 2) % 3, c // 6


def sample_demographics(i: int, config: GenConfig) -> Demographics:
    if not 0 <= i < config.n_profiles:
        raise IndexError(f"profile index {i} out of range")
    gender, ethnicity, _ = _cell_of(i, config)
    return Demographics(gender, ethnicity)


def assign_occupation(i: int, config: GenConfig, rng: RngStream) -> Occupation:
    """Sector comes from the balanced cell table; the occupation is uniform within it."""
    if not 0 <= i < config.n_profiles:
        raise IndexError(f"profile index {i} out of range")
    _, _, sector = _cell_of(i, config)
    members = [o for o, s in enumerate(OCCUPATION_SECTOR) if s == sector]
    occ = members[int(rng.integers(len(members)))]
    return Occupation(occ, sector, SECTOR_SUITABILITY[sector])


def _proxy_shift(index: int, ethnicity: int) -> int:
    top = len(LANGUAGE_LEVELS) - 1
    if ethnicity == 0:
        return min(index + 1, top)
    if ethnicity == 2:
        return max(index - 1, 0)
    # middle group is pulled toward the two central levels
    if index < 2:
        return index + 1
    if index > 3:
        return index - 1
    return index


def sample_competencies(demographics: Demographics, config: GenConfig, rng: RngStream) -> np.ndarray:
    """Seven competency values, uniform over their domains.

    With probability ``competency_ethnicity_proxy`` the first language level is
    moved one step toward an ethnicity anchor (group 0 high, group 2 low).
    """
    idx = [int(rng.integers(len(dom))) for dom in COMPETENCY_DOMAINS]
    if rng.uniform() < config.competency_ethnicity_proxy:
        idx[4] = _proxy_shift(idx[4], demographics.ethnicity)
    return np.array([dom[k] for dom, k in zip(COMPETENCY_DOMAINS, idx)])


def synth_face_embedding(demographics: Demographics, config: GenConfig, rng: RngStream) -> np.ndarray:
    u, ethnic = face_directions()
    sign = 1.0 if demographics.gender == MALE else -1.0
    signal = config.face_gender_leakage * sign * u + config.face_ethnicity_leakage * ethnic[demographics.ethnicity]
    while True:
        v = rng.normal(0.0, config.face_noise, size=FACE_DIM) + signal
        norm = np.linalg.norm(v)
        if norm > 0.0:
            return v / norm


def tokenize(text: str) -> list:
    return [t for t in text.lower().split() if t.isalnum()]


def blind_tokens(tokens) -> list:
    lexicon = gendered_lexicon()
    out = []
    for t in tokens:
        if t in NEUTRAL_FORMS:
            out.append(NEUTRAL_FORMS[t])
        elif t not in lexicon:
            out.append(t)
    return out


def generate_bio(name: str, gender: int, occupation: Occupation, rng: RngStream) -> Bio:
    templates = bio_templates()
    keywords = sector_keywords()[occupation.sector_id]
    orgs, years = _fillers()
    n_sentences = 2 + int(rng.integers(3))
    chosen = rng.permutation(len(templates))[:n_sentences]
    fixed = {
        "{TITLE}": TITLE[gender],
        "{NAME}": name,
        "{SUBJ}": SUBJECT_PRONOUN[gender],
        "{POSS}": POSSESSIVE_PRONOUN[gender],
        "{OCC}": OCCUPATIONS[occupation.occupation_id],
    }
    words = []
    for t in chosen:
        for piece in templates[t].split():
            if piece in fixed:
                words.append(fixed[piece])
            elif piece == "{KW}":
                words.append(rng.choice(keywords))
            elif piece == "{ORG}":
                words.append(rng.choice(orgs))
            elif piece == "{YEARS}":
                words.append(rng.choice(years))
            else:
                words.append(piece)
    tokens = tokenize(" ".join(words))[:MAX_BIO_TOKENS]
    return Bio(tuple(tokens), tuple(blind_tokens(tokens)))


def generate_profile(i: int, config: GenConfig) -> Profile:
    rng = RngStream(config.seed, i)
    demo = sample_demographics(i, config)
    occ = assign_occupation(i, config, rng)
    comp = sample_competencies(demo, config, rng)
    face = synth_face_embedding(demo, config, rng)
    names = name_lists()[demo.gender]
    name = rng.spawn("name").choice(names)
    bio = generate_bio(name, demo.gender, occ, rng.spawn("bio"))
    return Profile(
        id=i,
        gender=demo.gender,
        ethnicity=demo.ethnicity,
        name=name,
        occupation_id=occ.occupation_id,
        sector_id=occ.sector_id,
        suitability=occ.suitability,
        competencies=comp,
        face=face,
        bio=list(bio.tokens),
        blind_bio=list(bio.blinded_tokens),
    )


def stratified_split(profiles, train_fraction: float, seed: int) -> tuple:
    """Split ids so every (gender, ethnicity, sector) cell is divided evenly.

    The total train count is exactly ``round(train_fraction * N)``; per-cell
    train (and val) counts differ by at most one.
    """
    n = len(profiles)
    n_train = int(round(train_fraction * n))
    cells = {}
    for p in profiles:
        cells.setdefault(p.cell, []).append(p.id)
    keys = sorted(cells)
    rng = RngStream(seed, stream_id_for("split"))
    base, extra = divmod(n_train, len(keys))
    bonus = set(int(k) for k in rng.permutation(len(keys))[:extra])
    train, val = [], []
    for j, key in enumerate(keys):
        ids = sorted(cells[key])
        order = rng.permutation(len(ids))
        take = min(base + (1 if j in bonus else 0), len(ids))
        train.extend(ids[k] for k in order[:take])
        val.extend(ids[k] for k in order[take:])
    return sorted(train), sorted(val)


def generate_dataset(config: GenConfig | None = None) -> Dataset:
    config = (config or GenConfig()).validate()
    profiles = [generate_profile(i, config) for i in range(config.n_profiles)]
    train, val = stratified_split(profiles, config.train_fraction, config.seed)
    return Dataset(profiles, train, val, config)


def config_dict(config: GenConfig) -> dict:
    return asdict(config)
