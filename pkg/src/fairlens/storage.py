"""Dataset persistence: one JSON object per profile plus a small sidecar.

The JSONL file holds exactly the profile fields. Everything else needed to
reload a :class:`Dataset` (generation config, train/val split) lives in
``<name>.meta.json`` next to it.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .datagen import Dataset, GenConfig, Profile
from .errors import DataError

FIELDS = (
    "id", "gender", "ethnicity", "name", "occupation_id", "sector_id", "suitability",
    "competencies", "face", "agnostic_face", "bio", "blind_bio", "score_u", "score_g", "score_e",
)


def _vector(v):
    return None if v is None else [float(x) for x in v]


def profile_to_record(p: Profile) -> dict:
    return {
        "id": p.id,
        "gender": p.gender,
        "ethnicity": p.ethnicity,
        "name": p.name,
        "occupation_id": p.occupation_id,
        "sector_id": p.sector_id,
        "suitability": float(p.suitability),
        "competencies": _vector(p.competencies),
        "face": _vector(p.face),
        "agnostic_face": _vector(p.agnostic_face),
        "bio": list(p.bio),
        "blind_bio": list(p.blind_bio),
        "score_u": p.score_u,
        "score_g": p.score_g,
        "score_e": p.score_e,
    }


def record_to_profile(rec: dict) -> Profile:
    missing = [k for k in FIELDS if k not in rec]
    if missing:
        raise DataError(f"profile record lacks field(s) {missing}")

    def arr(v):
        return None if v is None else np.asarray(v, dtype=float)

    return Profile(
        id=int(rec["id"]),
        gender=int(rec["gender"]),
        ethnicity=int(rec["ethnicity"]),
        name=rec["name"],
        occupation_id=int(rec["occupation_id"]),
        sector_id=int(rec["sector_id"]),
        suitability=float(rec["suitability"]),
        competencies=arr(rec["competencies"]),
        face=arr(rec["face"]),
        bio=list(rec["bio"]),
        blind_bio=list(rec["blind_bio"]),
        agnostic_face=arr(rec["agnostic_face"]),
        score_u=rec["score_u"],
        score_g=rec["score_g"],
        score_e=rec["score_e"],
    )


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def dataset_lines(dataset: Dataset) -> str:
    return "".join(json.dumps(profile_to_record(p), separators=(",", ":")) + "\n" for p in dataset.profiles)


def save_dataset(dataset: Dataset, path, extra_meta: dict | None = None) -> str:
    """Write ``path`` and its sidecar; returns the sha256 of the JSONL text."""
    text = dataset_lines(dataset)
    Path(path).write_text(text, encoding="utf-8")
    meta = {
        "generation": {k: getattr(dataset.config, k) for k in GenConfig.__dataclass_fields__},
        "train_ids": list(dataset.train_ids),
        "val_ids": list(dataset.val_ids),
        "n_profiles": len(dataset),
    }
    meta.update(extra_meta or {})
    meta_path(path).write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")
    return hashlib.sha256(text.encode()).hexdigest()


def load_dataset(path) -> tuple:
    """Return ``(dataset, meta)`` from a JSONL file and its sidecar."""
    path = Path(path)
    try:
        meta = json.loads(meta_path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{meta_path(path)} is missing; the dataset split cannot be recovered") from None
    profiles = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                profiles.append(record_to_profile(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    if [p.id for p in profiles] != list(range(len(profiles))):
        raise DataError(f"{path}: profile ids must be 0..N-1 in order")
    config = GenConfig(**meta["generation"])
    return Dataset(profiles, list(meta["train_ids"]), list(meta["val_ids"]), config), meta


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
