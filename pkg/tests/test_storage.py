import json

import numpy as np
import pytest

from fairlens.datagen import GenConfig, generate_dataset
from fairlens.errors import DataError
from fairlens.scoring import score_dataset
from fairlens.storage import FIELDS, file_sha256, load_dataset, meta_path, save_dataset


def test_round_trip_exact(tmp_path):
    ds = score_dataset(generate_dataset(GenConfig(n_profiles=48, seed=6)))
    ds.profiles[0].agnostic_face = np.full(20, 0.1)
    path = tmp_path / "d.jsonl"
    digest = save_dataset(ds, path, {"note": "x"})
    assert digest == file_sha256(path)
    loaded, meta = load_dataset(path)
    assert meta["note"] == "x" and meta["n_profiles"] == 48
    assert loaded.train_ids == ds.train_ids and loaded.config == ds.config
    for a, b in zip(ds.profiles, loaded.profiles):
        assert np.array_equal(a.face, b.face) and a.bio == b.bio and a.score_e == b.score_e
    assert np.array_equal(loaded.profiles[0].agnostic_face, ds.profiles[0].agnostic_face)
    assert loaded.profiles[1].agnostic_face is None
    assert save_dataset(loaded, tmp_path / "e.jsonl") == save_dataset(ds, tmp_path / "f.jsonl")


def test_record_fields(tmp_path):
    ds = generate_dataset(GenConfig(n_profiles=24))
    save_dataset(ds, tmp_path / "d.jsonl")
    first = json.loads((tmp_path / "d.jsonl").read_text().splitlines()[0])
    assert tuple(first) == FIELDS


def test_load_errors(tmp_path):
    ds = generate_dataset(GenConfig(n_profiles=24))
    path = tmp_path / "d.jsonl"
    save_dataset(ds, path)
    meta_path(path).unlink()
    with pytest.raises(DataError):
        load_dataset(path)
    save_dataset(ds, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[1:]) + "\n")
    with pytest.raises(DataError):
        load_dataset(path)
    path.write_text("{not json\n")
    with pytest.raises(DataError):
        load_dataset(path)
    path.write_text('{"id": 0}\n')
    with pytest.raises(DataError):
        load_dataset(path)
