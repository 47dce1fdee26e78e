import numpy as np
import pytest

from fairlens.datagen import FACE_DIM
from fairlens.errors import ConfigError, DataError, ShapeError, StateError
from fairlens.model import (
    UNK,
    ScenarioSpec,
    TrainConfig,
    build_model,
    encode_text,
    extract_embedding,
    extract_embeddings,
    forward,
    load_model,
    predict_split,
    require_trained,
    save_model,
    train,
)

from gradcases import model_grad_error


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_model_gradients_match_finite_differences(seed):
    assert model_grad_error(seed) <= 1e-4


def test_scenario_names_and_targets():
    assert ScenarioSpec("neutral", "ethnicity").name == "neutral"
    assert ScenarioSpec.parse("biased-ethnicity").target_key == "score_e"
    assert ScenarioSpec.parse("agnostic-gender").target_key == "score_g"
    assert ScenarioSpec.parse("agnostic-gender").agnostic_inputs
    with pytest.raises(ConfigError):
        ScenarioSpec("fair")
    with pytest.raises(ConfigError):
        ScenarioSpec("biased", "age")


def test_vocab_from_train_split_only(small_dataset):
    params = build_model(small_dataset, ScenarioSpec("neutral"))
    train_tokens = {t for i in small_dataset.train_ids for t in small_dataset.profiles[i].bio}
    assert params.text.tokens[0] == UNK
    assert set(params.text.tokens[1:]) == train_tokens
    blind = build_model(small_dataset, ScenarioSpec("agnostic", "gender"))
    assert "he" not in blind.text.vocab and "she" not in blind.text.vocab


def test_text_encoder_order_invariant_and_unknowns(small_dataset):
    params = build_model(small_dataset, ScenarioSpec("neutral"), seed=1)
    params.text.embed[...] = np.random.default_rng(0).normal(size=params.text.embed.shape)
    toks = small_dataset.profiles[small_dataset.train_ids[0]].bio
    assert np.allclose(encode_text(params, toks), encode_text(params, list(reversed(toks))))
    assert encode_text(params, toks).shape == (32,)
    assert np.allclose(encode_text(params, ["zzzz-never-seen"]), encode_text(params, [UNK]))
    assert np.allclose(encode_text(params, []), encode_text(params, [UNK]))


def test_forward_shapes(small_dataset):
    params = build_model(small_dataset, ScenarioSpec("neutral"))
    p = small_dataset.profiles[0]
    out = forward(params, p.face, p.bio, p.competencies)
    assert 0.0 < out < 1.0
    with pytest.raises(ShapeError):
        forward(params, p.face[:19], p.bio, p.competencies)
    with pytest.raises(ShapeError):
        forward(params, p.face, p.bio, p.competencies[:6])


def test_training_reduces_loss_and_is_deterministic(small_dataset):
    cfg = TrainConfig(epochs=6, seed=5)
    a, hist_a = train(small_dataset, ScenarioSpec("biased", "gender"), cfg)
    b, hist_b = train(small_dataset, ScenarioSpec("biased", "gender"), cfg)
    assert hist_a == hist_b
    assert hist_a[-1] < hist_a[0]
    assert a.trained_epochs == 6
    for k, v in a.arrays().items():
        assert np.array_equal(v, b.arrays()[k])


def test_predictions_and_embeddings(small_dataset):
    params, _ = train(small_dataset, ScenarioSpec("neutral"), TrainConfig(epochs=1))
    preds = predict_split(params, small_dataset, "val")
    assert sorted(preds) == sorted(small_dataset.val_ids)
    assert all(0.0 <= v <= 1.0 for v in preds.values())
    emb = extract_embeddings(params, small_dataset, small_dataset.val_ids[:5])
    assert emb.shape == (5, 40) and np.all(emb >= 0.0)
    one = extract_embedding(params, small_dataset.profiles[small_dataset.val_ids[0]])
    assert np.allclose(one, emb[0])


def test_untrained_model_refused(small_dataset):
    params = build_model(small_dataset, ScenarioSpec("neutral"))
    with pytest.raises(StateError):
        require_trained(params)


def test_agnostic_needs_agnostic_faces(small_dataset):
    assert small_dataset.profiles[0].agnostic_face is None
    with pytest.raises(DataError):
        train(small_dataset, ScenarioSpec("agnostic", "gender"), TrainConfig(epochs=1))


def test_save_load_round_trip(small_dataset, tmp_path):
    params, _ = train(small_dataset, ScenarioSpec("biased", "ethnicity"), TrainConfig(epochs=1))
    h1 = save_model(params, tmp_path / "m.json")
    loaded, meta = load_model(tmp_path / "m.json")
    assert loaded.scenario == params.scenario and loaded.trained_epochs == 1
    for k, v in params.arrays().items():
        assert np.array_equal(v, loaded.arrays()[k])
    assert save_model(loaded, tmp_path / "m2.json") == h1
    with pytest.raises(DataError):
        from fairlens.agnostic import load_transform

        load_transform(tmp_path / "m.json")


def test_face_dimension_constant():
    assert FACE_DIM == 20
