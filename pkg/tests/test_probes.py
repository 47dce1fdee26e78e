import numpy as np
import pytest

from fairlens.model import ScenarioSpec, TrainConfig, build_model, train
from fairlens.errors import StateError
from fairlens.probes import PROBE_KINDS, DegenerateDataError, eval_probe, leakage_audit, train_probe


def _separable(n=400, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    centres = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0]])
    return centres[y] + rng.normal(0.0, 0.5, (n, 2)), y


@pytest.mark.parametrize("kind", PROBE_KINDS)
def test_probe_learns_separable_classes(kind):
    x, y = _separable()
    probe = train_probe(x[:300], y[:300], kind, seed=1, epochs=60)
    assert eval_probe(probe, x[300:], y[300:]) >= 0.97


@pytest.mark.parametrize("kind", PROBE_KINDS)
def test_probe_on_noise_at_chance(kind):
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3000, 10))
    y = rng.integers(0, 2, 3000)
    probe = train_probe(x[:2000], y[:2000], kind, seed=0, epochs=10)
    assert abs(eval_probe(probe, x[2000:], y[2000:]) - 0.5) <= 0.05


def test_probe_deterministic_and_validated():
    x, y = _separable()
    a = train_probe(x, y, "mlp", seed=3, epochs=3)
    b = train_probe(x, y, "mlp", seed=3, epochs=3)
    assert np.array_equal(a.scores(x), b.scores(x))
    with pytest.raises(ValueError):
        train_probe(x, y, "forest")
    with pytest.raises(DegenerateDataError):
        train_probe(x, np.zeros(len(y), dtype=int))
    assert eval_probe(a, x[:0], y[:0]) == 0.0


def test_constant_features_do_not_break_standardisation():
    x = np.ones((50, 3))
    x[:, 0] = np.arange(50) >= 25
    y = (np.arange(50) >= 25).astype(int)
    assert eval_probe(train_probe(x, y, "logistic", epochs=200, learning_rate=0.05), x, y) == 1.0


def test_leakage_audit_shape(small_dataset):
    params, _ = train(small_dataset, ScenarioSpec("biased", "gender"), TrainConfig(epochs=2))
    results = leakage_audit(params, small_dataset, epochs=2)
    assert [(r.attribute, r.kind) for r in results] == [(a, k) for a in ("gender", "ethnicity") for k in PROBE_KINDS]
    assert all(0.0 <= r.val_accuracy <= 1.0 for r in results)
    assert {r.chance_level for r in results} == {0.5, 1.0 / 3.0}
    with pytest.raises(StateError):
        leakage_audit(build_model(small_dataset, ScenarioSpec("neutral")), small_dataset)
