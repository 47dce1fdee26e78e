import pytest

from fairlens.datagen import GenConfig, generate_dataset
from fairlens.scoring import score_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """480 scored profiles: big enough for every cell, small enough to train in a second."""
    ds = generate_dataset(GenConfig(n_profiles=480, seed=3))
    return score_dataset(ds)


@pytest.fixture(scope="session")
def default_dataset():
    """The full 24000-profile dataset at default settings, scored."""
    return score_dataset(generate_dataset(GenConfig()))


@pytest.fixture(scope="session")
def default_transform(default_dataset):
    """Removal transform trained on the default training split (the slow bit, shared)."""
    from fairlens.agnostic import train_agnostic_transform

    ds = default_dataset
    tr = ds.train_ids
    history = []
    transform = train_agnostic_transform(ds.faces(tr), ds.genders(tr), ds.ethnicities(tr), history=history)
    return transform, history


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts, one line per criterion, at the end of the run."""
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
