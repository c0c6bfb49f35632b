import numpy as np
import pytest

from chewdetect.config import RunConfig
from chewdetect.loso import recording_data
from chewdetect.synth import SynthSpec, generate_dataset, generate_recording

# short recordings keep the multi-run suites (fusion sweep, window study) fast
SMALL_SPEC = SynthSpec(duration_s=240.0, seed=11)
SMALL_CONFIG = RunConfig(tuning_budget=10, tuning_folds=3, n_per_class=300)


@pytest.fixture(scope="session")
def small_recordings():
    out = []
    for s in range(SMALL_SPEC.n_subjects):
        for r in range(SMALL_SPEC.recordings_per_subject[s]):
            out.append(generate_recording(SMALL_SPEC, s, r))
    return out


@pytest.fixture(scope="session")
def small_data(small_recordings):
    """Both channels extracted so every channel mode can reuse them."""
    return [recording_data(a, ann, SMALL_CONFIG, channels=(0, 1)) for a, ann in small_recordings]


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory):
    return generate_dataset(SMALL_SPEC, tmp_path_factory.mktemp("small_synth"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
