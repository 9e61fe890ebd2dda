import numpy as np
import pytest

from asdpipe.corpus import ClipCounts, default_synth_spec, generate_synthetic


def small_spec(n_types=3, seed=5, target_domain=True, **kw):
    kw.setdefault("clips_per_split", ClipCounts(12, 4, 4, 4))
    kw.setdefault("clip_duration_s", 1.0)
    return default_synth_spec(n_types, seed=seed, target_domain=target_domain, **kw)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    records = generate_synthetic(small_spec(), out)
    return out, records


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
