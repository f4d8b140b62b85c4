import numpy as np
import pytest

from dehazegan.config import RunConfig
from dehazegan.haze import apply_haze, sample_haze_params, synthetic_scene
from dehazegan.rng import stream


def tiny_config(**changes) -> RunConfig:
    base = dict(patch_size=32, batch_size=2, width_factor=16, steps=4, eval_every=2, checkpoint_every=2)
    base.update(changes)
    return RunConfig(**base)


def make_pairs(n: int, size: int, seed: int = 0):
    g = stream(seed, "test-pairs")
    cfg = RunConfig()
    pairs = []
    for _ in range(n):
        clean = synthetic_scene(size, size, g)
        p = sample_haze_params(size, size, g, (cfg.beta_min, cfg.beta_max), (cfg.airlight_min, cfg.airlight_max), cfg.depth_max)
        pairs.append((apply_haze(clean, p), clean))
    return pairs


@pytest.fixture
def tiny_cfg():
    return tiny_config()


@pytest.fixture
def clean_pool():
    g = np.random.default_rng(0)
    return [synthetic_scene(40, 48, g) for _ in range(3)]


# ---------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary
# ---------------------------------------------------------------------------

ACCEPTANCE_DETAILS: dict[int, str] = {}
_ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "FAIL"
        _ACCEPTANCE_RESULTS[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_RESULTS):
        status, title = _ACCEPTANCE_RESULTS[number]
        detail = ACCEPTANCE_DETAILS.get(number, "")
        terminalreporter.write_line(f"[{status}] {number:2d}. {title}" + (f": {detail}" if detail else ""))
