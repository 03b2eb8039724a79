import time

import numpy as np
import pytest

from framewalk.gan import FrameGenerator
from framewalk.manifold import ManifoldEmbedding
from framewalk.synthetic import moving_blobs_clip


@pytest.fixture(scope="session")
def tiny_clip():
    """40 frames of 32x32 orbiting blobs: fast enough for unit tests."""
    return moving_blobs_clip(n_frames=40, size=32, seed=7)


@pytest.fixture(scope="session")
def tiny_manifold(tiny_clip):
    return ManifoldEmbedding(
        n_components=8, width=64, seed_frames=20, increment=20, epochs_per_stage=2, random_state=0
    ).fit(tiny_clip)


@pytest.fixture(scope="session")
def tiny_gan(tiny_clip, tiny_manifold):
    return FrameGenerator(
        manifold=tiny_manifold,
        base_width=16,
        seed_frames=20,
        increment=20,
        epochs_per_stage=2,
        random_state=0,
    ).fit(tiny_clip)


@pytest.fixture(scope="session")
def desk_clip():
    """The desk-scale target clip: 200 frames at 64x64."""
    return moving_blobs_clip(n_frames=200, size=64, seed=7)


@pytest.fixture(scope="session")
def desk_manifold(desk_clip):
    """Desk-scale manifold run with the published recipe (lr 1e-5, batch 32,
    curriculum seeded at 100 frames). Takes a few minutes of CPU."""
    model = ManifoldEmbedding(
        n_components=16,
        width=128,
        out_gain=256.0,
        learning_rate=1e-5,
        batch_size=32,
        seed_frames=100,
        increment=100,
        epochs_per_stage=50,
        random_state=0,
    )
    start = time.time()
    model.fit(desk_clip)
    model.fit_seconds_ = time.time() - start
    return model


@pytest.fixture(scope="session")
def desk_gan(desk_clip, desk_manifold):
    model = FrameGenerator(
        manifold=desk_manifold,
        base_width=16,
        logit_gain=400.0,
        learning_rate=1e-5,
        discriminator_lr=1e-5,
        batch_size=32,
        seed_frames=100,
        increment=100,
        epochs_per_stage=80,
        random_state=0,
    )
    start = time.time()
    model.fit(desk_clip)
    model.fit_seconds_ = time.time() - start
    return model


ACCEPTANCE_METRICS: list[str] = []


def record_metric(line: str) -> None:
    """Stash a measurement so it survives pytest's stdout capture."""
    ACCEPTANCE_METRICS.append(line)


@pytest.fixture(scope="session")
def metrics_recorder():
    # handed out as a fixture so tests write to THIS module instance's list
    # (importing tests.conftest directly would create a second copy)
    return record_metric


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = {}
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in report.nodeid and report.when == "call":
                name = report.nodeid.split("::")[-1]
                lines[name] = f"{name}: {'PASS' if outcome == 'passed' else 'FAIL'}"
    if lines:
        terminalreporter.section("acceptance criteria")
        for name in sorted(lines):
            terminalreporter.write_line(lines[name])
        for metric in ACCEPTANCE_METRICS:
            terminalreporter.write_line(metric)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
