"""Shared fixtures: a small dataset, quick models, and the twice-run demo study."""

import time

import pytest

from latent_atlas.config import demo_config
from latent_atlas.manifold import make_dataset
from latent_atlas.models import GanConfig, VaeConfig, train_gan, train_recoder, train_svae, train_vae
from latent_atlas.pipeline import run_pipeline
from latent_atlas.storage import load_model

# ---------------------------------------------------------------- quick models

QUICK_VAE = VaeConfig(latent_dim=8, epochs=4, hidden=(64, 32), seed=0)


@pytest.fixture(scope="session")
def small_data():
    return make_dataset(11, 1200).images


@pytest.fixture(scope="session")
def quick_vae(small_data):
    return train_vae(small_data, QUICK_VAE)[0]


@pytest.fixture(scope="session")
def quick_svae(small_data):
    return train_svae(small_data, VaeConfig(latent_dim=10, epochs=3, hidden=(64, 32), seed=0))[0]


@pytest.fixture(scope="session")
def quick_gan(small_data):
    model, _ = train_gan(small_data, GanConfig(latent_dim=8, epochs=3, hidden=(32, 64), seed=0))
    return train_recoder(model, steps=300, hidden=(64,), seed=0)[0]


# ---------------------------------------------------------------- demo study

@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory):
    """The bundled demo config run twice into separate directories."""
    runs = []
    for k in (1, 2):
        out = tmp_path_factory.mktemp(f"demo{k}")
        t0 = time.process_time()
        summary = run_pipeline(demo_config(), out, quiet=True)
        runs.append({"out": out, "summary": summary, "cpu_seconds": time.process_time() - t0})
    return runs


@pytest.fixture(scope="session")
def zoo(demo_runs):
    out = demo_runs[0]["out"]
    names = demo_runs[0]["summary"]["models"]
    return {name: load_model(out / "models" / f"{name}.bin") for name in names}


@pytest.fixture(scope="session")
def demo_data(demo_runs):
    cfg = demo_runs[0]["summary"]["config"]
    ds = make_dataset(cfg["dataset"]["seed"], cfg["dataset"]["n"])
    fit, held = ds.split(cfg["dataset"]["holdout"])
    return fit, held[: cfg["eval"]["n_images"]]


# ---------------------------------------------------------------- acceptance report

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _VERDICTS.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS, key=lambda v: v[0]):
        terminalreporter.write_line(line)

