"""Shared fixtures and the acceptance-criteria summary hook.

The expensive artifacts (seed-7 corpus, its frequency-map stacks, the trained
detector) are session-scoped so the acceptance tests share one training run.
A summary table with one line per acceptance criterion is printed at the end
of the session.
"""

import time

import numpy as np
import pytest

from fsband import net, synth
from fsband.freqmaps import compute_freq_stacks

# criterion number -> (passed, detail)
ACCEPTANCE_RESULTS: dict = {}

ACCEPTANCE_DESCRIPTIONS = {
    1: "held-out AUROC >= 0.95, accuracy >= 0.90, training < 15 min",
    2: "variant ordering: FS >= DB-HFM, FS - SB-HFM/SB-LFM >= 0.02 (3 seeds)",
    3: "AUROC/AUPRC match brute-force oracles within 1e-9 (100 random sets)",
    4: "analytic gradients match central differences (rel err <= 1e-3)",
    5: "hand-derived unit values match to 1e-9",
    6: "smoothing objective non-increasing; TV(LFM) <= TV(patch) (50 patches)",
    7: "mean Q orders bits 3 > 4 > 5, paired sign test p < 0.01 (50 images)",
    8: "byte-identical model files and detection JSON for fixed seeds",
    9: "seconds/patch positive, finite, and stable across patch counts",
}


def record_criterion(n: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[n] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_DESCRIPTIONS):
        if n in ACCEPTANCE_RESULTS:
            passed, detail = ACCEPTANCE_RESULTS[n]
            status = "PASS" if passed else "FAIL"
        else:
            status, detail = "NOT RUN", ""
        line = f"criterion {n}: {status:7s} {ACCEPTANCE_DESCRIPTIONS[n]}"
        if detail:
            line += f"  [{detail}]"
        tr.write_line(line)


# ---------------------------------------------------------------------------
# Session-scoped heavy artifacts
# ---------------------------------------------------------------------------

ACCEPT_SEED = 7
ACCEPT_COUNT = 1250  # per class: 2500 total -> 2000 train / 500 held out
TRAIN_EPOCHS = 30
FREQ_JOBS = 4

# Variant-comparison settings: a compact net is enough to separate the input
# wirings and keeps the 3-seed sweep around nine minutes.
ABLATE_CHANNELS = (8, 16, 32)
ABLATE_EPOCHS = 40
ABLATE_SEEDS = (0, 1, 2)


@pytest.fixture(scope="session")
def accept_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    cfg = synth.SynthConfig(count_per_class=ACCEPT_COUNT, side=64, seed=ACCEPT_SEED)
    return synth.gen_dataset(cfg, root)


@pytest.fixture(scope="session")
def accept_data(accept_corpus):
    raw, labels = synth.load_arrays(accept_corpus)
    hf, lf = compute_freq_stacks(raw, jobs=FREQ_JOBS)
    return {"raw": raw, "labels": labels, "hf": hf, "lf": lf,
            "manifest": accept_corpus}


@pytest.fixture(scope="session")
def accept_model(accept_data):
    """The criterion-1 training run; elapsed seconds kept for the time bound."""
    t0 = time.time()
    model, report = net.train_arrays(
        net.init_model(net.NetConfig(seed=0)),
        [accept_data["hf"], accept_data["lf"]],
        accept_data["labels"],
        net.TrainConfig(epochs=TRAIN_EPOCHS, seed=0),
    )
    return {"model": model, "report": report, "seconds": time.time() - t0}


@pytest.fixture(scope="session")
def tiny_trained_model():
    """A quickly trained small detector for pipeline-level tests."""
    rng = np.random.default_rng(123)
    cfg = synth.SynthConfig(count_per_class=100, side=32, seed=11)
    patches, labels = [], []
    for i in range(cfg.count_per_class):
        kind = synth.SMOOTH_KINDS[i % 3]
        bits = cfg.bits[i % 3]
        base = synth.gen_background(kind, 32, int(rng.integers(2 ** 63)))
        patches.append(synth.apply_banding(base, bits))
        labels.append(1)
        base = synth.gen_background(kind, 32, int(rng.integers(2 ** 63)))
        patches.append(synth.dither_quantize(base, bits, int(rng.integers(2 ** 63))))
        labels.append(0)
    raw = np.stack(patches)
    hf, lf = compute_freq_stacks(raw)
    ncfg = net.NetConfig(branch_channels=(8, 16), early_tap_channels=8,
                         input_side=32, seed=3)
    model, report = net.train_arrays(
        net.init_model(ncfg), [hf, lf], np.array(labels, dtype=float),
        net.TrainConfig(epochs=15, seed=3),
    )
    return model
