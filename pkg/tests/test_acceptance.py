"""End-to-end acceptance checks.

Each test exercises one top-level requirement and reports a PASS/FAIL line in
the terminal summary (see conftest). The heavy artifacts — the seed-7 corpus,
its frequency-map stacks, and the trained detector — are shared session
fixtures, so the file reads top to bottom as: train once, then probe
separability, variant ordering, metric correctness, gradients, hand values,
solver behavior, severity ordering, determinism, and timing.
"""

import json
import math
from dataclasses import replace

import numpy as np
from scipy import stats

from fsband import net
from fsband.cli import main
from fsband.evaluation import (ScoredSet, _variant_inputs, auroc, auprc,
                               benchmark_speed, evaluate_scores)
from fsband.freqmaps import hfm_array, lfm_array
from fsband.imgcore import Image, save_pgm
from fsband.masking import MaskingParams, spatial_freq_array, weight
from fsband.metric import detect
from fsband.synth import apply_banding

from conftest import (ABLATE_CHANNELS, ABLATE_EPOCHS, ABLATE_SEEDS,
                      record_criterion)


# ---------------------------------------------------------------------------
# 1. separability at desk scale
# ---------------------------------------------------------------------------

def test_criterion_1_separability(accept_data, accept_model):
    labels = accept_data["labels"]
    _, hold = net.split_indices(labels.size, 0.8, 0)
    scores = net.predict_batch(accept_model["model"],
                               [accept_data["hf"][hold], accept_data["lf"][hold]])
    rep = evaluate_scores(scores, labels[hold])
    seconds = accept_model["seconds"]
    ok = rep.auroc >= 0.95 and rep.accuracy >= 0.90 and seconds < 900.0
    detail = (f"auroc {rep.auroc:.4f} auprc {rep.auprc:.4f} "
              f"acc {rep.accuracy:.4f} train {seconds:.0f}s")
    record_criterion(1, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 2. input-wiring ordering across seeds
# ---------------------------------------------------------------------------

def test_criterion_2_variant_ordering(accept_data):
    raw, hf, lf = accept_data["raw"], accept_data["hf"], accept_data["lf"]
    labels = accept_data["labels"]
    # one fixed holdout so every variant and seed is scored on the same set
    _, hold = net.split_indices(labels.size, 0.8, 0)
    base = net.NetConfig(branch_channels=ABLATE_CHANNELS,
                         early_tap_channels=ABLATE_CHANNELS[0])
    variants = ("SB-HFM", "SB-LFM", "DB-HFM", "FS-BAND")
    per_variant = {v: [] for v in variants}
    for seed in ABLATE_SEEDS:
        for variant in variants:
            n_branches, inputs = _variant_inputs(variant, raw, hf, lf)
            cfg = replace(base, n_branches=n_branches, seed=seed)
            trained, _ = net.train_arrays(
                net.init_model(cfg), inputs, labels,
                net.TrainConfig(epochs=ABLATE_EPOCHS, seed=seed))
            scores = net.predict_batch(trained, [x[hold] for x in inputs])
            per_variant[variant].append(auroc(ScoredSet(scores, labels[hold])))
    mean = {v: float(np.mean(a)) for v, a in per_variant.items()}
    ok = (mean["FS-BAND"] >= mean["DB-HFM"]
          and mean["FS-BAND"] - mean["SB-HFM"] >= 0.02
          and mean["FS-BAND"] - mean["SB-LFM"] >= 0.02)
    detail = (f"FS {mean['FS-BAND']:.4f} DB-HFM {mean['DB-HFM']:.4f} "
              f"SB-HFM {mean['SB-HFM']:.4f} SB-LFM {mean['SB-LFM']:.4f}")
    record_criterion(2, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 3. ranking metrics against brute-force oracles
# ---------------------------------------------------------------------------

def _pairwise_auroc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum(int(np.sum(p > neg)) for p in pos)
    ties = sum(int(np.sum(p == neg)) for p in pos)
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def _enumerated_auprc(scores, labels):
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    n_pos = int(y.sum())
    area, prev_recall = 0.0, 0.0
    tp = fp = 0
    i = 0
    while i < s.size:
        j = i
        while j < s.size and s[j] == s[i]:
            tp += int(y[j])
            fp += int(1 - y[j])
            j += 1
        recall = tp / n_pos
        area += (tp / (tp + fp)) * (recall - prev_recall)
        prev_recall = recall
        i = j
    return area


def test_criterion_3_metric_oracles():
    rng = np.random.default_rng(31)
    worst_roc = worst_prc = 0.0
    for _ in range(100):
        n = int(rng.integers(10, 201))
        # quarter-grid scores so ties are common
        scores = rng.integers(0, 5, size=n) / 4.0
        labels = rng.integers(0, 2, size=n)
        labels[:2] = (0, 1)
        s = ScoredSet(scores, labels.astype(float))
        worst_roc = max(worst_roc, abs(auroc(s) - _pairwise_auroc(scores, labels)))
        worst_prc = max(worst_prc, abs(auprc(s) - _enumerated_auprc(scores, labels)))
    ok = worst_roc <= 1e-9 and worst_prc <= 1e-9
    detail = f"max dev auroc {worst_roc:.1e} auprc {worst_prc:.1e}"
    record_criterion(3, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 4. analytic gradients vs central differences
# ---------------------------------------------------------------------------

def test_criterion_4_gradient_check():
    tiny = net.NetConfig(branch_channels=(2, 2), early_tap_channels=2,
                         input_side=8, seed=5)
    model = net.init_model(tiny, dtype=np.float64)
    rng = np.random.default_rng(9)
    inputs = [rng.uniform(0.0, 2.0, size=(4, 8, 8)),
              rng.uniform(0.0, 1.0, size=(4, 8, 8))]
    y = np.array([0.0, 1.0, 1.0, 0.0])
    _, grads, _ = net.loss_and_gradients(model, inputs, y)
    flat = net._flat_grads(grads)
    step = 1e-4
    worst = 0.0
    for param, grad in zip(model.parameters(), flat):
        coords = rng.choice(param.size, size=min(20, param.size), replace=False)
        for idx in coords:
            pos = np.unravel_index(idx, param.shape)
            keep = param[pos]
            param[pos] = keep + step
            up, _, _ = net.loss_and_gradients(model, inputs, y)
            param[pos] = keep - step
            dn, _, _ = net.loss_and_gradients(model, inputs, y)
            param[pos] = keep
            numeric = (up - dn) / (2.0 * step)
            denom = max(abs(numeric), abs(grad[pos]), 1e-8)
            worst = max(worst, abs(numeric - grad[pos]) / denom)
    ok = worst <= 1e-3
    detail = f"max rel err {worst:.2e}"
    record_criterion(4, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 5. hand-derived unit values
# ---------------------------------------------------------------------------

def test_criterion_5_hand_values():
    step_img = np.zeros((16, 16))
    step_img[:, 8:] = 1.0
    edge_peak = float(hfm_array(step_img).max())

    cols = np.tile(np.array([0.0, 1.0, 0.0, 1.0]), (4, 1))
    cf = spatial_freq_array(cols).cf

    w = weight(2.5, 1.5, MaskingParams(gamma=1.5, side=64))
    bce = net.bce_loss(0.5, 1)

    devs = {
        "edge": abs(edge_peak - (2.0 + math.sqrt(2.0))),
        "cf": abs(cf - math.sqrt(0.75)),
        "weight": abs(w - 1.015625),
        "bce": abs(bce - math.log(2.0)),
    }
    worst = max(devs.values())
    ok = worst <= 1e-9
    detail = " ".join(f"{k} {v:.1e}" for k, v in devs.items())
    record_criterion(5, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 6. smoothing objective descent and total-variation reduction
# ---------------------------------------------------------------------------

def _tv(a):
    return float(np.abs(np.diff(a, axis=0)).sum() + np.abs(np.diff(a, axis=1)).sum())


def test_criterion_6_solver_descent():
    rng = np.random.default_rng(17)
    worst_rise = 0.0
    tv_ok = True
    for i in range(50):
        if i % 2 == 0:
            patch = rng.uniform(0.0, 1.0, size=(32, 32))
        else:
            ramp = np.tile(np.linspace(0.1, 0.9, 32), (32, 1))
            patch = np.clip(ramp + rng.normal(0.0, 0.05, size=(32, 32)), 0.0, 1.0)
        result = lfm_array(patch, record_energy=True)
        trace = np.array(result.energy_trace)
        worst_rise = max(worst_rise, float(np.max(np.diff(trace), initial=0.0)))
        tv_ok = tv_ok and _tv(result.data) <= _tv(patch) + 1e-9
    ok = worst_rise <= 1e-9 and tv_ok
    detail = f"max energy rise {worst_rise:.1e}, tv reduced on all: {tv_ok}"
    record_criterion(6, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 7. score tracks severity across bit depths
# ---------------------------------------------------------------------------

def test_criterion_7_severity_ordering(accept_model):
    model = accept_model["model"]
    rng = np.random.default_rng(23)
    side = 192
    yy, xx = np.mgrid[0:side, 0:side] / (side - 1)
    q = {3: [], 4: [], 5: []}
    for _ in range(50):
        theta = rng.uniform(0.0, np.pi)
        plane = math.cos(theta) * xx + math.sin(theta) * yy
        lo = rng.uniform(0.0, 0.2)
        hi = rng.uniform(0.8, 1.0)
        span = plane.max() - plane.min()
        field = lo + (hi - lo) * (plane - plane.min()) / span
        for bits in (3, 4, 5):
            img = Image.from_array(apply_banding(field, bits))
            _, res = detect(img, model)
            q[bits].append(res.q)
    m3, m4, m5 = (float(np.mean(q[b])) for b in (3, 4, 5))

    def sign_p(a, b):
        diffs = np.array(a) - np.array(b)
        n_eff = int(np.sum(diffs != 0.0))
        wins = int(np.sum(diffs > 0.0))
        return stats.binomtest(wins, n_eff, 0.5, alternative="greater").pvalue

    p34 = sign_p(q[3], q[4])
    p45 = sign_p(q[4], q[5])
    ok = m3 > m4 > m5 and p34 < 0.01 and p45 < 0.01
    detail = f"mean Q {m3:.4f} > {m4:.4f} > {m5:.4f}, p {p34:.1e}/{p45:.1e}"
    record_criterion(7, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 8. byte-level determinism through the command line
# ---------------------------------------------------------------------------

def test_criterion_8_cli_determinism(tmp_path):
    corpus = tmp_path / "corpus"
    assert main(["synth", "--out-dir", str(corpus), "--count", "100",
                 "--side", "32", "--seed", "21"]) == 0
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(
        {"net": {"branch_channels": [8, 16], "early_tap_channels": 8}}))

    model_bytes = []
    for name in ("m1.fsbd", "m2.fsbd"):
        path = tmp_path / name
        assert main(["train", str(corpus / "manifest.jsonl"),
                     "--model-out", str(path), "--epochs", "3", "--seed", "2",
                     "--config", str(cfg_path)]) == 0
        model_bytes.append(path.read_bytes())
    models_match = model_bytes[0] == model_bytes[1]

    ramp = np.tile(np.linspace(0.05, 0.95, 96), (96, 1))
    image_path = tmp_path / "banded.pgm"
    save_pgm(apply_banding(ramp, 3), image_path)
    json_bytes = []
    for name in ("d1", "d2"):
        out_dir = tmp_path / name
        assert main(["detect", str(image_path), str(tmp_path / "m1.fsbd"),
                     "--out-dir", str(out_dir)]) == 0
        json_bytes.append((out_dir / "banded_result.json").read_bytes())
    detects_match = json_bytes[0] == json_bytes[1]

    ok = models_match and detects_match
    detail = f"model bytes equal: {models_match}, result json equal: {detects_match}"
    record_criterion(8, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 9. timing harness sanity
# ---------------------------------------------------------------------------

def test_criterion_9_speed_scaling(accept_data, accept_model):
    model = accept_model["model"]
    raw = accept_data["raw"]
    spp_small = benchmark_speed(model, raw[:16], repetitions=3)
    spp_big = benchmark_speed(model, raw[:32], repetitions=3)
    finite = spp_small > 0.0 and math.isfinite(spp_small)
    ratio = spp_big / spp_small
    ok = finite and 0.5 <= ratio <= 1.5
    detail = f"{spp_small:.4f} s/patch @16, {spp_big:.4f} @32, ratio {ratio:.2f}"
    record_criterion(9, ok, detail)
    assert ok, detail
