"""
Score versus banding severity
=============================

A useful banding score must do more than separate banded from clean: it
should rise as banding gets worse. Quantizing the same gradient to fewer
bits makes the steps wider and more visible, so sweeping bit depth gives a
natural severity ladder. This script trains a small model, then checks that
the scalar Q walks down the ladder as bit depth goes up.
"""

from pathlib import Path

import numpy as np

from fsband import (Image, NetConfig, PipelineConfig, SynthConfig, TrainConfig,
                    detect, gen_dataset, init_model)
from fsband.freqmaps import compute_freq_stacks
from fsband.net import train_arrays
from fsband.synth import apply_banding, dither_quantize, load_arrays

out = Path("demo_output")
out.mkdir(exist_ok=True)

# Train a compact detector (same recipe as the training demo).
side = 32
manifest = gen_dataset(SynthConfig(count_per_class=200, side=side, seed=6),
                       out / "train_corpus")
raw, labels = load_arrays(manifest)
hf, lf = compute_freq_stacks(raw, jobs=2)
model, report = train_arrays(
    init_model(NetConfig(branch_channels=(8, 16), early_tap_channels=8,
                         input_side=side, seed=0)),
    [hf, lf], labels, TrainConfig(learning_rate=3e-3, epochs=40, seed=0))
print(f"detector ready (holdout accuracy {report.final_holdout_accuracy:.3f})")

# Severity ladder: ten random gradient images, each quantized at 2..6 bits.
# Fewer bits = coarser steps = worse banding = higher Q, with the dithered
# version of the same field as the floor.
cfg = PipelineConfig(side=side)
rng = np.random.default_rng(3)
big = 128
yy, xx = np.mgrid[0:big, 0:big] / (big - 1)

ladder = {bits: [] for bits in (2, 3, 4, 5, 6)}
floor = []
for i in range(10):
    theta = rng.uniform(0, np.pi)
    plane = np.cos(theta) * xx + np.sin(theta) * yy
    field = 0.1 + 0.8 * (plane - plane.min()) / (plane.max() - plane.min())
    for bits in ladder:
        _, res = detect(Image.from_array(apply_banding(field, bits)), model, cfg)
        ladder[bits].append(res.q)
    _, res = detect(
        Image.from_array(dither_quantize(field, 4, int(rng.integers(2**63)))),
        model, cfg)
    floor.append(res.q)

print("\nbits  mean Q   (10 gradient images each)")
for bits, qs in ladder.items():
    bar = "#" * int(round(40 * np.mean(qs) / np.mean(ladder[2])))
    print(f"  {bits}   {np.mean(qs):7.4f}  {bar}")
print(f"dithered 4-bit floor: {np.mean(floor):7.4f}")

monotone = all(np.mean(ladder[b]) > np.mean(ladder[b + 1])
               for b in (2, 3, 4, 5))
print(f"\nmean Q strictly decreasing with bit depth: {monotone}")
