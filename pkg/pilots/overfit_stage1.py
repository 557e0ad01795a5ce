"""Pilot run that fixes the stage-1 overfit threshold: one synthetic 64x64 image,
desk-scale generator, L1 + perceptual. Prints the L1 trajectory and the first step
at which L1 drops below 0.05; the output is kept in pilots/overfit_stage1.txt."""
import sys
import time

import torch

from vidcolor import synth
from vidcolor.training import Stage1Trainer, TrainConfig, build_models

torch.set_num_threads(1)
steps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
clip = synth.make_clip(synth.SynthSpec(height=64, width=64, length=1), seed=0)
config = TrainConfig.for_stage(1, batch_size=1, max_steps=steps, epochs=10 ** 6, seed=0)
gen, _ = build_models(config)
trainer = Stage1Trainer(gen, clip.frames[:1], config)
t0 = time.time()
first = None
for i in range(steps):
    row = trainer.step()
    if first is None and row["l1"] < 0.05:
        first = i + 1
    if (i + 1) % 25 == 0:
        print(f"step {i + 1:4d}  l1 {row['l1']:.5f}  perceptual {row['perceptual']:.5f}  {time.time() - t0:.0f}s",
              flush=True)
print(f"first step with l1 < 0.05: {first}")
print(f"total time {time.time() - t0:.0f}s")
