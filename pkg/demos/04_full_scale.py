"""The full-scale experiment at its reference settings.

This is the real thing: 1000 power-law inputs, 40 symbols, messages up to 30
positions, speaker hidden 100 / listener hidden 600, 1500 epochs of 100
batches of 512 samples, six seeds. On a single CPU core this takes days; it
exists as a documented long-running target, not something to run casually.
The equivalent CLI invocation is:

    zlalab train --system standard,lazimpa --seeds 0,1,2,3,4,5 \
        --out runs/full-scale --jobs 2 --log-every 10

followed by, per run,

    zlalab analyze --run runs/full-scale/lazimpa/seed0 --out analysis/seed0

Expected outcome for lazimpa across successful seeds (uniform accuracy
above 0.97): mean length near 5.5, weighted mean near 3.8, a strongly
significant abbreviation pattern, and roughly 60% information density;
the standard baseline instead pins its lengths near the 30-symbol cap.

Run:  ZLALAB_FULL_SCALE=1 python demos/04_full_scale.py
"""

import os
import sys

from zlalab import TrainConfig, train
from zlalab.metrics import l_token, l_type, randomization_test

if not os.environ.get("ZLALAB_FULL_SCALE"):
    print(__doc__)
    print("Set ZLALAB_FULL_SCALE=1 to actually start it.")
    sys.exit(0)

for seed in range(6):
    config = TrainConfig(system="lazimpa", seed=seed)  # all defaults = reference settings
    print(f"seed {seed}: training {config.epochs} epochs "
          f"({config.batches_per_epoch} x {config.batch_size} samples each)...")
    trace = train(config, progress=lambda e, a, l, x: print(f"  epoch {e}: acc={a:.3f} len={l:.2f}", flush=True))
    print(f"seed {seed}: success={trace.success} "
          f"L_type={l_type(trace.language):.2f} L_token={l_token(trace.language):.2f} "
          f"p_zla={randomization_test(trace.language)[0]:.2e}")
