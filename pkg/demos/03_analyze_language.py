"""Post-hoc analysis of a converged language: where does the information sit?

Trains a quick run, then walks the informativeness protocol by hand:
substitute each symbol with a random other symbol, re-run the listener, and
mark the position informative if the prediction flips. The derived metrics
(effective length, information density, positional spectrum, minimal
required reading length) all come from that matrix.

Run:  python demos/03_analyze_language.py
"""

import numpy as np

from zlalab import TrainConfig, train, make_predictor
from zlalab.metrics import (
    informative_part_lengths,
    informativeness,
    l_eff,
    l_type,
    minimal_required_length,
    positional_spectrum,
    randomization_test,
    rho_inf,
)
from zlalab.refcodes import effective_vocab_size, unigram_distribution

config = TrainConfig(
    system="lazimpa",
    n_inputs=30,
    voc_size=8,
    max_len=8,
    epochs=220,
    batches_per_epoch=50,
    batch_size=64,
    lr=0.007,
    entropy_coeff=0.15,
    sched_beta1=200.0,
    sched_beta2=3.0,
    speaker_hidden=32,
    listener_hidden=96,
    emb_dim=16,
    seed=0,
)
print("training a small run first (same setting as demo 02)...")
trace = train(config)
print(f"  converged at uniform accuracy {trace.uniform_acc[-1]:.3f}")

lang = trace.language
predict = make_predictor(trace.listener)
rng = np.random.default_rng(0)

lam = informativeness(lang, predict, rng, repeats=3)
print()
print(f"informativeness over {lam.n} correctly decoded inputs "
      f"({lam.n_excluded} excluded):")
print(f"  mean length (with terminator)   L_type = {l_type(lang):.3f}")
print(f"  informative symbols per message L_eff  = {l_eff(lam):.3f}")
print(f"  information density            rho_inf = {rho_inf(lam):.3f}")

positions, fractions, counts = positional_spectrum(lam)
print()
print("fraction of informative symbols by position (1 = first symbol):")
for p, f, c in zip(positions, fractions, counts):
    bar = "#" * int(round(20 * f))
    print(f"  position {p}: {f:.2f} {bar}  ({c} messages)")

part = informative_part_lengths(lam, lang)
p_left, _ = randomization_test(part, n_permutations=20_000, rng=rng)
print()
print(f"restricting messages to informative symbols: mean {part.lengths.mean():.2f}, "
      f"abbreviation p-value {p_left:.4f}")

u = unigram_distribution(lang)
print(f"effective vocabulary size (entropy-matched): {effective_vocab_size(u):.2f} "
      f"of {config.voc_size - 1} usable symbols")

mrl = minimal_required_length(lang, trace.listener)
print(f"minimal reading length for a correct, stable prediction: "
      f"mean {mrl.mean:.2f} symbols ({mrl.n_violations} non-monotone cases)")
