"""Reference codes and the efficiency yardsticks.

Builds the three baselines every emergent language is compared against and
prints their length statistics:

* optimal coding  - shortest messages assigned to the most frequent inputs
* monkey typing   - symbols drawn uniformly until the terminator appears
* natural language - a word-frequency list, if you have one on disk

Run:  python demos/01_reference_codes.py
"""

import numpy as np

from zlalab import (
    l_token,
    l_type,
    monkey_language,
    monkey_mean_length,
    optimal_coding,
    randomization_test,
)
from zlalab.refcodes import monkey_lengths

rng = np.random.default_rng(0)

print("Optimal coding over 1000 power-law inputs, as the alphabet shrinks:")
print(f"{'voc_size':>9} {'L_type':>8} {'L_token':>8} {'p_zla':>10}")
for voc in (40, 30, 20, 10):
    lang = optimal_coding(voc, 1000, "powerlaw")
    p_left, _ = randomization_test(lang, n_permutations=20_000, rng=rng)
    print(f"{voc:>9} {l_type(lang):>8.3f} {l_token(lang):>8.3f} {p_left:>10.2e}")

print()
print("The shortest message is the bare terminator; the top-ranked inputs get")
print("the shortest codes, so the weighted mean sits below the plain mean.")

print()
print("Monkey typing (voc=40, max_len=30): random typing is already mildly")
print("efficient, because short messages are simply more likely to occur.")
lengths = monkey_lengths(40, 30, 200_000, rng)
print(f"  sampled mean length  {lengths.mean():.3f}")
print(f"  closed-form mean     {monkey_mean_length(40, 30):.3f}")

monkey = monkey_language(40, 30, 1000, "powerlaw", np.random.default_rng(1))
p_left, p_right = randomization_test(monkey, n_permutations=20_000, rng=rng)
print(f"  p_zla of one sampled monkey language: {p_left:.3f} (not significant;")
print("   lengths are random with respect to input frequency)")
