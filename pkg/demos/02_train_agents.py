"""Train speaker/listener agents on a small reconstruction game and watch
the message statistics evolve.

The run below uses a deliberately small universe (30 inputs, 8 symbols,
messages up to 8 symbols) so it finishes in about a minute on a laptop.
Swap the `system` string for "standard", "lazy+standard" or
"standard+impatient" to see the ablations; TrainConfig() with no overrides
gives the full-scale setting (1000 inputs, 40 symbols, 30 positions,
1500 epochs), which needs days of CPU.

Run:  python demos/02_train_agents.py
"""

from zlalab import TrainConfig, train
from zlalab.metrics import l_token, l_type, randomization_test

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
    sched_beta1=200.0,  # small games: delay the length penalty until the tail is solved
    sched_beta2=3.0,
    speaker_hidden=32,
    listener_hidden=96,
    emb_dim=16,
    seed=0,
)


def show(epoch, acc, length, loss):
    if epoch % 25 == 0:
        print(f"  epoch {epoch:4d}: uniform accuracy {acc:.3f}, mean length {length:.2f}, loss {loss:.3f}")


print(f"training {config.system} on {config.n_inputs} inputs...")
trace = train(config, progress=show)

print()
print(f"success (uniform accuracy > {config.success_threshold}):", trace.success)
print(f"final mean length      {l_type(trace.language):.3f}")
print(f"final weighted length  {l_token(trace.language):.3f}")
p_left, p_right = randomization_test(trace.language, n_permutations=20_000)
print(f"abbreviation p-value   {p_left:.4f}  (small = frequent inputs get short messages)")
print()
print("messages for the five most frequent inputs:")
for rank in range(1, 6):
    print(f"  rank {rank}: {trace.language.messages[rank - 1]}")
print("messages for the five rarest inputs:")
for rank in range(config.n_inputs - 4, config.n_inputs + 1):
    print(f"  rank {rank}: {trace.language.messages[rank - 1]}")
