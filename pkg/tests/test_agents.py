import numpy as np
import pytest

from zlalab import agents, numcore
from zlalab.game import Alphabet, InputSpace

from conftest import finite_difference, assert_grads_close


def tiny_setup(rng, n_inputs=5, voc_size=4, max_len=4, hidden=3):
    alphabet = Alphabet(voc_size, max_len)
    speaker = agents.init_speaker(rng, n_inputs, voc_size, hidden=hidden, emb_dim=hidden)
    listener = agents.init_listener(rng, n_inputs, voc_size, hidden=hidden, emb_dim=hidden)
    return alphabet, speaker, listener


class TestSpeakerRollout:
    def test_saturated_terminator_bias_gives_bare_message(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        speaker.b_out[alphabet.eos] = 50.0
        roll = agents.speaker_rollout(speaker, alphabet, 3, "sample", rng)
        assert roll.message() == (0,)
        assert roll.lengths[0] == 1
        assert roll.n_sampled[0] == 1  # the terminator was chosen, not forced

    def test_starved_terminator_forces_max_length(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        speaker.b_out[alphabet.eos] = -50.0
        roll = agents.speaker_rollout(speaker, alphabet, 1, "sample", rng)
        m = roll.message()
        assert len(m) == alphabet.max_len
        assert m[-1] == alphabet.eos and alphabet.eos not in m[:-1]
        assert roll.n_sampled[0] == alphabet.max_len - 1  # forced step contributes nothing
        assert roll.step_logp.shape[1] == alphabet.max_len - 1

    def test_greedy_is_deterministic(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        a = agents.speaker_rollout(speaker, alphabet, 2, "greedy")
        b = agents.speaker_rollout(speaker, alphabet, 2, "greedy")
        assert a.message() == b.message()

    def test_sampling_reproducible_under_seed(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        ranks = np.array([1, 2, 3, 4, 5])
        a = agents.speaker_rollout_batch(speaker, alphabet, ranks, "sample", np.random.default_rng(7))
        b = agents.speaker_rollout_batch(speaker, alphabet, ranks, "sample", np.random.default_rng(7))
        assert np.array_equal(a.symbols, b.symbols)
        assert np.array_equal(a.logp, b.logp)

    def test_logp_is_sum_of_step_logps(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        roll = agents.speaker_rollout_batch(speaker, alphabet, np.arange(1, 6), "sample", rng)
        assert np.allclose(roll.logp, roll.step_logp.sum(axis=1), atol=1e-12)

    def test_replay_scores_the_given_path(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        roll = agents.speaker_rollout_batch(speaker, alphabet, np.arange(1, 6), "sample", rng)
        replay = agents.speaker_replay(speaker, alphabet, roll.ranks, roll.messages())
        assert replay.messages() == roll.messages()
        assert np.allclose(replay.logp, roll.logp, atol=1e-12)
        assert np.allclose(replay.entropy, roll.entropy, atol=1e-12)

    def test_replay_probabilities_sum_to_one_over_message_space(self, rng):
        """All possible messages of the tiny game partition probability."""
        alphabet, speaker, _ = tiny_setup(rng, voc_size=3, max_len=3)
        symbols = [s for s in range(3) if s != alphabet.eos]
        messages = [(alphabet.eos,)]
        messages += [(a, alphabet.eos) for a in symbols]
        messages += [(a, b, alphabet.eos) for a in symbols for b in symbols]
        ranks = np.full(len(messages), 2)
        replay = agents.speaker_replay(speaker, alphabet, ranks, messages)
        assert np.exp(replay.logp).sum() == pytest.approx(1.0, abs=1e-9)

    def test_max_len_one_always_bare_terminator(self, rng):
        alphabet = Alphabet(4, 1)
        speaker = agents.init_speaker(rng, 3, 4, hidden=3, emb_dim=3)
        roll = agents.speaker_rollout(speaker, alphabet, 1, "sample", rng)
        assert roll.message() == (0,)
        assert roll.n_sampled[0] == 0
        assert roll.logp[0] == 0.0
        assert roll.entropy[0] == 0.0

    def test_bad_rank_rejected(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        with pytest.raises(ValueError):
            agents.speaker_rollout(speaker, alphabet, 6, "greedy")


class TestListeners:
    def test_standard_forward_matches_hand_stepped_chain(self, rng):
        """Oracle: four explicit cell calls plus the head, no batching."""
        _, _, listener = tiny_setup(rng)
        m = (1, 2, 3, 0)
        h = np.zeros(3)
        c = np.zeros(3)
        for s in m:
            h, c, _ = numcore.lstm_cell_forward(listener.cell, listener.emb[s], h, c)
        expected = np.exp(numcore.log_softmax(h @ listener.w_out + listener.b_out))
        dist, _ = agents.standard_listener_forward(listener, m)
        assert np.allclose(dist, expected, atol=1e-12)

    def test_zero_head_gives_uniform_distribution(self, rng):
        _, _, listener = tiny_setup(rng)
        listener.w_out[:] = 0.0
        listener.b_out[:] = 0.0
        dist, _ = agents.standard_listener_forward(listener, (1, 0))
        assert np.allclose(dist, 0.2, atol=1e-12)

    def test_bare_terminator_message_single_distribution(self, rng):
        _, _, listener = tiny_setup(rng)
        dists, _ = agents.impatient_listener_forward(listener, (0,))
        assert dists.shape == (1, 5)
        assert abs(dists.sum() - 1.0) < 1e-9

    def test_one_distribution_per_symbol(self, rng):
        _, _, listener = tiny_setup(rng)
        for m in [(0,), (1, 0), (3, 2, 1, 0)]:
            dists, _ = agents.impatient_listener_forward(listener, m)
            assert dists.shape[0] == len(m)

    def test_prefix_causality(self, rng):
        """Truncation oracle: the distribution at position k only depends on
        the symbols up to k, so truncating the message cannot change it."""
        _, _, listener = tiny_setup(rng)
        full, _ = agents.impatient_listener_forward(listener, (1, 2, 3, 0))
        truncated, _ = agents.impatient_listener_forward(listener, (1, 2, 0))
        assert np.allclose(full[:2], truncated[:2], atol=1e-12)
        shorter, _ = agents.impatient_listener_forward(listener, (1, 0))
        assert np.allclose(full[:1], shorter[:1], atol=1e-12)


class TestTestPrediction:
    def test_head_bias_dominates(self, rng):
        _, _, listener = tiny_setup(rng)
        listener.b_out[4 - 1] = 50.0
        for m in [(0,), (1, 2, 0)]:
            assert agents.listener_test_prediction("standard", listener, m) == 4
            assert agents.listener_test_prediction("impatient", listener, m) == 4

    def test_impatient_single_position_message(self, rng):
        _, _, listener = tiny_setup(rng)
        dists, _ = agents.impatient_listener_forward(listener, (0,))
        assert agents.listener_test_prediction("impatient", listener, (0,)) == int(np.argmax(dists[0])) + 1

    def test_impatient_equals_standard_at_final_position(self, rng):
        _, _, listener = tiny_setup(rng)
        m = (2, 1, 3, 0)
        dists, _ = agents.impatient_listener_forward(listener, m)
        final, _ = agents.standard_listener_forward(listener, m)
        assert np.allclose(dists[-1], final, atol=1e-12)
        assert agents.listener_test_prediction("impatient", listener, m) == int(np.argmax(final)) + 1

    def test_unknown_system_rejected(self, rng):
        _, _, listener = tiny_setup(rng)
        with pytest.raises(ValueError):
            agents.listener_test_prediction("eager", listener, (0,))


class TestGradients:
    """Finite-difference checks through the full unrolled computations."""

    def test_speaker_logprob_gradient(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        ranks = np.array([1, 4])
        roll = agents.speaker_rollout_batch(speaker, alphabet, ranks, "sample", rng)
        msgs = roll.messages()
        tensors = speaker.tensors()

        def objective():
            return float(agents.speaker_replay(speaker, alphabet, ranks, msgs).logp.sum())

        fd = finite_difference(objective, tensors)
        r = agents.speaker_replay(speaker, alphabet, ranks, msgs)
        S, B, V = r.probs.shape
        gl = np.zeros((S, B, V))
        rows = np.arange(B)
        for t in range(S):
            g = -r.probs[t].copy()
            g[rows, r.symbols[:, t]] += 1.0
            gl[t] = np.where(r.active[t][:, None], g, 0.0)
        analytic = agents.speaker_backward(speaker, r, gl)
        assert_grads_close(analytic, fd, 1e-5)

    def test_speaker_entropy_gradient(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        ranks = np.array([2, 3])
        roll = agents.speaker_rollout_batch(speaker, alphabet, ranks, "sample", rng)
        msgs = roll.messages()
        tensors = speaker.tensors()

        def objective():
            return float(agents.speaker_replay(speaker, alphabet, ranks, msgs).entropy.sum())

        fd = finite_difference(objective, tensors)
        r = agents.speaker_replay(speaker, alphabet, ranks, msgs)
        S, B, V = r.probs.shape
        gl = np.zeros((S, B, V))
        ns = np.maximum(r.n_sampled, 1)
        for t in range(S):
            h_t = numcore.entropy_from_probs(r.probs[t])
            g = numcore.entropy_grad_logits(r.probs[t], h_t) / ns[:, None]
            gl[t] = np.where(r.active[t][:, None], g, 0.0)
        analytic = agents.speaker_backward(speaker, r, gl)
        assert_grads_close(analytic, fd, 1e-5)

    def test_standard_listener_loss_gradient(self, rng):
        alphabet, speaker, listener = tiny_setup(rng)
        ranks = np.array([1, 2, 5])
        roll = agents.speaker_rollout_batch(speaker, alphabet, ranks, "sample", rng)
        symbols, lengths = roll.symbols, roll.lengths
        tensors = listener.tensors()
        rows = np.arange(3)

        def objective():
            b = agents.listener_forward_batch(listener, symbols, lengths, per_position=False)
            return float(-b.logp_final[rows, ranks - 1].sum())

        fd = finite_difference(objective, tensors)
        b = agents.listener_forward_batch(listener, symbols, lengths, per_position=False)
        gl = np.exp(b.logp_final)
        gl[rows, ranks - 1] -= 1.0
        analytic = agents.listener_backward(listener, b, grad_logits_final=gl)
        assert_grads_close(analytic, fd, 1e-5)

    def test_impatient_listener_loss_gradient(self, rng):
        alphabet, speaker, listener = tiny_setup(rng)
        ranks = np.array([3, 4])
        roll = agents.speaker_rollout_batch(speaker, alphabet, ranks, "sample", rng)
        symbols, lengths = roll.symbols, roll.lengths
        tensors = listener.tensors()
        rows = np.arange(2)

        def objective():
            b = agents.listener_forward_batch(listener, symbols, lengths, per_position=True)
            T = b.logp_steps.shape[0]
            mask = np.arange(T)[:, None] < lengths[None, :]
            per_pos = b.logp_steps[:, rows, ranks - 1]
            return float((-(per_pos * mask).sum(axis=0) / lengths).sum())

        fd = finite_difference(objective, tensors)
        b = agents.listener_forward_batch(listener, symbols, lengths, per_position=True)
        T = b.logp_steps.shape[0]
        mask = np.arange(T)[:, None] < lengths[None, :]
        gl = np.exp(b.logp_steps) * mask[:, :, None]
        gl[:, rows, ranks - 1] -= mask
        gl /= lengths[None, :, None]
        analytic = agents.listener_backward(listener, b, grad_logits_steps=gl)
        assert_grads_close(analytic, fd, 1e-5)


class TestCheckpoint:
    def test_round_trip(self, rng, tmp_path):
        alphabet, speaker, listener = tiny_setup(rng)
        path = tmp_path / "ck.npz"
        agents.save_checkpoint(path, speaker, listener, meta={"system": "lazimpa", "voc_size": 4})
        s2, l2, meta = agents.load_checkpoint(path)
        assert meta["system"] == "lazimpa"
        for k, v in speaker.tensors().items():
            assert np.array_equal(v, s2.tensors()[k])
        for k, v in listener.tensors().items():
            assert np.array_equal(v, l2.tensors()[k])

    def test_loaded_params_give_identical_behavior(self, rng, tmp_path):
        alphabet, speaker, listener = tiny_setup(rng)
        path = tmp_path / "ck.npz"
        agents.save_checkpoint(path, speaker, listener)
        s2, l2, _ = agents.load_checkpoint(path)
        a = agents.speaker_rollout(speaker, alphabet, 2, "greedy").message()
        b = agents.speaker_rollout(s2, alphabet, 2, "greedy").message()
        assert a == b
        assert agents.predict_ranks(l2, [a])[0] == agents.predict_ranks(listener, [a])[0]


class TestGreedyLanguage:
    def test_fixed_params_pure_function(self, rng):
        alphabet, speaker, _ = tiny_setup(rng)
        space = InputSpace(5, "powerlaw")
        a = agents.greedy_language(speaker, alphabet, space.probs)
        b = agents.greedy_language(speaker, alphabet, space.probs, batch_size=2)
        assert a.messages == b.messages
        assert a.n_inputs == 5
