import numpy as np
import pytest

from zlalab import game
from zlalab.errors import ConfigurationError


class TestInputSpace:
    def test_powerlaw_rank1_matches_harmonic_sum(self):
        space = game.InputSpace(1000, "powerlaw")
        harmonic = np.sum(1.0 / np.arange(1, 1001))
        assert game.input_probability(space, 1) == pytest.approx(1.0 / harmonic, abs=1e-15)
        assert game.input_probability(space, 1) == pytest.approx(0.133592, abs=1e-6)
        assert harmonic == pytest.approx(7.485470, abs=1e-6)

    def test_uniform(self):
        space = game.InputSpace(1000, "uniform")
        for k in (1, 500, 1000):
            assert game.input_probability(space, k) == pytest.approx(0.001, abs=1e-15)

    def test_powerlaw_two_inputs(self):
        space = game.InputSpace(2, "powerlaw")
        assert game.input_probability(space, 2) == pytest.approx(1.0 / 3.0, abs=1e-15)

    @pytest.mark.parametrize("n,dist", [(1, "uniform"), (7, "powerlaw"), (1000, "powerlaw"), (1000, "uniform")])
    def test_table_sums_to_one(self, n, dist):
        space = game.InputSpace(n, dist)
        assert abs(space.probs.sum() - 1.0) < 1e-12

    def test_powerlaw_strictly_decreasing(self):
        space = game.InputSpace(500, "powerlaw")
        assert np.all(np.diff(space.probs) < 0.0)

    def test_rank_out_of_range(self):
        space = game.InputSpace(10, "uniform")
        with pytest.raises(ValueError):
            game.input_probability(space, 0)
        with pytest.raises(ValueError):
            game.input_probability(space, 11)

    def test_unknown_distribution(self):
        with pytest.raises(ConfigurationError):
            game.InputSpace(10, "gaussian")


class TestSampling:
    def test_monte_carlo_matches_table(self):
        space = game.InputSpace(1000, "powerlaw")
        draws = game.sample_inputs(space, np.random.default_rng(7), 1_000_000)
        freq1 = np.mean(draws == 1)
        assert abs(freq1 - 0.1336) < 0.003

    def test_single_input_always_rank_one(self):
        space = game.InputSpace(1, "uniform")
        draws = game.sample_inputs(space, np.random.default_rng(0), 100)
        assert np.all(draws == 1)

    def test_fixed_seed_reproducible(self):
        space = game.InputSpace(50, "powerlaw")
        a = game.sample_inputs(space, np.random.default_rng(99), 1000)
        b = game.sample_inputs(space, np.random.default_rng(99), 1000)
        assert np.array_equal(a, b)

    def test_draws_in_range(self):
        space = game.InputSpace(17, "powerlaw")
        draws = game.sample_inputs(space, np.random.default_rng(3), 10_000)
        assert draws.min() >= 1 and draws.max() <= 17

    def test_scalar_sampler(self):
        space = game.InputSpace(5, "uniform")
        assert 1 <= game.sample_input(space, np.random.default_rng(1)) <= 5


class TestMessages:
    def test_lengths(self):
        assert game.message_length((0,)) == 1
        assert game.message_length((1, 2, 0)) == 3

    def test_max_length_message(self):
        alphabet = game.Alphabet(voc_size=4, max_len=5)
        m = (1, 2, 3, 1, 0)
        game.validate_message(alphabet, m)
        assert game.message_length(m) == alphabet.max_len

    def test_invalid_messages(self):
        alphabet = game.Alphabet(voc_size=4, max_len=3)
        with pytest.raises(ValueError):
            game.validate_message(alphabet, (1, 2))  # no terminator
        with pytest.raises(ValueError):
            game.validate_message(alphabet, (0, 1, 0))  # interior terminator
        with pytest.raises(ValueError):
            game.validate_message(alphabet, (1, 1, 1, 0))  # too long
        with pytest.raises(ValueError):
            game.validate_message(alphabet, (9, 0))  # unknown symbol

    def test_alphabet_validation(self):
        with pytest.raises(ConfigurationError):
            game.Alphabet(voc_size=1, max_len=5)
        with pytest.raises(ConfigurationError):
            game.Alphabet(voc_size=5, max_len=0)


class TestLanguageRoundTrip:
    def test_tsv_round_trip_is_identical(self, tmp_path):
        alphabet = game.Alphabet(voc_size=5, max_len=4)
        space = game.InputSpace(3, "powerlaw")
        lang = game.Language(alphabet, [(1, 0), (2, 3, 0), (0,)], space.probs)
        path = tmp_path / "lang.tsv"
        game.language_to_tsv(lang, path)
        back = game.language_from_tsv(path)
        assert back == lang

    def test_empty_dump_rejected(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        with pytest.raises(ValueError):
            game.language_from_tsv(path)

    def test_mismatched_counts_rejected(self):
        with pytest.raises(ConfigurationError):
            game.Language(game.Alphabet(3, 3), [(0,)], np.array([0.5, 0.5]))
