import json

import numpy as np
import pytest

from zlalab import cli
from zlalab.game import language_from_tsv
from zlalab.metrics import l_token, l_type


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


SMOKE = (
    "--system", "standard", "--seeds", "1", "--n-inputs", "2", "--voc-size", "3",
    "--max-len", "3", "--epochs", "3", "--batches-per-epoch", "4", "--batch-size", "16",
    "--speaker-hidden", "8", "--listener-hidden", "8", "--emb-dim", "6",
)


class TestTrainCommand:
    def test_smoke_artifacts_exist_and_reparse(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("train", *SMOKE, "--out", out) == 0
        seed_dir = out / "standard" / "seed1"
        for name in ("trace.csv", "loss_components.csv", "language.tsv", "checkpoint.npz", "summary.json"):
            assert (seed_dir / name).exists(), name
        lang = language_from_tsv(seed_dir / "language.tsv")
        assert lang.n_inputs == 2
        summary = json.loads((seed_dir / "summary.json").read_text())
        assert summary["system"] == "standard"
        assert "final_l_token" in summary
        agg = json.loads((out / "aggregate.json").read_text())
        assert agg["standard"]["n_seeds"] == 1

    def test_repeat_runs_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli("train", *SMOKE, "--out", a)
        run_cli("train", *SMOKE, "--out", b)
        ta = (a / "standard" / "seed1" / "trace.csv").read_bytes()
        tb = (b / "standard" / "seed1" / "trace.csv").read_bytes()
        assert ta == tb
        la = (a / "standard" / "seed1" / "language.tsv").read_bytes()
        lb = (b / "standard" / "seed1" / "language.tsv").read_bytes()
        assert la == lb

    def test_four_system_ablation_produces_four_aggregate_rows(self, tmp_path):
        out = tmp_path / "ablation"
        code = run_cli(
            "train", "--system", "standard,lazy+standard,standard+impatient,lazimpa",
            "--seeds", "0", "--n-inputs", "2", "--voc-size", "3", "--max-len", "3",
            "--epochs", "2", "--batches-per-epoch", "2", "--batch-size", "8",
            "--speaker-hidden", "6", "--listener-hidden", "6", "--emb-dim", "4",
            "--out", out,
        )
        assert code == 0
        agg = json.loads((out / "aggregate.json").read_text())
        assert sorted(agg) == sorted(["standard", "lazy+standard", "standard+impatient", "lazimpa"])

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "# smoke experiment\n"
            "system = standard\n"
            "n_inputs = 2\nvoc_size = 3\nmax_len = 3\n"
            "epochs = 2\nbatches_per_epoch = 2\nbatch_size = 8\n"
            "speaker_hidden = 6\nlistener_hidden = 6\nemb_dim = 4\n"
            "seeds = 3\n"
        )
        out = tmp_path / "out"
        assert run_cli("train", "--config", cfg, "--epochs", "1", "--out", out) == 0
        summary = json.loads((out / "standard" / "seed3" / "summary.json").read_text())
        assert summary["epochs_run"] == 1  # flag overrode the file

    def test_unknown_config_key_fails(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("warp_speed = 9\n")
        assert run_cli("train", "--config", cfg, "--out", tmp_path / "x") == 2

    def test_aggregate_recomputes_from_summaries(self, tmp_path):
        out = tmp_path / "multi"
        run_cli("train", *SMOKE[:2], "--seeds", "1,2", *SMOKE[4:], "--out", out)
        summaries = [
            json.loads((out / "standard" / f"seed{s}" / "summary.json").read_text())
            for s in (1, 2)
        ]
        agg = json.loads((out / "standard" / "aggregate.json").read_text())
        succ = [s for s in summaries if s["success"]]
        if succ:
            expected = float(np.mean([s["final_uniform_accuracy"] for s in succ]))
            assert agg["final_uniform_accuracy_mean"] == pytest.approx(expected, abs=1e-12)


class TestReferenceCommand:
    def test_optimal_three_by_three(self, tmp_path):
        out = tmp_path / "opt.tsv"
        assert run_cli("reference", "optimal", "--voc-size", 3, "--n-inputs", 3, "--out", out) == 0
        lang = language_from_tsv(out)
        assert [len(m) for m in lang.messages] == [1, 2, 2]

    def test_monkey_deterministic_under_seed(self, tmp_path):
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        for path in (a, b):
            run_cli("reference", "monkey", "--voc-size", 10, "--max-len", 10,
                    "--n-inputs", 50, "--seed", 7, "--out", path)
        assert a.read_bytes() == b.read_bytes()

    def test_veff_optimal_uniform_unigrams_match_plain_optimal(self, tmp_path):
        uni = tmp_path / "unigrams.txt"
        uni.write_text("".join(f"{s} {1/39}\n" for s in range(1, 40)))
        a, b = tmp_path / "veff.tsv", tmp_path / "opt.tsv"
        assert run_cli("reference", "veff-optimal", "--unigram-file", uni,
                       "--n-inputs", 200, "--out", a) == 0
        assert run_cli("reference", "optimal", "--voc-size", 40, "--n-inputs", 200, "--out", b) == 0
        assert language_from_tsv(a).messages == language_from_tsv(b).messages

    def test_infeasible_reference_fails(self, tmp_path):
        assert run_cli("reference", "optimal", "--voc-size", 3, "--n-inputs", 100,
                       "--max-len", 3, "--out", tmp_path / "x.tsv") == 2

    def test_dump_reparses_to_identical_language(self, tmp_path):
        from zlalab.refcodes import optimal_coding

        out = tmp_path / "opt.tsv"
        run_cli("reference", "optimal", "--voc-size", 7, "--n-inputs", 40, "--out", out)
        assert language_from_tsv(out) == optimal_coding(7, 40, max_len=30)


class TestAnalyzeCommand:
    def test_optimal_dump_reference_metrics(self, tmp_path):
        dump = tmp_path / "opt.tsv"
        run_cli("reference", "optimal", "--voc-size", 40, "--n-inputs", 1000, "--out", dump)
        out = tmp_path / "analysis"
        assert run_cli("analyze", "--language", dump, "--permutations", 3000, "--out", out) == 0
        report = json.loads((out / "metrics.json").read_text())
        assert report["l_type"] == pytest.approx(2.959, abs=1e-9)
        assert report["l_token"] == pytest.approx(2.2948, abs=1e-3)
        assert report["p_zla"] < 0.001
        assert report["l_eff"] is None  # no listener available
        assert (out / "length_by_rank.csv").exists()
        assert (out / "unigrams.csv").exists()

    def test_constant_length_mapping_p_values_one(self, tmp_path):
        freq = tmp_path / "words.txt"
        freq.write_text("1 4 aa\n2 2 bb\n3 1 cc\n")
        out = tmp_path / "analysis"
        assert run_cli("analyze", "--frequency-list", freq, "--permutations", 500, "--out", out) == 0
        report = json.loads((out / "metrics.json").read_text())
        assert report["p_zla_left"] == 1.0 and report["p_zla_right"] == 1.0

    def test_frequency_list_marks_listener_fields_absent(self, tmp_path):
        freq = tmp_path / "words.txt"
        freq.write_text("1 100 the\n2 50 of\n3 30 and\n4 20 询\n")
        out = tmp_path / "analysis"
        assert run_cli("analyze", "--frequency-list", freq, "--permutations", 200, "--out", out) == 0
        report = json.loads((out / "metrics.json").read_text())
        assert report["l_type"] is not None
        assert report["l_eff"] is None and report["rho_inf"] is None and report["v_eff"] is None

    def test_run_dir_analysis_with_checkpoint(self, tmp_path):
        out = tmp_path / "run"
        run_cli("train", "--system", "lazimpa", "--seeds", "1", "--n-inputs", "2",
                "--voc-size", "3", "--max-len", "3", "--epochs", "3",
                "--batches-per-epoch", "4", "--batch-size", "16",
                "--speaker-hidden", "8", "--listener-hidden", "8", "--emb-dim", "6",
                "--out", out)
        analysis = tmp_path / "analysis"
        assert run_cli("analyze", "--run", out / "lazimpa" / "seed1",
                       "--permutations", 200, "--out", analysis) == 0
        report = json.loads((analysis / "metrics.json").read_text())
        assert report["delta_stab"] is None or report["delta_stab"] >= 0.0  # 3-epoch series
        assert (analysis / "learning_path.csv").exists()
        # informativeness fields exist because the run dir carries a checkpoint
        assert report["rho_inf"] is not None
        assert "minimal_required_length_mean" in report

    def test_substitution_repeats_without_checkpoint_fails(self, tmp_path):
        dump = tmp_path / "opt.tsv"
        run_cli("reference", "optimal", "--voc-size", 5, "--n-inputs", 10, "--out", dump)
        code = run_cli("analyze", "--language", dump, "--substitution-repeats", 2,
                       "--out", tmp_path / "x")
        assert code == 2

    def test_smooth_flag_adds_column(self, tmp_path):
        dump = tmp_path / "opt.tsv"
        run_cli("reference", "optimal", "--voc-size", 5, "--n-inputs", 30, "--out", dump)
        out = tmp_path / "sm"
        run_cli("analyze", "--language", dump, "--permutations", 100, "--smooth", 5, "--out", out)
        header = (out / "length_by_rank.csv").read_text().splitlines()[0]
        assert header == "rank,length,smoothed_length"

    def test_analysis_deterministic_under_seed(self, tmp_path):
        dump = tmp_path / "opt.tsv"
        run_cli("reference", "optimal", "--voc-size", 8, "--n-inputs", 60, "--out", dump)
        outs = []
        for name in ("x", "y"):
            out = tmp_path / name
            run_cli("analyze", "--language", dump, "--permutations", 2000, "--seed", 3, "--out", out)
            outs.append((out / "metrics.json").read_bytes())
        assert outs[0] == outs[1]


class TestExitCodes:
    def test_usage_error_is_one(self):
        assert pytest.raises(SystemExit, run_cli, "train").value.code == 1
        assert pytest.raises(SystemExit, run_cli, "bogus-command").value.code == 1

    def test_runtime_error_is_two(self, tmp_path):
        assert run_cli("analyze", "--language", tmp_path / "missing.tsv", "--out", tmp_path / "x") == 2

    def test_missing_input_selector_is_two(self, tmp_path):
        assert run_cli("analyze", "--out", tmp_path / "x") == 2


class TestSweepCommand:
    def test_micro_sweep_layout(self, tmp_path):
        out = tmp_path / "sweep"
        code = run_cli(
            "sweep", "--system", "standard", "--seeds", "0",
            "--n-inputs", "2", "--epochs", "1", "--batches-per-epoch", "2",
            "--batch-size", "8", "--speaker-hidden", "6", "--listener-hidden", "6",
            "--emb-dim", "4", "--voc-sizes", "3,4", "--max-lens", "3",
            "--distributions", "powerlaw", "--out", out,
        )
        assert code == 0
        index = json.loads((out / "sweep.json").read_text())
        assert sorted(index) == ["voc3_len3_powerlaw", "voc4_len3_powerlaw"]
        assert (out / "voc3_len3_powerlaw" / "standard" / "seed0" / "trace.csv").exists()
