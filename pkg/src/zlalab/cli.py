"""Experiment orchestration: multi-seed training runs, parameter sweeps,
reference-code generation, and post-hoc analysis of language dumps.

Subcommands
-----------
train      run one or more (system, seed) training runs, dump artifacts
analyze    compute the metrics report and plot-ready CSVs for a dump/run
reference  generate a reference code (optimal, monkey, veff-optimal) as TSV
sweep      grid of train invocations over voc_size / max_len / distribution

Every run writes: ``trace.csv`` (epoch series), ``loss_components.csv``,
``language.tsv`` (final input->message map), ``checkpoint.npz`` (parameters),
``summary.json``. Aggregates (mean +/- sd across successful seeds) land next
to the per-seed directories. Exit codes: 0 success, 1 usage, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import sys
from pathlib import Path

import numpy as np

from . import agents, metrics, refcodes, training
from .errors import ConfigurationError
from .game import language_from_tsv, language_to_tsv
from .training import SYSTEMS, TrainConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# config file


_CONFIG_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines (``#`` comments allowed) into TrainConfig
    keyword arguments. ``seeds`` may also be given as a comma list."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "seeds":
                out["seeds"] = [int(s) for s in value.split(",") if s.strip()]
            elif key in _CONFIG_FIELDS:
                out[key] = _coerce_field(key, value)
            else:
                raise ConfigurationError(f"{path}:{lineno}: unknown config key {key!r}")
    return out


def _coerce_field(key: str, value: str):
    typ = _CONFIG_FIELDS[key]
    if typ in (int, "int"):
        return int(value)
    if typ in (float, "float"):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# train


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--system", help=f"comma list out of {', '.join(SYSTEMS)}")
    p.add_argument("--seeds", help="comma list of seeds (default 0,1,2,3,4,5)")
    p.add_argument("--n-inputs", type=int, dest="n_inputs")
    p.add_argument("--voc-size", type=int, dest="voc_size")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--distribution", choices=("powerlaw", "uniform"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batches-per-epoch", type=int, dest="batches_per_epoch")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--entropy-coeff", type=float, dest="entropy_coeff")
    p.add_argument("--speaker-hidden", type=int, dest="speaker_hidden")
    p.add_argument("--listener-hidden", type=int, dest="listener_hidden")
    p.add_argument("--emb-dim", type=int, dest="emb_dim")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="runs in parallel (seed level)")
    p.add_argument("--log-every", type=int, default=0, help="print progress every N epochs")


_TRAIN_OVERRIDES = (
    "n_inputs", "voc_size", "max_len", "distribution", "epochs", "batches_per_epoch",
    "batch_size", "lr", "entropy_coeff", "speaker_hidden", "listener_hidden", "emb_dim",
)


def _build_specs(args) -> tuple[list[TrainConfig], list[int]]:
    base: dict = {}
    if args.config:
        base.update(parse_config_file(args.config))
    seeds = base.pop("seeds", [0, 1, 2, 3, 4, 5])
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    systems = [base.get("system", TrainConfig.system)]
    if args.system:
        systems = [s.strip() for s in args.system.split(",")]
    for name in _TRAIN_OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    base.pop("system", None)
    base.pop("seed", None)
    configs = [TrainConfig(system=system, seed=0, **base) for system in systems]
    return configs, seeds


def run_one(cfg: TrainConfig, outdir: Path, log_every: int = 0) -> dict:
    """Train one (config, seed) pair and write its artifact set."""
    outdir.mkdir(parents=True, exist_ok=True)
    progress = None
    if log_every:
        def progress(epoch, acc, length, loss):
            if epoch % log_every == 0 or epoch == cfg.epochs:
                print(f"[{cfg.system} seed={cfg.seed}] epoch {epoch}: "
                      f"uniform_acc={acc:.4f} mean_len={length:.3f} loss={loss:.4f}", flush=True)
    trace = training.train(cfg, progress=progress)

    training.trace_to_csv(trace, outdir / "trace.csv")
    training.loss_components_to_csv(trace, outdir / "loss_components.csv")
    language_to_tsv(trace.language, outdir / "language.tsv")
    agents.save_checkpoint(
        outdir / "checkpoint.npz",
        trace.speaker,
        trace.listener,
        meta=dataclasses.asdict(cfg),
    )
    summary = trace.summary()
    summary["final_l_type"] = metrics.l_type(trace.language)
    summary["final_l_token"] = metrics.l_token(trace.language)
    with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _run_one_star(job) -> dict:
    cfg, outdir, log_every = job
    return run_one(cfg, outdir, log_every)


def _aggregate(summaries: list[dict]) -> dict:
    """Mean +/- sd (over successful seeds) of the headline run statistics."""
    succ = [s for s in summaries if s["success"]]
    agg = {
        "n_seeds": len(summaries),
        "seeds": [s["seed"] for s in summaries],
        "successful_seeds": [s["seed"] for s in succ],
        "unsuccessful_seeds": [s["seed"] for s in summaries if not s["success"]],
    }
    for key in ("final_uniform_accuracy", "final_l_type", "final_l_token", "final_mean_loss"):
        vals = [s[key] for s in succ if s.get(key) is not None]
        if vals:
            agg[key + "_mean"] = float(np.mean(vals))
            agg[key + "_sd"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return agg


def cmd_train(args) -> int:
    configs, seeds = _build_specs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for cfg in configs:
        for seed in seeds:
            run_cfg = dataclasses.replace(cfg, seed=seed)
            jobs.append((run_cfg, out / cfg.system / f"seed{seed}", args.log_every))
    if args.jobs > 1 and len(jobs) > 1:
        with multiprocessing.Pool(min(args.jobs, len(jobs))) as pool:
            summaries = pool.map(_run_one_star, jobs)
    else:
        summaries = [_run_one_star(job) for job in jobs]

    aggregate = {}
    for cfg in configs:
        mine = [s for s in summaries if s["system"] == cfg.system]
        aggregate[cfg.system] = _aggregate(mine)
        with open(out / cfg.system / "aggregate.json", "w", encoding="utf-8") as fh:
            json.dump(aggregate[cfg.system], fh, indent=2, sort_keys=True)
    with open(out / "aggregate.json", "w", encoding="utf-8") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
    for system, agg in aggregate.items():
        mean = agg.get("final_l_type_mean")
        print(f"{system}: {len(agg['successful_seeds'])}/{agg['n_seeds']} successful"
              + (f", mean final length {mean:.3f}" if mean is not None else ""))
    return 0


# ---------------------------------------------------------------------------
# analyze


def _write_csv(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    run_dir = Path(args.run) if args.run else None
    lang = None
    mapping = None
    if args.frequency_list:
        mapping = refcodes.load_frequency_list(args.frequency_list)
    elif args.language:
        lang = language_from_tsv(args.language)
    elif run_dir:
        lang = language_from_tsv(run_dir / "language.tsv")
    else:
        raise ConfigurationError("analyze needs --language, --run or --frequency-list")

    checkpoint = args.checkpoint
    if checkpoint is None and run_dir and (run_dir / "checkpoint.npz").exists():
        checkpoint = run_dir / "checkpoint.npz"
    if args.substitution_repeats is not None and checkpoint is None:
        raise ConfigurationError(
            "informativeness metrics substitute symbols and re-run the listener; "
            "they need a parameter checkpoint (--checkpoint or a run directory)"
        )

    lam = None
    unigrams = None
    min_len_report = None
    informative_parts = None
    if lang is not None:
        try:
            unigrams = refcodes.unigram_distribution(lang)
        except ValueError:
            unigrams = None
        if checkpoint is not None:
            _, listener, meta = agents.load_checkpoint(checkpoint)
            predictor = agents.make_predictor(listener, lang.alphabet.eos)
            lam = metrics.informativeness(
                lang, predictor, rng, repeats=args.substitution_repeats or 1
            )
            informative_parts = metrics.informative_part_lengths(lam, lang)
            if meta.get("system") in ("standard+impatient", "lazimpa"):
                min_len_report = metrics.minimal_required_length(lang, listener)

    accuracy_series = None
    if run_dir and (run_dir / "trace.csv").exists():
        trace_rows = np.genfromtxt(run_dir / "trace.csv", delimiter=",", names=True)
        trace_rows = np.atleast_1d(trace_rows)
        accuracy_series = trace_rows["uniform_acc"]
        _write_csv(
            out / "learning_path.csv",
            "epoch,accuracy,mean_length",
            [(int(r["epoch"]), float(r["uniform_acc"]), float(r["mean_length"])) for r in trace_rows],
        )

    source = lang if lang is not None else mapping
    report = metrics.build_report(
        source, lam=lam, unigrams=unigrams, accuracy_series=accuracy_series,
        n_permutations=args.permutations, rng=rng,
    )

    payload = report.to_dict()
    if min_len_report is not None:
        payload["minimal_required_length_mean"] = min_len_report.mean
        payload["minimal_required_length_violations"] = min_len_report.n_violations
    if informative_parts is not None:
        payload["informative_parts"] = {"l_type": float(informative_parts.lengths.mean())}
        if informative_parts.n >= 2:
            ip_left, ip_right = metrics.randomization_test(informative_parts, args.permutations, rng)
            payload["informative_parts"]["p_zla_left"] = ip_left
            payload["informative_parts"]["p_zla_right"] = ip_right
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)

    # plot-ready curves
    m = metrics._as_mapping(source)
    rows = [(rank + 1, float(length)) for rank, length in enumerate(m.lengths)]
    if args.smooth:
        smoothed = metrics.sliding_average(m.lengths, args.smooth)
        _write_csv(out / "length_by_rank.csv", "rank,length,smoothed_length",
                   [(r, l, float(s)) for (r, l), s in zip(rows, smoothed)])
    else:
        _write_csv(out / "length_by_rank.csv", "rank,length", rows)
    if report.spectrum is not None:
        _write_csv(out / "spectrum.csv", "position,fraction_informative,n_messages",
                   [(p, float(f), c) for p, f, c in report.spectrum])
    if unigrams is not None:
        order = np.argsort(-unigrams.probs)
        _write_csv(out / "unigrams.csv", "rank,symbol,probability",
                   [(i + 1, int(unigrams.symbols[j]), float(unigrams.probs[j]))
                    for i, j in enumerate(order)])
    if min_len_report is not None:
        _write_csv(out / "minimal_required_length.csv", "rank,min_length",
                   [(int(r), int(l)) for r, l in zip(min_len_report.ranks, min_len_report.min_lengths)])

    print(report.table_row())
    return 0


# ---------------------------------------------------------------------------
# reference


def _load_unigram_file(path) -> refcodes.UnigramDistribution:
    """One probability per line, optionally preceded by a symbol id."""
    probs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            probs.append(float(parts[-1]))
    if not probs:
        raise ConfigurationError(f"no probabilities in {path}")
    p = np.array(probs)
    return refcodes.UnigramDistribution(p / p.sum())


def cmd_reference(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "optimal":
        lang = refcodes.optimal_coding(args.voc_size, args.n_inputs, args.distribution, args.max_len)
    elif args.kind == "monkey":
        lang = refcodes.monkey_language(
            args.voc_size, args.max_len, args.n_inputs, args.distribution, rng,
            eos_in_pool=not args.eos_out_of_pool,
        )
    elif args.kind == "veff-optimal":
        if not args.unigram_file:
            raise ConfigurationError("veff-optimal needs --unigram-file")
        unigrams = _load_unigram_file(args.unigram_file)
        lang = refcodes.veff_optimal_coding(unigrams, args.n_inputs, args.distribution)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigurationError(f"unknown reference kind {args.kind!r}")
    language_to_tsv(lang, args.out)
    print(f"{args.kind}: {lang.n_inputs} messages, mean length {metrics.l_type(lang):.4f} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    voc_sizes = [int(v) for v in args.voc_sizes.split(",")]
    max_lens = [int(v) for v in args.max_lens.split(",")]
    distributions = args.distributions.split(",")
    index = {}
    for voc in voc_sizes:
        for ml in max_lens:
            for dist in distributions:
                tag = f"voc{voc}_len{ml}_{dist}"
                sub = argparse.Namespace(**vars(args))
                sub.voc_size, sub.max_len, sub.distribution = voc, ml, dist
                sub.out = str(out / tag)
                code = cmd_train(sub)
                if code != 0:
                    return code
                with open(out / tag / "aggregate.json", encoding="utf-8") as fh:
                    index[tag] = json.load(fh)
    with open(out / "sweep.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zlalab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run training for one or more systems/seeds")
    _train_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_an = sub.add_parser("analyze", help="metrics report and curve CSVs for a dump or run")
    p_an.add_argument("--language", help="language TSV dump")
    p_an.add_argument("--run", help="run directory (uses its language/trace/checkpoint)")
    p_an.add_argument("--frequency-list", dest="frequency_list", help="natural-language word list")
    p_an.add_argument("--checkpoint", help="parameter checkpoint for informativeness metrics")
    p_an.add_argument("--permutations", type=int, default=metrics.DEFAULT_PERMUTATIONS)
    p_an.add_argument("--substitution-repeats", dest="substitution_repeats", type=int, default=None)
    p_an.add_argument("--smooth", type=int, default=0, help="sliding-average window for curve CSVs")
    p_an.add_argument("--seed", type=int, default=0, help="analysis rng seed")
    p_an.add_argument("--out", required=True)
    p_an.set_defaults(func=cmd_analyze)

    p_ref = sub.add_parser("reference", help="generate a reference code dump")
    p_ref.add_argument("kind", choices=("optimal", "monkey", "veff-optimal"))
    p_ref.add_argument("--voc-size", type=int, dest="voc_size", default=40)
    p_ref.add_argument("--max-len", type=int, dest="max_len", default=30)
    p_ref.add_argument("--n-inputs", type=int, dest="n_inputs", default=1000)
    p_ref.add_argument("--distribution", choices=("powerlaw", "uniform"), default="powerlaw")
    p_ref.add_argument("--seed", type=int, default=0)
    p_ref.add_argument("--eos-out-of-pool", action="store_true",
                       help="monkey variant: terminator competes with voc_size-1 symbols")
    p_ref.add_argument("--unigram-file", dest="unigram_file", help="for veff-optimal")
    p_ref.add_argument("--out", required=True, help="output TSV path")
    p_ref.set_defaults(func=cmd_reference)

    p_sw = sub.add_parser("sweep", help="train over a grid of voc_size/max_len/distribution")
    _train_flags(p_sw)
    p_sw.add_argument("--voc-sizes", dest="voc_sizes", default="10,20,30,40")
    p_sw.add_argument("--max-lens", dest="max_lens", default="20,30")
    p_sw.add_argument("--distributions", dest="distributions", default="powerlaw")
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, OSError, ValueError) as err:
        print(f"zlalab: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
