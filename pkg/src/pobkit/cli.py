"""Single executable for the whole pipeline.

Subcommands cover data generation (gen-spark, gen-lp), inspection
(analyze), model work (train, gradcheck, score), evaluation (eval) and
prefix-bias diagnostics (diagnose).  Every output data file is written
atomically and accompanied by a .meta.json sidecar echoing the resolved
configuration and input checksums, so a run can always be reproduced
from its artifacts.

Exit codes: 0 success, 1 usage error, 2 input/parse error,
3 computation error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from pobkit import __version__
from pobkit.charts import bar_chart, line_chart, save_svg
from pobkit.diagnostics import (
    DiagnosticsError,
    concentration_curve,
    contributions,
    weight_norms,
    write_concentration_csv,
    write_contributions_csv,
)
from pobkit.generator import (
    BinSpec,
    GenerationError,
    GenerationReport,
    generate_pob_lp,
    generate_pob_spark,
)
from pobkit.manifest import ManifestError, read_manifest, read_phrase_rows, write_manifest
from pobkit.matcher import (
    MatcherConfig,
    MatcherError,
    PhonemeVocab,
    TrainSettings,
    VocabularyError,
    export_aligned_features,
    export_scoring_weights,
    init_params,
    load_params,
    run_gradient_check,
    save_params,
    score_records,
    train,
)
from pobkit.metrics import (
    MetricError,
    ScoreSet,
    eer_threshold,
    first_diff_histogram,
    metrics_summary,
    read_scores_csv,
    write_histogram_csv,
    write_scores_csv,
)
from pobkit.phonemes import LexiconParseError, OOVError, load_lexicon_file
from pobkit.util import atomic_write_text, dump_json, file_sha256

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_COMPUTE = 3

GRADCHECK_TOLERANCE = 1e-4


class _UsageProblem(Exception):
    pass


class _InputProblem(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; this toolkit reserves 2 for
    input files, so usage problems are remapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_lexicon(path):
    try:
        return load_lexicon_file(path)
    except (OSError, LexiconParseError) as exc:
        raise _InputProblem(f"cannot load lexicon {path}: {exc}") from exc


def _load_words(path) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _InputProblem(f"cannot read word list {path}: {exc}") from exc
    words = [w.strip().lower() for w in text.splitlines() if w.strip()]
    if not words:
        raise _InputProblem(f"word list {path} is empty")
    return words


def _load_manifest(path):
    try:
        return read_manifest(path)
    except (OSError, ManifestError) as exc:
        raise _InputProblem(f"cannot load manifest {path}: {exc}") from exc


def _load_params(path):
    try:
        return load_params(path)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, MatcherError) as exc:
        raise _InputProblem(f"cannot load model {path}: {exc}") from exc


def _load_scores(path):
    try:
        return read_scores_csv(path)
    except (OSError, MetricError) as exc:
        raise _InputProblem(f"cannot load scores {path}: {exc}") from exc


def _write_meta(out_path, doc: dict) -> None:
    meta_path = Path(out_path).with_suffix(".meta.json")
    atomic_write_text(meta_path, dump_json(doc))


def cmd_gen_spark(args) -> int:
    lexicon = _load_lexicon(args.dict)
    words = _load_words(args.words)
    bins = args.bins
    if (args.n_pairs is None) == (args.per_bin is None):
        raise _UsageProblem("specify exactly one of --n-pairs or --per-bin")
    if args.per_bin is not None:
        per_bin = args.per_bin
    else:
        if args.n_pairs % len(bins) != 0:
            raise _UsageProblem(
                f"--n-pairs {args.n_pairs} is not divisible by {len(bins)} bins"
            )
        per_bin = args.n_pairs // len(bins)
    if per_bin < 1:
        raise _UsageProblem("per-bin pair count must be >= 1")
    records, report = generate_pob_spark(
        lexicon,
        words,
        per_bin=per_bin,
        bins=bins,
        l_max=args.l_max,
        max_distance=args.max_distance,
        seed=args.seed,
    )
    meta = {
        "seed": args.seed,
        "l_max": args.l_max,
        "max_distance": args.max_distance,
        "bins": [list(edge) for edge in bins.edges],
        "dict_checksum": file_sha256(args.dict),
        "word_list_checksum": file_sha256(args.words),
        "generation_report": report.as_dict(),
    }
    write_manifest(records, meta, args.out)
    print(f"wrote {len(records)} records ({len(records) // 3} pairs) to {args.out}")
    for label, count in report.per_bin_counts.items():
        print(f"  bin {label}: {count} pairs")
    if report.skipped_bins:
        print(f"  skipped bins: {', '.join(report.skipped_bins)}")
    print(f"  retries: {report.retries}")
    return EXIT_OK


def cmd_gen_lp(args) -> int:
    try:
        rows = read_phrase_rows(args.infile)
    except (OSError, ManifestError) as exc:
        raise _InputProblem(f"cannot load phrase rows {args.infile}: {exc}") from exc
    words = _load_words(args.words)
    lexicon = _load_lexicon(args.dict)
    report = GenerationReport()
    records = generate_pob_lp(
        rows, words, lexicon, random.Random(args.seed), report=report
    )
    meta = {
        "seed": args.seed,
        "input_checksum": file_sha256(args.infile),
        "dict_checksum": file_sha256(args.dict),
        "word_list_checksum": file_sha256(args.words),
        "generation_report": report.as_dict(),
    }
    write_manifest(records, meta, args.out)
    positives = sum(1 for r in records if r.label)
    print(
        f"wrote {len(records)} records ({positives} positive, "
        f"{len(records) - positives} overlap negative) to {args.out}"
    )
    return EXIT_OK


def cmd_analyze(args) -> int:
    records, _ = _load_manifest(args.infile)
    hist = first_diff_histogram(records, args.bins)
    write_histogram_csv(args.out_csv, hist)
    _write_meta(
        args.out_csv,
        {
            "command": "analyze",
            "input": str(args.infile),
            "input_checksum": file_sha256(args.infile),
            "bins": [list(e) for e in hist.bins.edges],
            "total_in_bins": hist.total_in_bins,
            "overflow_count": hist.overflow_count,
        },
    )
    if args.out_svg:
        svg = bar_chart(
            hist.ratios.tolist(),
            hist.bins.labels(),
            title="first-different phoneme index distribution",
        )
        save_svg(args.out_svg, svg)
    for label, ratio in zip(hist.bins.labels(), hist.ratios):
        print(f"  {label}: {ratio:.4f}")
    if hist.overflow_count:
        print(f"  beyond last bin: {hist.overflow_count} records")
    return EXIT_OK


def cmd_train(args) -> int:
    records, _ = _load_manifest(args.manifest)
    if args.dict:
        lexicon = _load_lexicon(args.dict)
        vocab = PhonemeVocab(lexicon.inventory)
    else:
        if not records:
            raise _InputProblem(f"manifest {args.manifest} has no records")
        vocab = PhonemeVocab.from_records(records)
    config = MatcherConfig(
        vocab_size=vocab.size,
        embed_dim=args.dim,
        max_positions=args.m,
        noise_sigma=args.noise_sigma,
        frame_dup=args.frame_dup,
        scorer_kind=args.scorer,
    )
    settings = TrainSettings(
        steps=args.steps,
        batch_size=args.batch,
        learning_rate=args.lr,
        val_fraction=args.val_fraction,
    )
    params, report = train(records, config, settings, args.seed, vocab=vocab)
    save_params(params, args.out_model)
    report_doc = dict(report)
    report_doc["config"] = asdict(config)
    report_doc["settings"] = asdict(settings)
    report_doc["manifest_checksum"] = file_sha256(args.manifest)
    atomic_write_text(args.out_report, dump_json(report_doc))
    print(
        f"trained {args.scorer} scorer for {report['steps']} steps: "
        f"train_acc={report['train_acc']:.4f} val_acc={report['val_acc']:.4f}"
    )
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    vocab = PhonemeVocab([f"P{i}" for i in range(args.vocab - 1)])
    failures = 0
    for idx in range(args.configs):
        kind = ("baseline", "eps")[idx % 2]
        config = MatcherConfig(
            vocab_size=args.vocab,
            embed_dim=args.dim,
            max_positions=args.m,
            noise_sigma=0.0,
            frame_dup=int(rng.integers(1, 4)),
            scorer_kind=kind,
        )
        params = init_params(config, vocab, int(rng.integers(0, 2**31)))
        batch = []
        for _ in range(3):
            p = int(rng.integers(1, args.m + 1))
            q = int(rng.integers(1, args.m + 1))
            batch.append(
                (
                    rng.integers(1, args.vocab, size=p),
                    rng.integers(1, args.vocab, size=q),
                    bool(rng.integers(0, 2)),
                )
            )
        errors = run_gradient_check(params, batch)
        worst = max(errors.values())
        status = "ok" if worst <= GRADCHECK_TOLERANCE else "FAIL"
        print(f"config {idx + 1:2d} [{kind:8s}] max rel err {worst:.3e} {status}")
        if worst > GRADCHECK_TOLERANCE:
            failures += 1
    if failures:
        print(f"{failures} of {args.configs} configurations failed", file=sys.stderr)
        return EXIT_COMPUTE
    print(f"all {args.configs} configurations within {GRADCHECK_TOLERANCE:g}")
    return EXIT_OK


def _base_path(path, ext) -> Path:
    base = Path(path)
    if base.suffix == ext:
        base = base.with_suffix("")
    return base


def cmd_diagnose(args) -> int:
    params = _load_params(args.model)
    records, _ = _load_manifest(args.manifest)
    if not records:
        raise _InputProblem(f"manifest {args.manifest} has no records")
    try:
        samples = export_aligned_features(params, records, args.samples)
    except VocabularyError as exc:
        raise _InputProblem(str(exc)) from exc
    weights = export_scoring_weights(params)
    contrib = contributions(weights, samples)
    curve = concentration_curve(weights)
    base = _base_path(args.out_csv, ".csv")
    contrib_path = Path(f"{base}.contributions.csv")
    curve_path = Path(f"{base}.concentration.csv")
    write_contributions_csv(contrib_path, weight_norms(weights), contrib)
    write_concentration_csv(curve_path, curve)
    _write_meta(
        contrib_path,
        {
            "command": "diagnose",
            "model": str(args.model),
            "model_checksum": file_sha256(args.model),
            "manifest_checksum": file_sha256(args.manifest),
            "samples": len(samples),
            "scorer_kind": weights.kind,
            "excess_area": curve.excess_area,
        },
    )
    if args.out_svg:
        svg_base = _base_path(args.out_svg, ".svg")
        bars = bar_chart(
            contrib.tolist(),
            [str(k) for k in range(1, weights.m + 1)],
            title="position-wise contributions",
        )
        save_svg(f"{svg_base}.contributions.svg", bars)
        lines = line_chart(
            [
                ("rho(k)", [(frac, rho) for _, frac, rho in curve.points]),
                ("identity", [(frac, frac) for _, frac, _ in curve.points]),
            ],
            title="prefix concentration",
            y_max=1.0,
        )
        save_svg(f"{svg_base}.concentration.svg", lines)
    print(f"scorer kind: {weights.kind}")
    print(f"excess area: {curve.excess_area!r}")
    print(f"wrote {contrib_path} and {curve_path}")
    return EXIT_OK


def cmd_score(args) -> int:
    params = _load_params(args.model)
    records, _ = _load_manifest(args.manifest)
    if not records:
        raise _InputProblem(f"manifest {args.manifest} has no records")
    try:
        rows = score_records(params, records)
    except VocabularyError as exc:
        raise _InputProblem(f"manifest does not fit model vocabulary: {exc}") from exc
    scores = ScoreSet.from_rows(rows)
    write_scores_csv(args.out, scores)
    _write_meta(
        args.out,
        {
            "command": "score",
            "model": str(args.model),
            "model_checksum": file_sha256(args.model),
            "manifest_checksum": file_sha256(args.manifest),
            "n_records": len(scores),
        },
    )
    print(f"wrote {len(scores)} scores to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    scores = _load_scores(args.scores)
    if args.calibrate_eer:
        _, threshold = eer_threshold(scores)
    else:
        threshold = args.threshold
    summary = metrics_summary(scores, threshold)
    atomic_write_text(args.out, dump_json(summary))
    _write_meta(
        args.out,
        {
            "command": "eval",
            "scores": str(args.scores),
            "scores_checksum": file_sha256(args.scores),
            "threshold_mode": "eer-calibrated" if args.calibrate_eer else "fixed",
        },
    )
    print(
        f"eer={summary['eer']:.4f} auc={summary['auc']:.4f} "
        f"acc={summary['acc']:.4f} (threshold {summary['threshold']:.4f})"
    )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(
        prog="pobkit",
        description="partial-overlap benchmark toolkit: data generation, "
        "matcher training, metrics and prefix-bias diagnostics",
    )
    parser.add_argument("--version", action="version", version=f"pobkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(
            name,
            help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        p.set_defaults(func=func)
        return p

    p = add("gen-spark", cmd_gen_spark, "generate a phonetic-neighbor benchmark manifest")
    p.add_argument("--dict", required=True, help="pronouncing dictionary file")
    p.add_argument("--words", required=True, help="word pool, one word per line")
    p.add_argument("--n-pairs", type=int, help="total pairs (split evenly over bins)")
    p.add_argument("--per-bin", type=int, help="pairs per first-diff bin")
    p.add_argument("--l-max", type=int, default=25, help="phrase phoneme budget")
    p.add_argument("--max-distance", type=int, default=2, help="neighbor edit distance cap")
    p.add_argument("--bins", type=BinSpec.parse, default=BinSpec(),
                   help="first-diff bins as LO-HI,LO-HI,... (default 0-4,...,20-24)")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.add_argument("--out", required=True, help="output manifest (JSONL)")

    p = add("gen-lp", cmd_gen_lp, "derive prefix-overlap negatives from positive rows")
    p.add_argument("--in", dest="infile", required=True,
                   help="positive phrase rows (CSV or JSONL with anchor/query/label)")
    p.add_argument("--words", required=True, help="common words to append")
    p.add_argument("--dict", required=True, help="pronouncing dictionary file")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--out", required=True, help="output manifest (JSONL)")

    p = add("analyze", cmd_analyze, "first-diff-index distribution of a manifest")
    p.add_argument("--in", dest="infile", required=True, help="manifest to analyze")
    p.add_argument("--bins", type=BinSpec.parse, default=BinSpec(),
                   help="histogram bins as LO-HI,LO-HI,...")
    p.add_argument("--out-csv", required=True, help="histogram CSV output")
    p.add_argument("--out-svg", help="optional SVG bar chart")

    p = add("train", cmd_train, "train the desk-scale matcher on a manifest")
    p.add_argument("--manifest", required=True, help="training manifest")
    p.add_argument("--scorer", choices=["baseline", "eps"], required=True,
                   help="scoring head")
    p.add_argument("--dict", help="lexicon for the phoneme inventory "
                   "(default: inventory of the manifest)")
    p.add_argument("--dim", type=int, default=16, help="embedding dimension")
    p.add_argument("--m", type=int, default=25, help="max anchor positions")
    p.add_argument("--steps", type=int, default=2000, help="optimizer steps")
    p.add_argument("--batch", type=int, default=64, help="batch size")
    p.add_argument("--lr", type=float, default=0.01, help="learning rate")
    p.add_argument("--noise-sigma", type=float, default=0.1,
                   help="audio surrogate noise std during training")
    p.add_argument("--frame-dup", type=int, default=2, help="frames per query phoneme")
    p.add_argument("--val-fraction", type=float, default=0.1, help="validation split")
    p.add_argument("--seed", type=int, default=0, help="training seed")
    p.add_argument("--out-model", required=True, help="parameter JSON output")
    p.add_argument("--out-report", required=True, help="training report JSON output")

    p = add("gradcheck", cmd_gradcheck, "verify analytic gradients against finite differences")
    p.add_argument("--dim", type=int, default=4, help="embedding dimension")
    p.add_argument("--m", type=int, default=6, help="max anchor positions")
    p.add_argument("--vocab", type=int, default=10, help="vocabulary size incl. pad")
    p.add_argument("--configs", type=int, default=20, help="random configurations to try")
    p.add_argument("--seed", type=int, default=0, help="rng seed")

    p = add("diagnose", cmd_diagnose, "prefix-bias diagnostics of a trained model")
    p.add_argument("--model", required=True, help="parameter JSON from train")
    p.add_argument("--manifest", required=True, help="manifest supplying feature samples")
    p.add_argument("--samples", type=int, default=200, help="feature samples to export")
    p.add_argument("--out-csv", required=True,
                   help="output base; writes BASE.contributions.csv and BASE.concentration.csv")
    p.add_argument("--out-svg", help="optional SVG base; writes BASE.contributions.svg "
                   "and BASE.concentration.svg")

    p = add("score", cmd_score, "score manifest records with a trained model")
    p.add_argument("--model", required=True, help="parameter JSON from train")
    p.add_argument("--manifest", required=True, help="records to score")
    p.add_argument("--out", required=True, help="score CSV output")

    p = add("eval", cmd_eval, "EER/AUC/accuracy from a score CSV")
    p.add_argument("--scores", required=True, help="score CSV from the score command")
    p.add_argument("--threshold", type=float, default=0.5, help="accuracy threshold")
    p.add_argument("--calibrate-eer", action="store_true",
                   help="take the accuracy threshold from the EER crossing instead")
    p.add_argument("--out", required=True, help="metrics JSON output")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageProblem as exc:
        print(f"pobkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _InputProblem as exc:
        print(f"pobkit {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OOVError, LexiconParseError, ManifestError, VocabularyError) as exc:
        print(f"pobkit {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"pobkit {args.command}: i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GenerationError, MatcherError, DiagnosticsError, MetricError) as exc:
        print(f"pobkit {args.command}: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except RuntimeError as exc:
        print(f"pobkit {args.command}: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
