"""Command-line surface: synthetic data generation, experiment runs, reports.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.
Relative --out paths resolve under $OALSIM_OUTPUT_ROOT when it is set. Flag
overrides beat config-file values, which beat built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import from_dict
from .corpus import Corpus, SyntheticConfig, generate_synthetic, write_regions
from .errors import ConfigError, DataError, OalsimError
from .features import registry_table
from .harness import (
    Experiment,
    build_corpus,
    checkpoint_load,
    write_metrics_csv,
    write_summary,
)
from .stats import welch_t_test


def _out_dir(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get("OALSIM_OUTPUT_ROOT")
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["version"] = __version__
    payload["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def cmd_gen_data(args) -> int:
    out = _out_dir(args.out)
    corpus_path = out / "corpus.jsonl"
    if corpus_path.exists() and not args.force:
        raise DataError(f"{corpus_path} already exists; pass --force to overwrite")
    cfg = SyntheticConfig(
        n_regions=args.n_regions,
        dim=args.dim,
        n_predicates=args.n_predicates,
        coverage=(args.coverage[0], args.coverage[1]),
        description_length=(args.desc_len[0], args.desc_len[1]),
        seed=args.seed,
    )
    regions = generate_synthetic(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_regions(corpus_path, regions)
    _write_manifest(
        out,
        {
            "command": "gen-data",
            "config": dataclasses.asdict(cfg),
            "corpus_fingerprint": Corpus(regions).fingerprint(),
            "outputs": {"corpus": str(corpus_path)},
        },
    )
    print(f"wrote {len(regions)} regions to {corpus_path}")
    return 0


def _apply_overrides(data: dict, args) -> dict:
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        node = data
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {dotted}: {key} is not a section")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node[keys[-1]] = value
    exp = data.setdefault("experiment", {})
    if args.master_seed is not None:
        exp["master_seed"] = args.master_seed
    if args.policy is not None:
        exp["policy_kind"] = args.policy
    if args.ablate:
        exp["ablate"] = list(args.ablate)
    if args.checkpoints:
        exp["checkpoints"] = True
    return data


def cmd_run(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
    config = from_dict(_apply_overrides(data, args))

    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = build_corpus(config)
    experiment = Experiment(config, corpus=corpus)

    resume = checkpoint_load(args.resume) if args.resume else None
    checkpoint_dir = out / "checkpoints" if config.experiment.checkpoints else None
    transcript_path = out / "transcripts.jsonl" if args.export_transcripts else None
    result = experiment.run(
        resume=resume, checkpoint_dir=checkpoint_dir, transcript_path=transcript_path
    )

    metrics_path = out / "metrics.csv"
    summary_path = out / "summary.json"
    write_metrics_csv(metrics_path, result.metrics)
    write_summary(summary_path, result)
    with open(out / "feature_registry.json", "w", encoding="utf-8") as fh:
        json.dump(registry_table(), fh, indent=2)
    outputs = {"metrics": str(metrics_path), "summary": str(summary_path)}
    if transcript_path:
        outputs["transcripts"] = str(transcript_path)
    _write_manifest(
        out,
        {
            "command": "run",
            "config": config.to_dict(),
            "master_seed": config.experiment.master_seed,
            "corpus_fingerprint": result.corpus_fingerprint,
            "outputs": outputs,
        },
    )
    final = result.final_test_batch()
    print(
        f"run complete: final test batch success_rate={final.success_rate:.3f} "
        f"mean_length={final.mean_length:.2f}"
    )
    return 0


def _load_run(run_dir: Path) -> dict:
    manifest_path = run_dir / "manifest.json"
    summary_path = run_dir / "summary.json"
    if not manifest_path.exists() or not summary_path.exists():
        raise DataError(f"{run_dir} is missing manifest.json or summary.json")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    return {"dir": run_dir, "manifest": manifest, "summary": summary}


def cmd_report(args) -> int:
    runs = [_load_run(_out_dir(d)) for d in args.run_dirs]
    fingerprints = {r["manifest"]["corpus_fingerprint"] for r in runs}
    if len(fingerprints) > 1:
        raise DataError(
            "runs were produced from different corpora; comparisons must share data"
        )
    baseline_dir = _out_dir(args.baseline) if args.baseline else runs[0]["dir"]
    baseline = next((r for r in runs if r["dir"] == baseline_dir), None)
    if baseline is None:
        baseline = _load_run(baseline_dir)
        runs.append(baseline)

    base_final = baseline["summary"]["final_test_batch"]
    rows = []
    for r in runs:
        final = r["summary"]["final_test_batch"]
        row = {
            "run": r["dir"].name,
            "success_rate": final["success_rate"],
            "mean_length": final["mean_length"],
            "p_success": None,
            "p_length": None,
        }
        if r is not baseline:
            row["p_success"] = welch_t_test(
                final["success_indicators"], base_final["success_indicators"]
            ).p_two_sided
            row["p_length"] = welch_t_test(
                [float(v) for v in final["lengths"]],
                [float(v) for v in base_final["lengths"]],
            ).p_two_sided
        rows.append(row)

    def fmt_p(p):
        if p is None:
            return "baseline"
        marker = "*" if p < 0.05 else ""
        return f"{p:.4f}{marker}"

    header = f"{'run':<24} {'success':>8} {'length':>8} {'p_success':>12} {'p_length':>12}"
    print(header)
    print("-" * len(header))
    for row in rows:
        print(
            f"{row['run']:<24} {row['success_rate']:>8.3f} {row['mean_length']:>8.2f} "
            f"{fmt_p(row['p_success']):>12} {fmt_p(row['p_length']):>12}"
        )
    if args.out:
        with open(_out_dir(args.out), "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["run", "success_rate", "mean_length", "p_success", "p_length"]
            )
            writer.writeheader()
            writer.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oalsim",
        description="Opportunistic active learning dialog simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic corpus")
    gen.add_argument("--n-regions", type=int, default=600)
    gen.add_argument("--dim", type=int, default=32)
    gen.add_argument("--n-predicates", type=int, default=24)
    gen.add_argument("--coverage", type=float, nargs=2, default=[0.08, 0.30],
                     metavar=("LO", "HI"))
    gen.add_argument("--desc-len", type=int, nargs=2, default=[1, 3],
                     metavar=("LO", "HI"))
    gen.add_argument("--seed", type=int, default=13)
    gen.add_argument("--out", required=True)
    gen.add_argument("--force", action="store_true")
    gen.set_defaults(handler=cmd_gen_data)

    run = sub.add_parser("run", help="run the three-phase experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--master-seed", type=int, default=None)
    run.add_argument("--policy", choices=["learned", "static"], default=None)
    run.add_argument("--ablate", nargs="*", default=None,
                     help="feature or group names to zero out")
    run.add_argument("--set", action="append", default=None, metavar="SECTION.KEY=VALUE",
                     help="override any config key, e.g. --set policy.learning_rate=1e-4")
    run.add_argument("--checkpoints", action="store_true")
    run.add_argument("--resume", default=None, help="checkpoint file to resume from")
    run.add_argument("--export-transcripts", action="store_true")
    run.set_defaults(handler=cmd_run)

    report = sub.add_parser("report", help="compare finished runs")
    report.add_argument("run_dirs", nargs="+")
    report.add_argument("--baseline", default=None)
    report.add_argument("--out", default=None, help="also write the table as CSV")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        _emit_error(exc)
        return 2
    except DataError as exc:
        _emit_error(exc)
        return 3
    except OalsimError as exc:
        _emit_error(exc)
        return 4


def _emit_error(exc: Exception) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
