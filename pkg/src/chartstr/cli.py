"""Command-line front end.

Subcommands::

    chartstr convert FILE... --to {str-text,str-jsonl,lct} [--out DIR]
    chartstr eval --pred DIR --gt DIR [--tol strict,slight,high] [--mode matched|paper-literal]
                  [--report PATH] [--thresholds 0.5,0.75,0.95,1.0] [--strict-pairing]
    chartstr qa --pred FILE.jsonl [--report PATH] [--margin 0.05]
    chartstr simulate --seeds DIR --out ROOT [--config PATH] [--mock]

Exit codes: 0 success, 1 data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import CliConfig, ConfigError, load_config
from .lct import LctError, parse_lct, serialize_lct
from .qa import DuplicateQuestion, EmptyBatch, load_jsonl, score_batch
from .scrm import SCHEMA_VERSION, EmptyDataset, dataset_report, get_tolerance
from .triplets import StrError, TripletSet, _RecordSet, from_str, parse_str, serialize_str, to_str

log = logging.getLogger("chartstr")

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2

LCT_SUFFIXES = {".csv", ".lct"}
STR_TEXT_SUFFIXES = {".str", ".txt"}
STR_JSONL_SUFFIXES = {".jsonl"}
INPUT_SUFFIXES = LCT_SUFFIXES | STR_TEXT_SUFFIXES | STR_JSONL_SUFFIXES
OUTPUT_SUFFIX = {"lct": ".csv", "str-text": ".str", "str-jsonl": ".jsonl"}


class _ConfigProblem(Exception):
    pass


def load_records(path: Path) -> _RecordSet:
    """Read a chart label file as a record set, choosing the parser by suffix."""
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    if suffix in LCT_SUFFIXES:
        return to_str(parse_lct(text))
    if suffix in STR_TEXT_SUFFIXES:
        return parse_str(text, "text")
    if suffix in STR_JSONL_SUFFIXES:
        return parse_str(text, "jsonl")
    raise StrError(f"unsupported file type {suffix!r}")


def _expand_inputs(paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.is_file() and f.suffix.lower() in INPUT_SUFFIXES))
        else:
            files.append(p)
    return files


# -- convert ----------------------------------------------------------------


def cmd_convert(args: argparse.Namespace) -> int:
    files = _expand_inputs(args.inputs)
    if not files:
        print("convert: no input files", file=sys.stderr)
        return EXIT_DATA
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    failed = 0
    for path in files:
        try:
            records = load_records(path)
            if args.to == "lct":
                if not isinstance(records, TripletSet):
                    raise StrError(f"arity-{records.arity} records cannot be laid out as LCT")
                text = serialize_lct(from_str(records))
            else:
                text = serialize_str(records, "text" if args.to == "str-text" else "jsonl")
            target = (out_dir or path.parent) / (path.stem + OUTPUT_SUFFIX[args.to])
            if target.resolve() == path.resolve():
                raise StrError("output would overwrite the input; pass --out")
            target.write_text(text, encoding="utf-8")
            log.info("%s -> %s", path, target)
        except (OSError, LctError, StrError, ValueError) as exc:
            failed += 1
            print(f"{path}: {exc}", file=sys.stderr)
    return EXIT_DATA if failed else EXIT_OK


# -- eval -------------------------------------------------------------------


def _stems(directory: Path) -> dict[str, Path]:
    found: dict[str, Path] = {}
    for f in sorted(directory.iterdir()):
        if f.is_file() and f.suffix.lower() in INPUT_SUFFIXES:
            if f.stem in found:
                raise _ConfigProblem(f"{directory}: two files share the stem {f.stem!r}")
            found[f.stem] = f
    return found


def _parse_list(text: Optional[str]) -> Optional[list[str]]:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def cmd_eval(args: argparse.Namespace, cfg: CliConfig) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise _ConfigProblem(f"{d} is not a directory")
    try:
        tol_names = _parse_list(args.tol) or cfg.eval.tolerances
        tolerances = [get_tolerance(n) for n in tol_names]
        thresholds = [float(x) for x in _parse_list(args.thresholds)] if args.thresholds else cfg.eval.thresholds
    except ValueError as exc:
        raise _ConfigProblem(str(exc)) from exc
    mode = (args.mode or cfg.eval.mode).replace("-", "_")
    strategy = (args.strategy or cfg.eval.strategy).replace("-", "_")
    workers = args.workers or cfg.eval.workers

    preds, gts = _stems(pred_dir), _stems(gt_dir)
    missing_pred = sorted(set(gts) - set(preds))
    missing_gt = sorted(set(preds) - set(gts))
    for stem in missing_pred:
        print(f"unpaired: no prediction for {stem}", file=sys.stderr)
    for stem in missing_gt:
        print(f"unpaired: no ground truth for {stem}", file=sys.stderr)

    stems = sorted(gts) if args.strict_pairing else sorted(set(gts) & set(preds))
    pairs, gt_errors, pred_errors = [], {}, {}
    for stem in stems:
        try:
            gt = load_records(gts[stem])
        except (OSError, LctError, StrError, ValueError) as exc:
            gt_errors[stem] = str(exc)
            print(f"{gts[stem]}: {exc}", file=sys.stderr)
            continue
        pred = TripletSet()
        if stem in preds:
            try:
                pred = load_records(preds[stem])
            except (OSError, LctError, StrError, ValueError) as exc:
                # an unreadable prediction scores as an empty one
                pred_errors[stem] = str(exc)
                print(f"{preds[stem]}: {exc} (scored as empty)", file=sys.stderr)
        pairs.append((stem, pred, gt))
    if gt_errors:
        return EXIT_DATA

    try:
        report = dataset_report(
            [(p, g) for _, p, g in pairs],
            tolerances=tolerances,
            thresholds=thresholds,
            mode=mode,
            strategy=strategy,
            ids=[s for s, _, _ in pairs],
            workers=workers,
        )
    except EmptyDataset as exc:
        print(f"eval: {exc}", file=sys.stderr)
        return EXIT_DATA
    report.extra = {
        "unpaired": {"missing_pred": missing_pred, "missing_gt": missing_gt},
        "strict_pairing": bool(args.strict_pairing),
        "pred_errors": pred_errors,
    }
    sys.stdout.write(report.render_table())
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


# -- qa ---------------------------------------------------------------------


def cmd_qa(args: argparse.Namespace) -> int:
    path = Path(args.pred)
    try:
        with open(path, encoding="utf-8") as fh:
            records = load_jsonl(fh)
        summary = score_batch(records, args.margin)
    except OSError as exc:
        raise _ConfigProblem(f"cannot read {path}: {exc}") from exc
    except (EmptyBatch, DuplicateQuestion, ValueError) as exc:
        print(f"qa: {exc}", file=sys.stderr)
        return EXIT_DATA
    doc = {"schema_version": SCHEMA_VERSION, **summary, "margin": float(args.margin)}
    print(json.dumps(doc))
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace, cfg: CliConfig) -> int:
    from .simforge.llm import CountingClient, HttpChatClient, offline_mock_client
    from .simforge.pipeline import ConfigInvalid, PipelineConfig, run_pipeline
    from .simforge.sandbox import SandboxConfig

    seeds_dir = Path(args.seeds)
    if not seeds_dir.is_dir():
        raise _ConfigProblem(f"seeds directory {seeds_dir} does not exist")
    out = args.out or cfg.output_root
    if not out:
        raise _ConfigProblem("no output root: pass --out or set output_root")
    seed_files = sorted(f for f in seeds_dir.iterdir() if f.is_file() and f.suffix.lower() in LCT_SUFFIXES | {".txt"})
    if not seed_files:
        raise _ConfigProblem(f"no seed files (*.csv, *.lct, *.txt) in {seeds_dir}")
    seeds = [(f.stem, f.read_text(encoding="utf-8")) for f in seed_files]

    if args.mock or cfg.llm.provider == "mock":
        inner = offline_mock_client()
    else:
        if not cfg.llm.endpoint or not cfg.llm.model:
            raise _ConfigProblem("llm.endpoint and llm.model are required for the http provider")
        inner = HttpChatClient(
            cfg.llm.endpoint,
            cfg.llm.model,
            api_key=os.environ.get(cfg.llm.api_key_env),
            temperature=cfg.llm.temperature,
            timeout=cfg.llm.timeout,
        )
    client = CountingClient(inner)
    try:
        pcfg = PipelineConfig(
            output_root=Path(out),
            max_retries=cfg.max_retries,
            concurrency=cfg.concurrency,
            require_plot_call=cfg.require_plot_call,
            sandbox=SandboxConfig(
                interpreter=tuple(cfg.sandbox.interpreter),
                timeout=float(cfg.sandbox.timeout),
                image_extensions=tuple(cfg.sandbox.image_extensions),
                block_network=cfg.sandbox.block_network,
            ),
        )
        manifest = run_pipeline(seeds, pcfg, client)
    except (ConfigInvalid, ValueError) as exc:
        raise _ConfigProblem(str(exc)) from exc

    counts = manifest.counts
    summary = {"counts": counts, "llm_calls": client.count, "manifest": str(Path(out) / "manifest.jsonl")}
    print(json.dumps(summary))
    for e in manifest.entries:
        if e.status == "skipped":
            print(f"skipped {e.id}: {e.error}", file=sys.stderr)
    processed = [e for e in manifest.entries if e.error is not None or e.status != "verified"]
    if processed and counts["verified"] == 0 and all((e.error or "").startswith("transport:") for e in processed):
        print("simulate: every job failed to reach the LLM endpoint", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chartstr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--config", help="YAML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert between LCT and STR formats")
    p.add_argument("inputs", nargs="+", help="files or directories (*.csv/*.lct, *.str/*.txt, *.jsonl)")
    p.add_argument("--to", required=True, choices=["str-text", "str-jsonl", "lct"])
    p.add_argument("--out", help="output directory (default: next to each input)")

    p = sub.add_parser("eval", help="score predicted tables against ground truth with SCRM")
    p.add_argument("--pred", required=True, help="directory of predicted tables")
    p.add_argument("--gt", required=True, help="directory of ground-truth tables")
    p.add_argument("--tol", help="comma-separated tolerance levels (default strict,slight,high)")
    p.add_argument("--mode", choices=["matched", "paper-literal"])
    p.add_argument("--strategy", choices=["joined", "per-entity"], help="entity distance strategy")
    p.add_argument("--thresholds", help="comma-separated fixed IoU thresholds")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--strict-pairing", action="store_true", help="a missing prediction scores IoU 0")
    p.add_argument("--workers", type=int, help="processes for per-image scoring")

    p = sub.add_parser("qa", help="relaxed-accuracy QA scoring")
    p.add_argument("--pred", required=True, help="JSONL with question_id, predicted, gold")
    p.add_argument("--report", help="write the JSON summary here")
    p.add_argument("--margin", default="0.05", help="relative numeric margin (default 0.05)")

    p = sub.add_parser("simulate", help="generate simulated charts from seed labels")
    p.add_argument("--seeds", required=True, help="directory of seed LCT files")
    p.add_argument("--out", help="output root")
    p.add_argument("--mock", action="store_true", help="use the offline mock LLM")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.command == "convert":
            return cmd_convert(args)
        if args.command == "eval":
            return cmd_eval(args, cfg)
        if args.command == "qa":
            try:
                from decimal import Decimal, InvalidOperation

                args.margin = Decimal(args.margin)
                if not args.margin.is_finite() or args.margin < 0:
                    raise InvalidOperation
            except InvalidOperation:
                raise _ConfigProblem(f"--margin {args.margin!r} is not a non-negative number") from None
            return cmd_qa(args)
        if args.command == "simulate":
            return cmd_simulate(args, cfg)
    except (ConfigError, _ConfigProblem) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
