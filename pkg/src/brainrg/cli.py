"""Command-line entry point: ``brainrg <command> [options]``.

Exit codes: 0 success, 2 IO/format error, 3 synthesis failure,
4 mode-argument failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from brainrg import vio
from brainrg.errors import (
    BrainRGError,
    ConfigError,
    DimsMismatch,
    EmptyAtlas,
    EmptyInput,
    EmptyPromptError,
    DegenerateReference,
    MissingAnomalyMask,
    MissingUserPrompts,
    SynthesisFailed,
    UnknownLabel,
)
from brainrg.report import TemplateTable, run_mode, stub_reporter
from brainrg.roiselect import prompt_from_structures, regional_prompts
from brainrg.segmetrics import score
from brainrg.synthlesion import SynthConfig, recipes_to_json, synthesize
from brainrg.textmetrics import BLEU1_WEIGHTS, BLEU4_WEIGHTS, bleu, rouge_n, tokenize
from brainrg.volume import AtlasLabelMap, BinaryMask, Volume

log = logging.getLogger("brainrg")

EXIT_OK = 0
EXIT_IO = 2
EXIT_SYNTH = 3
EXIT_MODE = 4

DEFAULT_SEED = 0
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_synth(args) -> int:
    volume = vio.read_kind(args.volume, Volume)
    atlas = vio.read_kind(args.atlas, AtlasLabelMap)
    config = SynthConfig.from_json(args.config) if args.config else SynthConfig()
    try:
        result = synthesize(volume, atlas, config, args.seed)
    except (SynthesisFailed, EmptyAtlas) as exc:
        raise CliFailure(EXIT_SYNTH, str(exc)) from exc
    vio.write(args.out_volume, result.volume)
    vio.write(args.out_mask, result.mask)
    Path(args.out_recipes).write_text(recipes_to_json(result.recipes) + "\n", encoding="utf-8")
    log.info("wrote %d lesions", len(result.recipes))
    return EXIT_OK


def cmd_roi(args) -> int:
    anomaly = vio.read_kind(args.anomaly, BinaryMask)
    atlas = vio.read_kind(args.atlas, AtlasLabelMap)
    prompts = regional_prompts(anomaly, atlas, args.connectivity)
    out = Path(args.out)
    entries = []
    for p in prompts:
        mask_path = out.with_name(f"{out.stem}.prompt{p.component_index:03d}.vvl")
        vio.write(mask_path, p.mask)
        entries.append(
            {
                "component_index": p.component_index,
                "structure_labels": p.sorted_labels(),
                "structure_names": [atlas.name_of(l) for l in p.sorted_labels()],
                "mask_popcount": p.mask.popcount(),
                "mask_file": mask_path.name,
            }
        )
    out.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _read_manifest(path: Path) -> list[tuple[str, str]]:
    pairs = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f for f in line.replace(",", " ").split() if f]
        if len(fields) != 2:
            raise CliFailure(EXIT_IO, f"manifest line needs two paths: {raw!r}")
        pairs.append((fields[0], fields[1]))
    return pairs


def cmd_seg_metrics(args) -> int:
    manifest = Path(args.manifest)
    base = manifest.parent

    def evaluate(pair):
        pred_path, gt_path = pair
        try:
            pred = vio.read_kind(base / pred_path, BinaryMask)
            gt = vio.read_kind(base / gt_path, BinaryMask)
            s = score(pred, gt, gt.spacing, args.hd_mode)
        except (OSError, BrainRGError) as exc:
            return [pred_path, "", "", "", "", f"{type(exc).__name__}: {exc}"]
        return [pred_path, _fmt(s.dsc), _fmt(s.pre), _fmt(s.se), _fmt(s.hd), ""]

    pairs = _read_manifest(manifest)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(evaluate, pairs))
    failed = [r for r in rows if r[-1]]
    header = ["case", "dsc", "pre", "se", "hd_mm"]
    if failed:
        header.append("error")
    else:
        rows = [r[:-1] for r in rows]
    _write_csv(args.out, header, rows)
    for r in failed:
        print(f"error: {r[0]}: {r[-1]}", file=sys.stderr)
    return EXIT_IO if failed else EXIT_OK


def _text_row(i: int, cand_line: str, ref_line: str) -> list[str]:
    cand, ref = tokenize(cand_line), tokenize(ref_line)
    row = [str(i)]
    for weights in (BLEU1_WEIGHTS, BLEU4_WEIGHTS):
        try:
            row.append(_fmt(bleu(cand, [ref], weights)))
        except EmptyInput:
            row.append("")
    try:
        row.append(_fmt(rouge_n(cand, [ref], 1)))
    except (EmptyInput, DegenerateReference):
        row.append("")
    return row


def cmd_text_metrics(args) -> int:
    cands = Path(args.candidates).read_text(encoding="utf-8").splitlines()
    refs = Path(args.references).read_text(encoding="utf-8").splitlines()
    if len(cands) != len(refs):
        raise CliFailure(EXIT_IO, f"line counts differ: {len(cands)} candidates vs {len(refs)} references")
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(_text_row, range(1, len(cands) + 1), cands, refs))
    _write_csv(args.out, ["line", "bleu1", "bleu4", "rouge1"], rows)
    return EXIT_OK


def cmd_report(args) -> int:
    volume = vio.read_kind(args.volume, Volume)
    atlas = vio.read_kind(args.atlas, AtlasLabelMap)
    anomaly = vio.read_kind(args.anomaly, BinaryMask) if args.anomaly else None
    try:
        templates = TemplateTable.from_json(args.templates, atlas) if args.templates else TemplateTable()
    except UnknownLabel as exc:
        raise CliFailure(EXIT_IO, f"template file: {exc}") from exc
    try:
        user_prompts = None
        if args.structures:
            user_prompts = [
                prompt_from_structures(atlas, [atlas.label_of(n) for n in group.split(",") if n.strip()])
                for group in args.structures
            ]
        result = run_mode(
            args.mode,
            volume,
            atlas,
            stub_reporter(anomaly, templates),
            templates,
            anomaly=anomaly,
            user_prompts=user_prompts,
            connectivity=args.connectivity,
        )
    except (MissingAnomalyMask, MissingUserPrompts, UnknownLabel, EmptyPromptError) as exc:
        raise CliFailure(EXIT_MODE, str(exc)) from exc
    if args.json:
        sys.stdout.write(json.dumps(result.to_json(atlas), indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(result.text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for batch commands")
    common.add_argument("--log-level", choices=sorted(LOG_LEVELS), default="warn")

    parser = argparse.ArgumentParser(prog="brainrg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="insert synthetic lesions into a volume")
    p.add_argument("--volume", required=True)
    p.add_argument("--atlas", required=True)
    p.add_argument("--config", help="SynthConfig JSON; defaults apply when omitted")
    p.add_argument("--out-volume", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-recipes", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("roi", parents=[common], help="regional prompts from an anomaly mask")
    p.add_argument("--anomaly", required=True)
    p.add_argument("--atlas", required=True)
    p.add_argument("--connectivity", type=int, choices=(6, 26), default=26)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_roi)

    p = sub.add_parser("seg-metrics", parents=[common], help="DSC/PRE/SE/HD over a manifest of mask pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hd-mode", choices=("directed", "symmetric"), default="directed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_seg_metrics)

    p = sub.add_parser("text-metrics", parents=[common], help="BLEU-1/BLEU-4/ROUGE-1 over aligned text files")
    p.add_argument("--candidates", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_text_metrics)

    p = sub.add_parser("report", parents=[common], help="assemble a report in global/autoseg/prompt mode")
    p.add_argument("--mode", choices=("global", "autoseg", "prompt"), required=True)
    p.add_argument("--volume", required=True)
    p.add_argument("--atlas", required=True)
    p.add_argument("--anomaly")
    p.add_argument(
        "--structures",
        action="append",
        help="comma-separated structure names forming one prompt; repeat for more prompts",
    )
    p.add_argument("--templates")
    p.add_argument("--connectivity", type=int, choices=(6, 26), default=26)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LOG_LEVELS[args.log_level], format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, vio.VioError, ConfigError, DimsMismatch, UnknownLabel, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
