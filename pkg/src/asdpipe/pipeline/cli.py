"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (usage, config, manifest, markers,
hash mismatches), 2 any other runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..backend import BACKEND_KINDS
from ..corpus import SynthSpec, convert_dcase_tree, default_synth_spec, generate_synthetic, save_manifest
from ..corpus.records import YEARS
from ..exceptions import CorruptionError, ValidationError
from ..report import load_report, report_csv
from . import runner
from .config import RECIPES, RunConfig

log = logging.getLogger("asdpipe")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_run_flags(p):
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--seed", type=int, help="run a single trial with this seed")
    p.add_argument("--workdir", help="override the configured workdir")
    p.add_argument("--recipe", choices=sorted(RECIPES))
    p.add_argument("--year", type=int, choices=YEARS)
    p.add_argument("--backend", choices=BACKEND_KINDS, help="backend kind")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asdpipe", description="Four-step anomalous sound detection pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic corpus and its manifest")
    p.add_argument("--spec", help="synthetic corpus spec (JSON); default desk-scale spec if omitted")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the corpus seed")
    p.add_argument("--machine-types", type=int, default=8, help="size of the default spec")
    p.add_argument("--no-target", action="store_true", help="default spec without a target domain")

    p = sub.add_parser("convert-dcase", help="build a manifest from an extracted DCASE tree")
    p.add_argument("--root", required=True)
    p.add_argument("--year", type=int, required=True, choices=YEARS)
    p.add_argument("--out", required=True, help="manifest path (JSONL)")
    p.add_argument("--subset", default="dev", choices=("dev", "eval"))

    for name, text in (("train", "step 1: train frontends"), ("extract", "step 2: extract features"),
                       ("score", "step 3: backend scores"), ("evaluate", "step 4: evaluation report"),
                       ("run-all", "steps 1-4 for every seed")):
        _add_run_flags(sub.add_parser(name, help=text))

    p = sub.add_parser("report", help="print a saved report as a mean (std) table")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config")
    group.add_argument("--path", help="report.json to print")
    p.add_argument("--workdir")
    p.add_argument("--recipe", choices=sorted(RECIPES))
    p.add_argument("--year", type=int, choices=YEARS)
    p.add_argument("--backend", choices=BACKEND_KINDS)
    p.add_argument("--seed", type=int)
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    seeds = (args.seed,) if getattr(args, "seed", None) is not None else None
    return cfg.with_overrides(workdir=args.workdir, recipe=args.recipe, year=args.year,
                              backend=args.backend, seeds=seeds)


def _cmd_synth(args):
    if args.spec:
        spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    else:
        spec = default_synth_spec(args.machine_types, seed=0, target_domain=not args.no_target)
    if args.seed is not None:
        spec = SynthSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    records = generate_synthetic(spec, args.out)
    print(f"wrote {len(records)} clips and {Path(args.out) / 'manifest.jsonl'}")


def _cmd_convert(args):
    records = convert_dcase_tree(args.root, args.year, args.subset)
    save_manifest(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")


def _per_seed(step):
    def run(args):
        cfg = _config(args)
        runner.write_run_snapshot(cfg)
        for seed in cfg.seeds:
            path = step(cfg, seed)
            print(f"seed {seed}: {path}")
    return run


def _print_summary(report):
    sys.stdout.write(report_csv(report))


def _cmd_evaluate(args):
    _print_summary(runner.run_step4_evaluate(_config(args)))


def _cmd_run_all(args):
    _print_summary(runner.run_all(_config(args)))


def _cmd_report(args):
    if args.path:
        path = Path(args.path)
    else:
        path = runner.recipe_dir(_config(args)) / "report.json"
    if not path.exists():
        raise ValidationError(f"no report at {path}; run 'evaluate' first")
    _print_summary(load_report(path))


COMMANDS = {
    "synth": _cmd_synth,
    "convert-dcase": _cmd_convert,
    "train": _per_seed(runner.run_step1_train),
    "extract": _per_seed(runner.run_step2_extract),
    "score": _per_seed(runner.run_step3_score),
    "evaluate": _cmd_evaluate,
    "run-all": _cmd_run_all,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValidationError, CorruptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
