#!/usr/bin/env python3
"""
MAP Solver - Command Line Interface
Dual block-coordinate ascent for pairwise min-sum models:
- solve a model with the uniform, MPLP or MPLP++ update
- compare the rules on identical schedules
- ablate over graph density
- generate, check and schedule model files

Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from engine import SolveConfig, SolveTrace, load_config, save_config, solve
from generate import build_model, sparsify
from model import GraphicalModel, ModelError
from model_io import (format_float, read_model, write_merged_csv, write_model,
                      write_summary, write_trace_csv)
from schedule import compute_schedule, is_valid_schedule, schedule_stats, POOL_ORDER
from updates import normalize_rule

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DEFAULT_FRACTIONS = "1.0,0.8,0.6,0.4,0.2,0.1,0.05,0.01"
ABLATION_FIELDS = ["fraction", "rule", "num_edges", "final_dual", "final_energy", "normalized_iterations"]


class UsageError(Exception):
    """Invalid flags or flag combinations"""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class ExperimentRunner:
    """Runs solves for the CLI and writes their traces"""

    def __init__(self, config: Dict):
        """
        Args:
            config: Configuration dictionary from load_config
        """
        self.config = config

    def solve_config(self, rule: Optional[str] = None, **overrides) -> SolveConfig:
        """SolveConfig from the configuration with non-None overrides applied"""
        values = self.effective_config(**overrides)
        if rule is not None:
            values['rule'] = rule
        return SolveConfig.from_config(values)

    def effective_config(self, **overrides) -> Dict:
        """The configuration dictionary with non-None overrides applied"""
        values = dict(self.config)
        values.update({key: value for key, value in overrides.items() if value is not None})
        return values

    def run_rules(self, model: GraphicalModel, rules: List[str], out_dir: Path, **overrides) -> Dict[str, SolveTrace]:
        """
        Solve the same model once per rule from the same initial state

        Args:
            model: Graphical model
            rules: Rule letters
            out_dir: Directory for trace_<rule>.csv, summary_<rule>.json, merged.csv,
                config.json (the settings the rules ran with)
            overrides: SolveConfig overrides

        Returns:
            Rule letter -> trace
        """
        out_dir.mkdir(parents=True, exist_ok=True)
        effective = self.effective_config(**overrides)
        effective.pop('rule', None)
        effective['rules'] = [rule.lower() for rule in rules]
        save_config(effective, str(out_dir / "config.json"))
        traces = {}
        for rule in rules:
            trace = solve(model, self.solve_config(rule, **overrides))
            name = rule.lower()
            write_trace_csv(trace, out_dir / f"trace_{name}.csv")
            write_summary(trace, out_dir / f"summary_{name}.json", {"pool_order": POOL_ORDER})
            traces[rule] = trace
            print(f"[{rule}] dual={trace.final_dual:.10g} energy={trace.final_energy:.10g} "
                  f"normalized_iterations={trace.normalized_iterations:g}")
        write_merged_csv(traces, out_dir / "merged.csv")
        logger.info(f"Traces written to {out_dir}")
        return traces


def _parse_rules(text: str) -> List[str]:
    rules = [normalize_rule(tok) for tok in text.split(",") if tok.strip()]
    if not rules:
        raise UsageError("at least one rule is required")
    return rules


def _parse_fractions(text: str) -> List[float]:
    try:
        fractions = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"invalid fraction list: {text!r}")
    if not fractions:
        raise UsageError("at least one fraction is required")
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise UsageError(f"fraction {fraction} is outside (0, 1]")
    return fractions


def _add_solver_flags(parser):
    parser.add_argument('--mode', choices=['seq', 'par'], help='Sequential or matching-parallel iterations')
    parser.add_argument('--workers', type=int, help='Worker threads in parallel mode')
    parser.add_argument('--max-iters', type=float, help='Cap on normalized iterations')
    parser.add_argument('--tol', type=float, help='Relative dual improvement threshold')
    parser.add_argument('--checkpoint-every', type=float, help='Normalized iterations between checkpoints')


def _solver_overrides(args) -> Dict:
    return {
        'mode': args.mode,
        'num_workers': args.workers,
        'max_normalized_iterations': args.max_iters,
        'rel_improvement_threshold': args.tol,
        'checkpoint_every': args.checkpoint_every,
    }


def cmd_solve(args, runner: ExperimentRunner) -> int:
    if args.mode == 'seq' and args.workers is not None and args.workers > 1:
        raise UsageError("--workers > 1 requires --mode par")
    model = read_model(args.model)
    config = runner.solve_config(args.rule, seed=args.seed, **_solver_overrides(args))
    trace = solve(model, config)

    if args.trace:
        write_trace_csv(trace, args.trace)
    if args.summary:
        write_summary(trace, args.summary, {"pool_order": POOL_ORDER})
    print(json.dumps({key: trace.summary()[key] for key in ("final_dual", "final_energy", "gap")}))
    return EXIT_OK


def cmd_compare(args, runner: ExperimentRunner) -> int:
    rules = _parse_rules(args.rules)
    model = read_model(args.model)
    runner.run_rules(model, rules, Path(args.out), **_solver_overrides(args))
    return EXIT_OK


def cmd_ablate(args, runner: ExperimentRunner) -> int:
    rules = _parse_rules(args.rules)
    fractions = _parse_fractions(args.fractions)
    model = read_model(args.model)
    out_dir = Path(args.out)

    rows = []
    for fraction in fractions:
        sparse = sparsify(model, fraction, args.seed)
        logger.info(f"Fraction {fraction:g}: {sparse.num_edges} of {model.num_edges} edges")
        traces = runner.run_rules(sparse, rules, out_dir / f"fraction_{fraction:g}", **_solver_overrides(args))
        for rule, trace in traces.items():
            rows.append({
                "fraction": f"{fraction:g}",
                "rule": rule.lower(),
                "num_edges": sparse.num_edges,
                "final_dual": format_float(trace.final_dual),
                "final_energy": format_float(trace.final_energy),
                "normalized_iterations": format_float(trace.normalized_iterations),
            })

    with open(out_dir / "ablation_summary.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=ABLATION_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_OK


def cmd_generate(args, runner: ExperimentRunner) -> int:
    try:
        model = build_model(args)
    except ValueError as e:
        raise UsageError(str(e))
    write_model(model, args.out)
    print(f"Wrote {args.kind} model ({model.num_nodes} nodes, {model.num_edges} edges) to {args.out}")
    return EXIT_OK


def cmd_check(args, runner: ExperimentRunner) -> int:
    model = read_model(args.model)
    schedule = compute_schedule(model)
    if not is_valid_schedule(schedule, model):
        raise ModelError("edge schedule failed the matching/cover check")
    print(json.dumps({
        "valid": True,
        "num_nodes": model.num_nodes,
        "num_edges": model.num_edges,
        "max_labels": max(model.label_counts, default=0),
    }))
    return EXIT_OK


def cmd_schedule(args, runner: ExperimentRunner) -> int:
    model = read_model(args.model)
    stats = schedule_stats(compute_schedule(model), model.num_nodes)
    stats["pool_order"] = POOL_ORDER
    print(json.dumps(stats))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(description='MAP inference by dual block-coordinate ascent')
    parser.add_argument('--config', '-c', type=str, default='config.json', help='Configuration JSON file')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    sub = parser.add_subparsers(dest='command', parser_class=_ArgumentParser)
    sub.required = True

    p = sub.add_parser('solve', help='Solve one model')
    p.add_argument('--model', required=True, help='MINSUM1 model file')
    p.add_argument('--rule', choices=['u', 'm', 'h', 'U', 'M', 'H'], help='Update rule')
    p.add_argument('--seed', type=int, help='Seed recorded in the summary')
    p.add_argument('--trace', help='Trace CSV output path')
    p.add_argument('--summary', help='Summary JSON output path')
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser('compare', help='Run several rules on one model')
    p.add_argument('--model', required=True, help='MINSUM1 model file')
    p.add_argument('--rules', default='u,m,h', help='Comma-separated rules (default: u,m,h)')
    p.add_argument('--out', required=True, help='Output directory')
    _add_solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('ablate', help='Compare rules over sparsified copies of a model')
    p.add_argument('--model', required=True, help='MINSUM1 model file')
    p.add_argument('--fractions', default=DEFAULT_FRACTIONS, help=f'Edge fractions (default: {DEFAULT_FRACTIONS})')
    p.add_argument('--rules', default='m,h', help='Comma-separated rules (default: m,h)')
    p.add_argument('--seed', type=int, default=0, help='Sparsification seed (default: 0)')
    p.add_argument('--out', required=True, help='Output directory')
    _add_solver_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser('generate', help='Write a synthetic model file')
    p.add_argument('kind', choices=['complete', 'grid', 'random'], help='Instance family')
    p.add_argument('--nodes', type=int, default=10, help='Nodes (complete/random)')
    p.add_argument('--rows', type=int, default=8, help='Grid rows')
    p.add_argument('--cols', type=int, default=8, help='Grid columns')
    p.add_argument('--labels', type=int, default=4, help='Labels per node')
    p.add_argument('--lam', type=float, default=1.0, help='Potts weight')
    p.add_argument('--density', type=float, default=1.0, help='Edge density for random')
    p.add_argument('--keep', type=float, default=1.0, help='Sparsify the result to this fraction')
    p.add_argument('--seed', type=int, default=0, help='splitmix64 seed')
    p.add_argument('--out', required=True, help='Output model file')
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('check', help='Validate a model file')
    p.add_argument('--model', required=True, help='MINSUM1 model file')
    p.set_defaults(func=cmd_check)

    p = sub.add_parser('schedule', help='Print edge schedule statistics')
    p.add_argument('--model', required=True, help='MINSUM1 model file')
    p.set_defaults(func=cmd_schedule)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main execution function"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"Usage error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        config = load_config(args.config)
    except ValueError as e:
        print(f"Usage error: bad config file {args.config}: {e}", file=sys.stderr)
        return EXIT_USAGE
    level = logging.DEBUG if args.verbose else getattr(logging, str(config.get('log_level', 'INFO')).upper(), logging.INFO)
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')

    try:
        return args.func(args, ExperimentRunner(config))
    except UsageError as e:
        print(f"Usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        logger.error(str(e))
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as e:
        logger.error(f"Invalid model: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"Usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("\n\n⚠ Process interrupted by user")
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        print(f"\n❌ Error: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
