"""Command line driver: protect a design, attack a public view, sweep partitions, compute metrics.

Exit codes: 0 success, 1 usage error, 2 data error, 3 interrupted with partial results.
A SAT attack that runs out of time is a result, not an error, and exits 0.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import jsonschema

from . import corpus
from .flow import ProtectConfig, protect
from .layout import LegalizationError
from .metrics import DEFAULT_PATTERNS, hamming_distance, solution_space
from .netlist import Netlist, NetlistError, parse_bench, parse_verilog
from .partition import BOTTOM, STRATEGIES, TOP, PartitionError, lifting_fraction, partition_to_dict
from .proximity import MatchingError, run_proximity_attack, score_recovery, true_key
from .rdl import MODES, InvalidKeyError, PlanError, PublicView, apply_key, distance_histogram, public_view
from .report import (campaign_figure, histogram_figure, histogram_rows, mean_or_none, sweep_figure,
                     write_csv)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
CAMPAIGN_FIELDS = ("benchmark", "mode", "seed", "ccr", "hd", "runtime", "repairs")
SWEEP_FIELDS = ("benchmark", "strategy", "fraction", "seed", "cut_size", "ccr", "hd")
DATA_ERRORS = (NetlistError, PlanError, PartitionError, LegalizationError, InvalidKeyError,
               MatchingError, jsonschema.ValidationError, json.JSONDecodeError, OSError,
               ValueError, KeyError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_netlist(source: str) -> Netlist:
    """A ``.bench`` / ``.v`` file, or the name of a bundled benchmark."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
        if path.suffix == ".v":
            return parse_verilog(text, path.stem)
        return parse_bench(text, path.stem)
    if source in corpus.names():
        return corpus.load(source)
    raise FileNotFoundError(f"no such benchmark file or bundled benchmark: {source!r}")


def _seeds(args) -> list[int]:
    return list(range(args.seed, args.seed + args.seeds))


def _dump(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    return path


def _config_from(args) -> ProtectConfig:
    return ProtectConfig(strategy=args.strategy, move_fraction=args.fraction,
                         balance_eps=args.balance_eps, randomize=not args.no_randomize,
                         use_switchboxes=not args.no_switchbox, seed=args.seed)


def cmd_protect(args) -> int:
    netlist = load_netlist(args.benchmark)
    config = _config_from(args)
    result = protect(netlist, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = {"benchmark": netlist.name, "config": config.to_dict(), "view_mode": args.mode}
    files = [
        _dump(out / "partition.json", {**run, **partition_to_dict(result.partition, result.cuts)}),
        _dump(out / "placement.json", {**run, BOTTOM: result.placements[BOTTOM].to_dict(),
                                       TOP: result.placements[TOP].to_dict()}),
        _dump(out / "plan.json", {**run, **result.plan.to_dict()}),
    ]
    view = public_view(result.plan, args.mode)
    view_path = out / "view.json"
    view_path.write_text(view.to_json() + "\n")
    files.append(view_path)
    distances = distance_histogram(result.plan)
    files.append(write_csv(out / "histogram.csv", histogram_rows(distances),
                           ("bin_low", "bin_high", "count")))
    files.append(histogram_figure(distances, out / "histogram.png",
                                  f"{netlist.name}: F2F via displacement"))
    print(json.dumps({"benchmark": netlist.name, "cut_size": len(result.cuts),
                      "switchboxes": len(result.plan.boxes),
                      "files": [str(f) for f in files]}, indent=1))
    return EXIT_OK


def read_view(path: str) -> PublicView:
    data = json.loads(Path(path).read_text())
    return PublicView.from_dict(data)


def cmd_attack(args) -> int:
    view = read_view(args.view)
    oracle = load_netlist(args.oracle) if args.oracle else None
    if args.attack in ("sat", "both") and oracle is None:
        raise ValueError("the SAT attack needs --oracle")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"benchmark": view.name, "view": str(args.view), "oracle": args.oracle,
              "config": {"attack": args.attack, "mode": args.mode, "seeds": _seeds(args),
                         "patterns": args.patterns, "sat_timeout": args.sat_timeout}}

    if args.attack in ("proximity", "both"):
        rows = []
        for seed in _seeds(args):
            result = run_proximity_attack(view, args.mode, seed)
            if oracle is not None:
                score_recovery(result, view, oracle, args.patterns, seed)
            rows.append(result.to_dict())
        report["proximity"] = {
            "runs": rows,
            "mean_ccr": mean_or_none(r["ccr"] for r in rows),
            "mean_hd": mean_or_none(r["hd"] for r in rows),
            "mean_runtime": mean_or_none(r["runtime"] for r in rows),
        }
        write_csv(out / "campaign.csv", rows, CAMPAIGN_FIELDS)
        if oracle is not None:
            campaign_figure(rows, out / "campaign.png", f"{view.name}: proximity attack ({args.mode})")

    if args.attack in ("sat", "both"):
        from .sat import encode_keyed_circuit, run_sat_attack

        circuit = encode_keyed_circuit(view)
        key, stats = run_sat_attack(circuit, oracle, timeout=args.sat_timeout)
        entry = {**stats.to_dict(), "key": key, "ccr": None, "hd": None}
        if key is not None:
            from .metrics import ccr

            entry["ccr"] = ccr(true_key(view, oracle), key)
            entry["hd"] = hamming_distance(oracle, apply_key(view, key), args.patterns, args.seed)
        report["sat"] = entry

    _dump(out / "attack.json", report)
    summary = {k: v for k, v in report.items() if k not in ("proximity", "sat")}
    if "proximity" in report:
        summary["proximity"] = {k: v for k, v in report["proximity"].items() if k != "runs"}
    if "sat" in report:
        summary["sat"] = {k: v for k, v in report["sat"].items() if k != "key"}
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def _sweep_point(task) -> dict:
    bench, strategy, fraction, seed, config, attack, patterns = task
    netlist = load_netlist(bench)
    result = protect(netlist, replace(config, strategy=strategy, move_fraction=fraction, seed=seed))
    row = {"benchmark": netlist.name, "strategy": strategy,
           "fraction": fraction if strategy != "timing" else round(result.partition.top_fraction, 4),
           "seed": seed, "cut_size": len(result.cuts), "ccr": None, "hd": None}
    if attack:
        view = public_view(result.plan, "conservative")
        scored = run_proximity_attack(view, "conservative", seed, oracle=netlist, n_patterns=patterns)
        row["ccr"], row["hd"] = scored.ccr, scored.hd
    return row


def cmd_sweep(args) -> int:
    base = _config_from(args)
    tasks = []
    for bench in args.benchmarks:
        load_netlist(bench)  # fail early on a bad name
        for strategy in args.strategies:
            # the timing-aware partitioner balances tiers itself; one point per seed
            fractions = [base.move_fraction] if strategy == "timing" else args.fractions
            for fraction in fractions:
                for seed in _seeds(args):
                    tasks.append((bench, strategy, fraction, seed, base, not args.no_attack,
                                  args.patterns))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    rows = []
    status = EXIT_OK
    with csv_path.open("w", newline="") as fh:
        import csv

        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        writer.writeheader()
        try:
            if args.jobs > 1:
                with ProcessPoolExecutor(args.jobs) as pool:
                    results = pool.map(_sweep_point, tasks)
                    for row in results:
                        writer.writerow(row)
                        fh.flush()
                        rows.append(row)
            else:
                for task in tasks:
                    row = _sweep_point(task)
                    writer.writerow(row)
                    fh.flush()
                    rows.append(row)
        except KeyboardInterrupt:
            status = EXIT_PARTIAL
            print(f"interrupted: {len(rows)} of {len(tasks)} rows written", file=sys.stderr)
    if rows:
        sweep_figure(rows, out / "sweep.png", "partition sweep")
    _dump(out / "sweep.json", {"config": {**base.to_dict(), "benchmarks": args.benchmarks,
                                          "strategies": args.strategies,
                                          "fractions": args.fractions, "seeds": _seeds(args),
                                          "attack": not args.no_attack, "patterns": args.patterns},
                               "rows": len(rows), "complete": status == EXIT_OK})
    print(json.dumps({"rows": len(rows), "csv": str(csv_path)}, indent=1))
    return status


def cmd_metrics(args) -> int:
    if args.metric == "space":
        space = solution_space(args.d_bot, args.d_top, args.switchboxes)
        result = {"d_bot": space.d_bot, "d_top": space.d_top,
                  "with_switchboxes": space.with_switchboxes, "log10_count": space.log10_count,
                  "log10_count_per_box": space.log10_count_per_box}
    elif args.metric == "lifting":
        result = {"area_ratio": args.area_ratio, "lifting_fraction": lifting_fraction(args.area_ratio)}
    else:
        oracle, candidate = load_netlist(args.oracle), load_netlist(args.candidate)
        result = {"oracle": oracle.name, "candidate": candidate.name, "patterns": args.patterns,
                  "seed": args.seed,
                  "hd": hamming_distance(oracle, candidate, args.patterns, args.seed)}
    text = json.dumps(result, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _fraction_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty fraction list")
    return values


def _add_protect_flags(p, fraction_help="fraction of gates lifted to the top tier"):
    p.add_argument("--strategy", choices=STRATEGIES, default="timing")
    p.add_argument("--fraction", type=float, default=0.5, help=fraction_help)
    p.add_argument("--balance-eps", type=float, default=0.05,
                   help="timing-aware balance tolerance, as a fraction of the gate count")
    p.add_argument("--no-randomize", action="store_true", help="align F2F ports instead of randomizing")
    p.add_argument("--no-switchbox", action="store_true", help="plan no obfuscated switchboxes")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="split3d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("protect", help="partition, place and plan the RDL of one design")
    p.add_argument("benchmark", help=".bench/.v file or bundled benchmark name")
    _add_protect_flags(p)
    p.add_argument("--mode", choices=MODES, default="conservative",
                   help="public view mode: conservative keeps switchbox membership")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("attack", help="attack a public view")
    p.add_argument("view", help="public view JSON written by 'protect'")
    p.add_argument("--oracle", help="original design, simulated as the working chip")
    p.add_argument("--attack", choices=("proximity", "sat", "both"), default="proximity")
    p.add_argument("--mode", choices=MODES, default="conservative")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--patterns", type=int, default=DEFAULT_PATTERNS)
    p.add_argument("--sat-timeout", type=float, default=None, help="seconds")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="cut size (and proximity CCR/HD) over strategies and fractions")
    p.add_argument("benchmarks", nargs="+")
    _add_protect_flags(p, "move fraction for the timing strategy row (ignored by it)")
    p.add_argument("--strategies", type=lambda t: t.split(","), default=list(STRATEGIES))
    p.add_argument("--fractions", type=_fraction_list, default=[0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--no-attack", action="store_true", help="cut sizes only")
    p.add_argument("--patterns", type=int, default=DEFAULT_PATTERNS)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="standalone metric calculators")
    msub = p.add_subparsers(dest="metric", required=True, parser_class=_Parser)
    m = msub.add_parser("space", help="solution-space size")
    m.add_argument("--d-bot", type=int, required=True)
    m.add_argument("--d-top", type=int, required=True)
    m.add_argument("--switchboxes", action="store_true")
    m = msub.add_parser("lifting", help="balanced-utilization lifting fraction")
    m.add_argument("--area-ratio", type=float, required=True)
    m = msub.add_parser("hd", help="Hamming distance between two designs")
    m.add_argument("--oracle", required=True)
    m.add_argument("--candidate", required=True)
    m.add_argument("--patterns", type=int, default=DEFAULT_PATTERNS)
    m.add_argument("--seed", type=int, default=0)
    for m in msub.choices.values():
        m.add_argument("--out", default=None, help="also write the JSON here")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sweep" and any(s not in STRATEGIES for s in args.strategies):
            parser.error(f"--strategies must be drawn from {','.join(STRATEGIES)}")
        if getattr(args, "seeds", 1) < 1:
            parser.error("--seeds must be at least 1")
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        if isinstance(exc, jsonschema.ValidationError):
            exc = f"not a public view: {exc.message}"
        print(f"split3d {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
