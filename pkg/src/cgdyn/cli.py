"""Command line front end: ``cgdyn <subcommand> --config scenario.json``.

Exit codes: 0 success, 1 validation failure, 2 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import experiments as exp

EXIT_OK, EXIT_FAIL, EXIT_BAD_INPUT = 0, 1, 2

log = logging.getLogger("cgdyn")


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(rows: list[dict], out: str | None) -> None:
    if not rows:
        return
    header = list(rows[0])
    fh = open(out, "w", encoding="utf-8", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row[k]) for k in header])
    finally:
        if out:
            fh.close()


def load_config(path: str, check_channel: bool = True) -> exp.Scenario:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise exp.ConfigError(f"cannot read config {path}: {exc}") from exc
    return exp.parse_config(data, check_channel=check_channel)


def cmd_check_channel(args) -> int:
    scn = load_config(args.config, check_channel=False)
    rep = exp.check_channel(scn.channel, scn.builtin_channel)
    print(f"completeness_residual {rep.completeness_residual:.3e}")
    print(f"choi_min_eig {rep.choi_min_eig:.3e}")
    if rep.table_error is not None:
        print(f"table_max_error {rep.table_error:.3e}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    scn = load_config(args.config)
    rows, worst = exp.simulate(scn)
    write_csv(rows, args.out)
    print(f"max_path_discrepancy {worst:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_distance(args) -> int:
    scn = load_config(args.config)
    rows = exp.distance(scn, override=args.override_same_map_check)
    write_csv(rows, args.out)
    return EXIT_OK


def cmd_find_pair(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    scn = exp.parse_config(raw)
    budget = args.budget if args.budget is not None else int(scn.extra.get("budget", 500))
    res = exp.find_pair(scn, budget, args.seed)
    report = dict(raw)
    report["initial_states"] = [exp.state_to_json(res.seed_state), exp.state_to_json(res.partner)]
    report["excess"] = res.excess
    report["candidates"] = res.candidates
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    print(f"excess {res.excess:.6e} from {res.candidates} candidates", file=sys.stderr)
    return EXIT_OK


def cmd_domain_probe(args) -> int:
    scn = load_config(args.config)
    samples = args.samples if args.samples is not None else int(scn.extra.get("samples", 100))
    rep = exp.domain_probe(scn, samples, args.seed)
    print(f"samples {rep.samples} tested {rep.tested} violations {rep.violations}")
    print(f"max_residual {rep.max_residual:.3e} max_state_error {rep.max_alpha_error:.3e}")
    return EXIT_OK if rep.violations == 0 else EXIT_FAIL


def cmd_divisibility(args) -> int:
    scn = load_config(args.config)
    write_csv(exp.divisibility(scn), args.out)
    return EXIT_OK


COMMANDS = {
    "check-channel": (cmd_check_channel, "completeness, Choi positivity and table conformance of the channel"),
    "simulate": (cmd_simulate, "purity and Bloch trajectory of one initial state"),
    "distance": (cmd_distance, "effective distance between two states sharing an effective map"),
    "find-pair": (cmd_find_pair, "search a same-map partner maximizing the distance excess"),
    "domain-probe": (cmd_domain_probe, "randomized convexity check of the effective map's domain"),
    "divisibility": (cmd_divisibility, "CP test of intermediate maps on the time grid"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgdyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--override-same-map-check", action="store_true", help="run distance even if the states generate different maps")
        p.add_argument("--budget", type=int, help="find-pair: number of candidate draws")
        p.add_argument("--samples", type=int, help="domain-probe: number of sampled pairs")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (exp.ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (exp.SameMapError, exp.ConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
