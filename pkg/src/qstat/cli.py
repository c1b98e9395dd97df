"""``qstat <subcommand> --config <file.json> --seed <u64> --out <dir>``.

The config file holds the experiment parameters, either as a bare object of
parameters or as a full experiment config (``params``, ``repetitions``,
``csv``, and optionally ``algorithm``/``seed``/``out``). Command-line
``--seed`` and ``--out`` take precedence over the file.

Exit codes: 0 every check passed, 2 a tolerance check failed, 3 the config
was rejected, 1 the algorithm itself raised.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench

EXIT_PASS = 0
EXIT_ALGORITHM = 1
EXIT_TOLERANCE = 2
EXIT_CONFIG = 3

SUBCOMMANDS = (
    "grover", "qaa", "qae", "mean", "min", "kth", "count", "qmc", "swap", "qft", "qpe", "hhl",
    "gradient", "qpca", "coinwalk", "szegedy", "qmcmc", "trotter", "lcu", "qubitize", "qsp",
    "qsvt", "invert", "fixedpoint", "qaoa", "adiabatic", "scaling", "golden",
)

_FILE_KEYS = {"params", "repetitions", "csv", "algorithm", "seed", "out"}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qstat", description="Run a configured quantum-algorithm experiment.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="JSON file with parameters or a full experiment config")
    parser.add_argument("--seed", type=_u64, help="unsigned 64-bit seed (default 0)")
    parser.add_argument("--out", type=Path, help="directory for the JSON-lines (and CSV) output")
    parser.add_argument("--repetitions", type=int, help="override the repetition count")
    parser.add_argument("--csv", action="store_true", help="also write a CSV row per repetition")
    parser.add_argument("--quiet", action="store_true", help="print only the verdict line")
    return parser


def load_config(args: argparse.Namespace) -> bench.ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except OSError as exc:
            raise bench.ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise bench.ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise bench.ConfigError("config must be a JSON object")
    # A file whose keys are all experiment-config keys is a full config; anything else is bare params.
    full = bool(raw) and set(raw) <= _FILE_KEYS
    obj = dict(raw) if full else {"params": raw}
    if obj.get("algorithm", args.subcommand) != args.subcommand:
        raise bench.ConfigError(f"config names algorithm {obj['algorithm']!r} but the subcommand is {args.subcommand!r}")
    obj["algorithm"] = args.subcommand
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.out is not None:
        obj["out"] = str(args.out)
    if args.repetitions is not None:
        obj["repetitions"] = args.repetitions
    if args.csv:
        obj["csv"] = True
    return bench.ExperimentConfig.from_dict(obj)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        result = bench.run(config)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except bench.AlgorithmError as exc:
        print(f"algorithm error: {exc}", file=sys.stderr)
        return EXIT_ALGORITHM
    if config.algorithm == "scaling" and config.out:
        _write_scaling_tables(result, Path(config.out))
    if not args.quiet:
        for line in result.lines():
            print(line)
    failed = [f"rep {r['repetition']}: {k}" for r in result.records for k, ok in r["checks"].items() if not ok]
    verdict = "PASS" if not failed else "FAIL (" + ", ".join(failed) + ")"
    print(f"{config.algorithm}: {verdict} oracle_calls={result.oracle_calls} wall_ms={result.wall_ms:.1f}",
          file=sys.stderr)
    return EXIT_PASS if not failed else EXIT_TOLERANCE


def _write_scaling_tables(result: bench.RunResult, out: Path) -> None:
    study = result.config["params"].get("study", "grover")
    for rec in result.records:
        suffix = "" if len(result.records) == 1 else f"_rep{rec['repetition']}"
        table = bench.ScalingStudy(study + suffix, rec["estimates"]["exponent"], float("nan"),
                                   rec["estimates"]["ci_low"], rec["estimates"]["ci_high"],
                                   rec["estimates"]["table"], "")
        bench.write_scaling_csv(table, out)


if __name__ == "__main__":
    sys.exit(main())
