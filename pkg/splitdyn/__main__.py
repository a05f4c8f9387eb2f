import argparse
import functools
import logging
import sys
import typing

try:
    import tomllib
    from tomllib import TOMLDecodeError
except ImportError:
    import toml as tomllib  # type: ignore[no-redef]
    from toml import TomlDecodeError as TOMLDecodeError  # type: ignore[no-redef]

from splitdyn.problems.nonsmooth import KINDS
from splitdyn.runner import (
    METRICS,
    PRESETS,
    ExperimentConfig,
    cmd_compare,
    cmd_iterate,
    cmd_simulate,
    cmd_validate,
    exit_code,
    run_batch,
)
from splitdyn.utils import ConfigError, SplitDynError, ValidationError


def open_config(parser: argparse.ArgumentParser, arg: str):
    try:
        with open(arg, "rb") as file:
            return tomllib.loads(file.read().decode("utf-8"))
    except FileNotFoundError:
        return parser.error(f"The file `{arg}` does not exist")
    except IsADirectoryError:
        return parser.error(f"`{arg}` is not a file")
    except TOMLDecodeError as err:
        return parser.error(f"config file parsing error:\n{str(err)}")
    except ValueError as err:
        return parser.error(str(err))


def parse_override(parser: argparse.ArgumentParser, arg: str) -> typing.Tuple[str, typing.Any]:
    key, sep, raw = arg.partition("=")
    if not sep or not key.strip():
        return parser.error(f"expected key=value, got `{arg}`")
    try:
        value = tomllib.loads(f"value = {raw.strip()}")["value"]
    except TOMLDecodeError:
        value = raw.strip()
    return key.strip(), value


def _flag_overrides(args) -> typing.Dict[str, typing.Any]:
    overrides = dict(args.set or [])
    flags = {
        "xi": args.xi,
        "gamma": args.gamma,
        "alpha": args.alpha,
        "lambda0": args.lambda0,
        "output": args.output,
        "seed": args.seed,
        "problem": args.f,
    }
    overrides.update({key: value for key, value in flags.items() if value is not None})
    return overrides


def build_configs(parser: argparse.ArgumentParser, args) -> typing.List[ExperimentConfig]:
    base = dict(PRESETS[args.preset]) if args.preset else {}
    overrides = _flag_overrides(args)
    try:
        return [ExperimentConfig({**base, **file, **overrides}) for file in args.config or [{}]]
    except (ConfigError, ValueError) as err:
        return parser.error(str(err))


def _print_result(command: str, result):
    if command == "validate":
        print(result, file=sys.stdout if result.passed else sys.stderr)
    elif command == "compare":
        print(result.frame().describe().to_string())
        print(result.summary)
    else:
        report = result.report
        print(f"{result.spec.name}: final distance {report.final_distance:.6g}, wall time {report.wall_time:.2f}s")


def _run_one(command: str, job) -> int:
    try:
        result = job()
    except ValidationError as err:
        print(err.report, file=sys.stderr)
        return 2
    except SplitDynError as err:
        logging.error("%s", err)
        return exit_code(err)
    _print_result(command, result)
    if command == "validate" and not result.passed:
        return 2
    return 0


def entry_point():
    parser = argparse.ArgumentParser(prog="splitdyn")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", action="append", type=lambda x: open_config(parser, x))
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--set", action="append", type=lambda x: parse_override(parser, x), metavar="KEY=VALUE")
    common.add_argument("--xi", type=float)
    common.add_argument("--gamma")
    common.add_argument("--f", choices=KINDS)
    common.add_argument("--alpha", type=float)
    common.add_argument("--lambda0", type=float)
    common.add_argument("--output")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, default=1)

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common])
    commands.add_parser("iterate", parents=[common])
    commands.add_parser("validate", parents=[common])
    compare = commands.add_parser("compare", parents=[common])
    compare.add_argument("--metric", choices=METRICS, required=True)
    compare.add_argument("--left", action="append", type=lambda x: parse_override(parser, x), metavar="KEY=VALUE")
    compare.add_argument("--right", action="append", type=lambda x: parse_override(parser, x), metavar="KEY=VALUE")
    args = parser.parse_args()

    if args.verbose == 0:
        logging.basicConfig(level=logging.ERROR)
    elif args.verbose == 1:
        logging.basicConfig(level=logging.WARNING)
    elif args.verbose == 2:
        logging.basicConfig(level=logging.INFO)
    else:
        logging.basicConfig(level=logging.DEBUG)

    configs = build_configs(parser, args)
    if args.command == "compare":
        if len(configs) == 2:
            left, right = configs
        else:
            try:
                left = configs[0].replace(**dict(args.left or []))
                right = configs[0].replace(**dict(args.right or []))
            except (ConfigError, ValueError) as err:
                parser.error(str(err))
        jobs = [functools.partial(cmd_compare, left, right, args.metric)]
    else:
        command = {"simulate": cmd_simulate, "iterate": cmd_iterate, "validate": cmd_validate}[args.command]
        jobs = [functools.partial(command, config) for config in configs]

    if len(jobs) == 1:
        sys.exit(_run_one(args.command, jobs[0]))

    codes = []
    for outcome in run_batch(jobs, args.jobs):
        if outcome.code == 0:
            _print_result(args.command, outcome.result)
            codes.append(2 if args.command == "validate" and not outcome.result.passed else 0)
        else:
            codes.append(outcome.code)
    sys.exit(max(codes))


if __name__ == "__main__":
    entry_point()
