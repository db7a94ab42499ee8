#!/usr/bin/env python3
import logging
import sys

from imcflab.config import CONF
from imcflab.errors import ConfigError
from imcflab.scenario import EXIT_CONFIG, EXIT_FAILED, EXPERIMENTS, load_scenario, parse_scenario, run

USAGE = """Usage:
  python cli.py <metric|green|flow|mass|profile> --config scenario.json [--out DIR] [--threads N] [--tolerance-scale X]
  python cli.py verify [radial|grid|full] [--config scenario.json] [--out DIR] [--tolerance-scale X]
"""


def parse_flags(args: list[str]) -> tuple[dict, list[str]]:
    """Pull --config/--out/--threads/--tolerance-scale out of args; the rest stay positional."""
    flags: dict = {}
    rest: list[str] = []
    i = 0
    while i < len(args):
        arg = args[i]
        if arg in ("--config", "--out", "--threads", "--tolerance-scale"):
            if i + 1 >= len(args):
                raise ConfigError(f"{arg} needs a value")
            flags[arg[2:].replace("-", "_")] = args[i + 1]
            i += 2
        elif arg.startswith("--"):
            raise ConfigError(f"unknown flag {arg}")
        else:
            rest.append(arg)
            i += 1
    try:
        if "threads" in flags:
            flags["threads"] = int(flags["threads"])
            if flags["threads"] < 1:
                raise ValueError
        if "tolerance_scale" in flags:
            flags["tolerance_scale"] = float(flags["tolerance_scale"])
            if not flags["tolerance_scale"] > 0:
                raise ValueError
    except ValueError:
        raise ConfigError("--threads must be a positive integer and --tolerance-scale a positive number")
    return flags, rest


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=CONF.log_level, format="%(levelname)s %(name)s: %(message)s")
    if not argv or argv[0] not in EXPERIMENTS:
        print(USAGE)
        return EXIT_FAILED

    cmd = argv[0]
    try:
        flags, rest = parse_flags(argv[1:])
    except ConfigError as e:
        print(f"[CLI] {e}")
        print(USAGE)
        return EXIT_FAILED
    if "threads" in flags:
        CONF.threads = flags["threads"]

    try:
        if "config" in flags:
            sc = load_scenario(flags["config"])
            if sc.experiment != cmd:
                raise ConfigError(f"scenario runs {sc.experiment!r}, not {cmd!r}", path=flags["config"])
        elif cmd == "verify":
            suite = rest[0] if rest else "radial"
            sc = parse_scenario({"experiment": "verify", "suite": suite})
        else:
            print(f"[CLI] {cmd} needs --config")
            return EXIT_FAILED
    except ConfigError as e:
        print(f"[CLI] {e}")
        # unknown suite names are usage errors
        return EXIT_FAILED if cmd == "verify" and "config" not in flags else EXIT_CONFIG

    try:
        code, _ = run(sc, flags.get("out"), flags.get("threads"), flags.get("tolerance_scale"))
    except ConfigError as e:
        print(f"[CLI] {e}")
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
