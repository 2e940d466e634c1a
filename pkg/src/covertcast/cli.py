"""Command-line entry point: ``covertcast <analyze|simulate|scaling|detect|bsc-table>``.

Exit codes: 0 on success (rows with a per-n failure are flagged in the
output), 1 on configuration or channel validation errors, 2 when the covert
rate interval is empty at every blocklength of the grid.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .channels import ChannelError, load_channel
from .config import MODES, ConfigError, ExperimentConfig, load_config
from .experiments import AllInfeasible, run_detection, run_reliability, run_scaling
from .infotheory import analyze_channel, bsc_closed_forms, optimize_gamma
from .report import write_jsonl, write_table

log = logging.getLogger("covertcast")

DEFAULT_BSC_GRID = (0.01, 0.05, 0.11, 0.2, 0.3, 0.4)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="covertcast", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, bits=True):
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        if bits:
            sp.add_argument("--bits", action="store_true", help="report divergences and capacities in bits")

    a = sub.add_parser("analyze", help="channel divergences, lambda*, gamma* and coefficient bounds")
    a.add_argument("--channel", required=True, help="JSON channel file or bsc:pB,pW")
    common(a)

    for name, text in (
        ("simulate", "run the modes listed in the config (default: reliability)"),
        ("scaling", "log M1 / sqrt(n KL) along the n grid"),
        ("detect", "induced-law KL and LRT errors at the warden"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        common(sp, bits=False)

    t = sub.add_parser("bsc-table", help="closed-form BSC quantities over a (pB, pW) grid")
    t.add_argument("--pB", type=_floats, default=list(DEFAULT_BSC_GRID))
    t.add_argument("--pW", type=_floats, default=list(DEFAULT_BSC_GRID))
    common(t)
    return p


def _to_bits(d: dict, keys) -> dict:
    out = dict(d)
    for k in keys:
        if k in out and isinstance(out[k], float):
            out[k] = out[k] / math.log(2)
    return out


def _coef_bits(d: dict, keys) -> dict:
    # log M1 / sqrt(n D): numerator and D both rescale by 1/ln 2
    out = dict(d)
    for k in keys:
        if k in out and isinstance(out[k], float):
            out[k] = out[k] / math.sqrt(math.log(2))
    return out


def cmd_analyze(args) -> int:
    ch = load_channel(args.channel)
    an = analyze_channel(ch)
    co = optimize_gamma(an)
    coeffs = co.to_dict()
    if args.bits:
        coeffs = _coef_bits(coeffs, ("achievable_ub", "converse_floor"))
    report = {
        "channel": ch.to_json(),
        "units": "bits" if args.bits else "nats",
        "analysis": an.to_dict(bits=args.bits),
        "coefficients": coeffs,
    }
    write_table(report, args.out, args.format)
    return 0


def cmd_bsc_table(args) -> int:
    rows = []
    for pB in args.pB:
        for pW in args.pW:
            if not (0 < pB < 0.5 and 0 < pW < 0.5):
                raise ChannelError(f"crossovers must lie in (0, 0.5), got pB={pB}, pW={pW}")
            r = bsc_closed_forms(pB, pW)
            if args.bits:
                r = _to_bits(r, ("d_bob", "d_willie"))
                r = _coef_bits(r, ("upper_coefficient", "lower_coefficient"))
            rows.append(r)
    write_table(rows, args.out, args.format)
    return 0


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("missing --config <path>")
    cfg = load_config(args.config)
    try:
        return cfg.with_overrides(seed=args.seed, trials=args.trials)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _suffixed(out: str | None, tag: str, fmt: str) -> str | None:
    if out is None or out == "-":
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}.{tag}{p.suffix or '.' + fmt}"))


def cmd_simulate(args) -> int:
    cfg = _config(args)
    modes = [m for m in MODES if m in cfg.modes]
    if {"covertness_exact", "covertness_mc"} & set(modes) and "detection" not in modes:
        modes.append("detection")
    modes = [m for m in modes if m not in ("covertness_exact", "covertness_mc")]
    single = len(modes) == 1
    for mode in modes:
        out = args.out if single else _suffixed(args.out, mode, args.format)
        if mode == "reliability":
            rows, records = run_reliability(cfg)
            write_table(rows, out, args.format)
            if args.out and args.out != "-":
                h = cfg.config_hash()
                write_jsonl((r.to_dict() | {"config_hash": h} for r in records),
                            Path(args.out).with_suffix(".trials.jsonl"))
        elif mode == "scaling":
            write_table(run_scaling(cfg), out, args.format)
        elif mode == "detection":
            write_table(run_detection(cfg), out, args.format)
    return 0


def cmd_scaling(args) -> int:
    write_table(run_scaling(_config(args)), args.out, args.format)
    return 0


def cmd_detect(args) -> int:
    write_table(run_detection(_config(args)), args.out, args.format)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "scaling": cmd_scaling,
    "detect": cmd_detect,
    "bsc-table": cmd_bsc_table,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.command:
        parser.print_help(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ChannelError, OSError) as exc:
        print(f"covertcast: error: {exc}", file=sys.stderr)
        return 1
    except AllInfeasible as exc:
        print(f"covertcast: infeasible schedule on the whole grid: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
