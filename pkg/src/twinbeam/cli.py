"""Command-line front end.

    twinbeam simulate     --scenario fig2a --out runs/fig2a
    twinbeam sweep        --scenario fano-sweep --out runs/fano
    twinbeam fit-gain     data.csv --out runs/gain
    twinbeam oracle-check --scenario oracle-small --out runs/oracle
    twinbeam scenarios

Exit status: 0 success, 2 config/input error, 3 I/O error,
4 guard violation, 5 oracle-check failure, 6 fit failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .core import ConfigError, GuardError
from .estimators import FitError, fmt, gain_fit
from .experiments import run_oracle_check, run_simulate, run_sweep
from .oracle import TruncationError
from .scenarios import BUILTIN, builtin, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_GUARD = 4
EXIT_ORACLE_FAIL = 5
EXIT_FIT = 6

log = logging.getLogger("twinbeam")


def _scenario(args):
    if args.config and args.scenario:
        raise ConfigError(["give either --config or --scenario, not both"])
    if args.config:
        sc = load_scenario(args.config)
    elif args.scenario:
        sc = builtin(args.scenario)
    else:
        raise ConfigError(["one of --config or --scenario is required"])
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    if args.pulses is not None:
        if args.pulses < 1:
            raise ConfigError(["--pulses must be >= 1"])
        sc = replace(sc, pulses=args.pulses)
    return sc


def _cmd_simulate(args):
    sc = _scenario(args)
    res = run_simulate(sc, args.out, args.threads)
    st = res.stats
    print(f"{sc.name}: {res.ensemble.pulse_count} pulses, seed {sc.seed}")
    print(f"  unconditioned  MDR_s={fmt(st['mdr_s'].value)}  MDR_i={fmt(st['mdr_i'].value)}"
          f"  NRF={fmt(st['nrf'].value)}  F={fmt(st['fano'].value)}")
    for wr in res.windows:
        w = wr.window
        if wr.note:
            print(f"  window c={w.center_scale:g} w={w.width_sigma:g}: {wr.note}")
            continue
        s = wr.stats
        print(f"  window c={w.center_scale:g} w={w.width_sigma:g} acc={wr.acceptance:.4f}"
              f"  MDR_s={fmt(s['mdr_s'].value)}  MDR_i={fmt(s['mdr_i'].value)}"
              f"  NRF={fmt(s['nrf'].value)}  F={fmt(s['fano'].value)}")
    return EXIT_OK


def _cmd_sweep(args):
    sc = _scenario(args)
    if not sc.sweep:
        raise ConfigError([f"scenario {sc.name!r} has no sweep values"])
    res = run_sweep(sc, args.out, args.threads)
    print(f"{sc.name}: {len(res.points)} points x {sc.pulses} pulses")
    print("stat,conditioned,window_c,window_w,slope,slope_stderr")
    for row in res.fit_rows():
        print(",".join(row[:6]))
    for p in res.points:
        for k, wr in enumerate(p.windows):
            if wr.note:
                print(f"  flagged N_m={p.n_mean:g} window {k}: {wr.note}")
    return EXIT_OK


def read_gain_csv(path):
    """Read a two-column CSV with header ``P,S``."""
    text = Path(path).read_text()
    rows = list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))
    if not rows or [h.strip() for h in rows[0][:2]] != ["P", "S"]:
        raise ConfigError([f"{path}: expected header P,S"])
    powers, signals = [], []
    for k, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            powers.append(float(row[0]))
            signals.append(float(row[1]))
        except (ValueError, IndexError):
            raise ConfigError([f"{path}:{k}: malformed row {row!r}"]) from None
    return powers, signals


def _cmd_fit_gain(args):
    powers, signals = read_gain_csv(args.data)
    fit = gain_fit(powers, signals)
    print(f"A={fmt(fit.amplitude_A)} B={fmt(fit.rate_B)} residual_rms={fmt(fit.residual_rms)}")
    print(f"G range [{fit.gain_min:.4g}, {fit.gain_max:.4g}]")
    lines = ["P,S,G,S_fit"]
    for p, s in zip(powers, signals):
        lines.append(",".join([fmt(p), fmt(s), fmt(float(fit.gain(p))),
                               fmt(float(fit.predict(p)))]))
    table = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gain_table.csv").write_text(table)
        (out / "gain_fit.csv").write_text(
            "A,B,residual_rms,G_min,G_max\n" + ",".join(
                fmt(v) for v in (fit.amplitude_A, fit.rate_B, fit.residual_rms,
                                 fit.gain_min, fit.gain_max)) + "\n")
    else:
        sys.stdout.write(table)
    return EXIT_OK


def _cmd_oracle_check(args):
    sc = _scenario(args)
    oracle_cfg = None
    if args.perturb_oracle_eta:
        ch = sc.channel
        bad = replace(ch, eta_signal=ch.eta_signal + args.perturb_oracle_eta,
                      eta_idler=ch.eta_idler + args.perturb_oracle_eta)
        oracle_cfg = replace(sc, channel=bad).config()
    report = run_oracle_check(sc, args.threads, oracle_config=oracle_cfg, out=args.out)
    sys.stdout.write(report.to_csv())
    print("oracle check:", "PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_ORACLE_FAIL


def _cmd_scenarios(args):
    for name, sc in sorted(BUILTIN.items()):
        src = sc.source
        print(f"{name}: N_m={src.n_mean_per_mode:g} M={src.matched_modes} "
              f"K={src.unmatched_modes} r={sc.channel.tap_ratio:g} pulses={sc.pulses}"
              + (f" sweep={len(sc.sweep)} points" if sc.sweep else ""))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario file")
    common.add_argument("--scenario", help="built-in scenario name")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--pulses", type=int, help="override pulses per point")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for ensemble generation")

    parser = argparse.ArgumentParser(prog="twinbeam", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="single scenario run").set_defaults(
        func=_cmd_simulate)
    sub.add_parser("sweep", parents=[common], help="statistics versus N_m").set_defaults(
        func=_cmd_sweep)
    p = sub.add_parser("fit-gain", help="fit S = A sinh^2(sqrt(B P))")
    p.add_argument("data", type=Path, help="CSV with columns P,S")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_fit_gain)
    p = sub.add_parser("oracle-check", parents=[common],
                       help="Monte Carlo versus exact enumeration")
    p.add_argument("--perturb-oracle-eta", type=float, default=0.0,
                   help="shift the exact side's beam efficiencies (negative control)")
    p.set_defaults(func=_cmd_oracle_check)
    sub.add_parser("scenarios", help="list built-in scenarios").set_defaults(
        func=_cmd_scenarios)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except GuardError as exc:
        log.error("guard violation: %s", exc)
        return EXIT_GUARD
    except TruncationError as exc:
        log.error("guard violation: %s", exc)
        return EXIT_GUARD
    except FitError as exc:
        log.error("fit failed: %s", exc)
        return EXIT_FIT
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
