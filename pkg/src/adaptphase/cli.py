"""Command-line front end.

Three subcommands write CSV (with a JSON sidecar next to ``--out``):

``simulate``      Monte Carlo batches of a phase-estimation protocol
``oracle``        analytic reference curves and tables
``discriminate``  multi-copy qubit state discrimination

Settings may also come from ``--config FILE`` holding flat ``key=value``
lines named after the long options; command-line flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .discrimination import (
    QubitPair,
    dolinar_qubit_limit,
    helstrom_bound,
    simulate_adaptive,
    simulate_majority,
)
from .montecarlo import derive_seed, fit_scaling, run_batch
from .oracles import (
    canonical_holevo_variance,
    canonical_sharpness,
    fisher_information,
    flat_state,
    helstrom_phase_limits,
    noon_state,
    optimal_state,
    qpea_distribution,
    qpea_error_density,
)
from .policies import Kind, ProtocolSchedule

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGENT = 4

SIMULATE_HEADER = (
    "protocol,K,M,M_K,mu,N,trials,seed,holevo_variance,ci_low,ci_high,sqrt_V,divergent"
)
DISCRIMINATE_HEADER = (
    "scheme,alpha,overlap,M,q,trials,seed,error_rate,helstrom_bound,ci_low,ci_high"
)
LIMITS_HEADER = "N,SQL,HL,HL_asymptotic"
DENSITY_HEADER = "N,delta,fejer_N,exact"
STATE_HEADER = "N,state,sharpness,holevo_variance,fisher_information"

COMMENT = "# angles in radians"


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """Shortest round-trip text for numbers; lowercase booleans."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def parse_range(text: str) -> List[int]:
    """``"4..8"`` -> [4..8] inclusive, ``"1,3,5"`` -> list, ``"7"`` -> [7]."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ConfigError(f"empty range {text!r}")
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer range {text!r}") from exc


def read_config(path: str) -> Dict[str, str]:
    cfg = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            cfg[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key=value file; flags take precedence")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--seed", type=int, default=0)

    sim = sub.add_parser("simulate", help="Monte Carlo protocol batches")
    common(sim)
    sim.add_argument("--protocol", required=True, choices=[k.value for k in Kind])
    sim.add_argument("--K", default=None, help="max pass exponent; accepts ranges like 4..8")
    sim.add_argument("--N", default=None, help="total resources for standard/hybrid; ranges ok")
    sim.add_argument("--M", type=int, default=None, help="repetitions per level (gqpea)")
    sim.add_argument("--M-K", dest="M_K", type=int, default=None)
    sim.add_argument("--mu", type=float, default=None)
    sim.add_argument("--hybrid-fraction", dest="hybrid_fraction", type=float, default=2.0 / 3.0)
    sim.add_argument("--trials", type=int, default=1000)
    sim.add_argument("--workers", type=int, default=None)
    sim.set_defaults(handler=cmd_simulate)

    orc = sub.add_parser("oracle", help="analytic reference values")
    common(orc)
    what = orc.add_mutually_exclusive_group(required=True)
    what.add_argument("--limits", action="store_true", help="SQL/HL curves")
    what.add_argument("--qpea-density", dest="qpea_density", action="store_true")
    what.add_argument("--state", choices=["flat", "optimal", "noon"])
    orc.add_argument("--N", required=True, help="resource count or range")
    orc.add_argument("--points", type=int, default=512)
    orc.set_defaults(handler=cmd_oracle)

    dis = sub.add_parser("discriminate", help="multi-copy qubit discrimination")
    common(dis)
    dis.add_argument("--scheme", required=True, choices=["adaptive", "majority", "dolinar"])
    dis.add_argument("--overlap", type=float, default=None)
    dis.add_argument("--alpha", type=float, default=None, help="half angle between states")
    dis.add_argument("--M", type=int, default=1, help="number of copies")
    dis.add_argument("--q", type=float, default=0.5, help="prior probability of '+'")
    dis.add_argument("--delta-alpha", dest="delta_alpha", type=float, default=None)
    dis.add_argument("--segments", type=int, default=None)
    dis.add_argument("--trials", type=int, default=100_000)
    dis.set_defaults(handler=cmd_discriminate)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        command = next((a for a in argv if not a.startswith("-")), None)
        subparsers = parser._subparsers._group_actions[0].choices
        if command in subparsers:
            sp = subparsers[command]
            valid = {a.dest for a in sp._actions}
            unknown = set(cfg) - valid
            if unknown:
                raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
            for action in sp._actions:
                if action.dest not in cfg:
                    continue
                action.required = False
                if action.nargs == 0:
                    cfg[action.dest] = cfg[action.dest].lower() in ("1", "true", "yes")
            for group in sp._mutually_exclusive_groups:
                if any(a.dest in cfg for a in group._group_actions):
                    group.required = False
            sp.set_defaults(**cfg)
    return parser.parse_args(argv)


# -- output -------------------------------------------------------------------

def _emit(args, header: str, rows: List[List], sidecar: dict) -> None:
    cols = header.split(",")
    if args.format == "json":
        text = json.dumps([dict(zip(cols, map(fmt, r))) for r in rows], indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write(COMMENT + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(x) for x in r])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        with open(args.out + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
    else:
        sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _config_dict(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "handler"}


# -- simulate -------------------------------------------------------------------

PROVENANCE = {
    Kind.STANDARD: "p=1 per qubit; theta advances by pi/N from a random offset",
    Kind.ADAPTIVE_STANDARD: "p=1 per qubit; theta maximises expected posterior sharpness",
    Kind.QPEA: "one qubit per level k=K..0 with 2^k passes; bit feedback theta += u*pi/2^k; "
    "estimate read from the theta register",
    Kind.GQPEA: "M qubits per level; theta maximises expected sharpness of harmonic 2^k; "
    "estimate arg(c_1)",
    Kind.HYBRID: "QPEA stage on ~2/3 of N, then p=1 sweep on the rest; estimate arg(c_1)",
    Kind.NALA: "M_K + floor(mu (K-k)) qubits at 2^k passes; theta sweeps by pi/M(K,k); "
    "estimate arg(c_1)",
    Kind.NALA_TWO_THETA: "18 + floor(16 ln2 (K-k)) qubits per level; theta alternates "
    "between 0 and pi/2 (plus a random offset); estimate arg(c_1)",
}


def _schedules(args) -> List[ProtocolSchedule]:
    kind = Kind(args.protocol)
    if kind in (Kind.STANDARD, Kind.ADAPTIVE_STANDARD, Kind.HYBRID):
        if args.N is None:
            if kind is Kind.HYBRID and args.K is not None:
                return [
                    ProtocolSchedule(Kind.HYBRID, K=k, hybrid_qpea_fraction=args.hybrid_fraction)
                    for k in parse_range(args.K)
                ]
            raise ConfigError(f"--N is required for {kind.value}")
        Ns = parse_range(args.N)
        if kind is Kind.HYBRID:
            return [ProtocolSchedule.hybrid(n, args.hybrid_fraction) for n in Ns]
        return [ProtocolSchedule(kind, M=n) for n in Ns]
    if args.K is None:
        raise ConfigError(f"--K is required for {kind.value}")
    Ks = parse_range(args.K)
    if kind is Kind.QPEA:
        return [ProtocolSchedule.qpea(k) for k in Ks]
    if kind is Kind.GQPEA:
        if args.M is None:
            raise ConfigError("--M is required for gqpea")
        return [ProtocolSchedule.gqpea(k, args.M) for k in Ks]
    if kind is Kind.NALA:
        if args.M_K is None or args.mu is None:
            raise ConfigError("--M-K and --mu are required for nala")
        return [ProtocolSchedule.nala(k, args.M_K, args.mu) for k in Ks]
    return [ProtocolSchedule.nala_two_theta(k) for k in Ks]


def _schedule_columns(s: ProtocolSchedule):
    k = s.kind
    K = None if k in (Kind.STANDARD, Kind.ADAPTIVE_STANDARD) else s.K
    M = s.M if k in (Kind.GQPEA, Kind.STANDARD, Kind.ADAPTIVE_STANDARD) else None
    M_K = s.M_K if k in (Kind.NALA, Kind.NALA_TWO_THETA) else None
    mu = s.mu if k in (Kind.NALA, Kind.NALA_TWO_THETA) else None
    return [k.value, K, M, M_K, mu]


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    schedules = _schedules(args)
    rows, records = [], []
    for i, sch in enumerate(schedules):
        seed = args.seed if len(schedules) == 1 else derive_seed(args.seed, i)
        b = run_batch(sch, args.trials, seed, workers=args.workers)
        sqrt_v = math.inf if b.divergent else b.sqrt_V
        rows.append(
            _schedule_columns(sch)
            + [sch.N, b.trials, seed, b.holevo_variance, b.ci_low, b.ci_high, sqrt_v, b.divergent]
        )
        records.append({"schedule": sch.describe(), "N": sch.N, "seed": seed})
    sidecar = {
        "command": "simulate",
        "config": _config_dict(args),
        "provenance": PROVENANCE[Kind(args.protocol)],
        "batches": records,
        "notes": "sqrt_V is the square root of the Holevo variance; CI is a 95% percentile "
        "bootstrap over 2000 resamples",
    }
    finite = [(r[5], r[8]) for r in rows if not r[-1]]
    if len(finite) >= 3:
        fit = fit_scaling(finite)
        sidecar["fit"] = {"exponent": fit.exponent, "intercept": fit.intercept, "C": fit.constant}
    _emit(args, SIMULATE_HEADER, rows, sidecar)
    if all(r[-1] for r in rows):
        print("all batches have divergent Holevo variance", file=sys.stderr)
        return EXIT_DIVERGENT
    return EXIT_OK


# -- oracle -------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    Ns = parse_range(args.N)
    if not Ns or min(Ns) < 1:
        raise ConfigError("--N values must be >= 1")
    rows = []
    if args.limits:
        header = LIMITS_HEADER
        for n in Ns:
            lim = helstrom_phase_limits(n)
            rows.append([n, lim["SQL"], lim["HL"], lim["HL_asymptotic"]])
    elif args.qpea_density:
        if args.points < 2:
            raise ConfigError("--points must be >= 2")
        header = DENSITY_HEADER
        x = np.linspace(-math.pi, math.pi, args.points)
        for n in Ns:
            pub = qpea_error_density(x, n) / (2 * math.pi)
            exact = qpea_distribution(x, n)
            rows.extend([n, xi, a, b] for xi, a, b in zip(x, pub, exact))
    else:
        header = STATE_HEADER
        make = {"flat": flat_state, "optimal": optimal_state, "noon": noon_state}[args.state]
        for n in Ns:
            st = make(n)
            rows.append(
                [n, args.state, canonical_sharpness(st), canonical_holevo_variance(st),
                 fisher_information(st)]
            )
    sidecar = {
        "command": "oracle",
        "config": _config_dict(args),
        "notes": "fejer_N = sin^2(N d/2)/(2 pi N sin^2(d/2)); exact = QPEA error density "
        "for N = 2^(K+1)-1 resources (Fejer kernel of order N+1); fisher_information is "
        "the classical Fisher information F of the canonical measurement",
    }
    _emit(args, header, rows, sidecar)
    return EXIT_OK


# -- discriminate -------------------------------------------------------------------

def _binomial_ci(k: int, n: int):
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="exact")
    return ci.low, ci.high


def cmd_discriminate(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    if args.scheme == "dolinar":
        if args.delta_alpha is None or args.segments is None:
            raise ConfigError("--delta-alpha and --segments are required for dolinar")
        mapping = dolinar_qubit_limit(args.delta_alpha, args.segments, args.q)
        pair, M, bound = mapping.pair, args.segments, mapping.predicted_error
        res = simulate_adaptive(pair, M, args.trials, args.seed)
        extra = {"asymptotic_error": mapping.asymptotic_error,
                 "segment_excitation": mapping.segment_excitation}
    else:
        if (args.overlap is None) == (args.alpha is None):
            raise ConfigError("give exactly one of --overlap or --alpha")
        pair = (QubitPair.from_overlap(args.overlap, args.q) if args.overlap is not None
                else QubitPair(args.alpha, args.q))
        M = args.M
        if M < 1:
            raise ConfigError("--M must be >= 1")
        bound = helstrom_bound(args.q, pair.overlap ** M)
        sim = simulate_adaptive if args.scheme == "adaptive" else simulate_majority
        res = sim(pair, M, args.trials, args.seed)
        extra = {}
    k = int(res.errors.sum())
    lo, hi = _binomial_ci(k, args.trials)
    rows = [[args.scheme, pair.alpha, pair.overlap, M, args.q, args.trials, args.seed,
             res.error_rate, bound, lo, hi]]
    sidecar = {
        "command": "discriminate",
        "config": _config_dict(args),
        "notes": "helstrom_bound is the ensemble bound at overlap^M; CI is Clopper-Pearson 95%",
        **extra,
    }
    _emit(args, DISCRIMINATE_HEADER, rows, sidecar)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        # argparse reports usage errors (and --help) by exiting
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    except ConfigError as exc:
        print(f"adaptphase: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"adaptphase: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return args.handler(args)
    except (ConfigError, ValueError) as exc:
        print(f"adaptphase: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"adaptphase: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
