"""Command-line interface.

Times are reported in units of ``1/kappa`` and rates in units of ``kappa``
unless ``--raw-units`` is given. Outputs are CSV with 15 significant
digits; diagnostics go to stderr. The exit status is 0 only when every
internal cross-check passes.

Options can also come from a ``key=value`` file passed with ``--config``
(``#`` starts a comment); command-line flags take precedence over it.
"""
import argparse
import csv
import logging
import os
import secrets
import sys

import numpy as np

from . import closedform as cf
from . import wtd
from .errors import DQDWTDError, InconsistentSystemError, QuadratureError
from .liouvillian import ELECTRON_OUT, PHOTON_LEAK
from .model import ModelParams, efficiency_detuned, efficiency_resonant, photon_scenario
from .trajectories import simulate_records, summarize, write_click_dump

OUTPUT_DIR_ENV = "DQDWTD_OUTPUT_DIR"
ENGINE_TOL = 1e-8
Z_LIMIT = 5.0

E, G = ELECTRON_OUT, PHOTON_LEAK
SEQUENCES = {
    "p_ee": (E, E),
    "p_egamma": (E, G),
    "p_gammae": (G, E),
    "p_gammagamma": (G, G),
}


class CheckFailed(Exception):
    pass


def fmt(x):
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.15g}"


def write_csv(args, header, rows):
    out = _open_output(args)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    finally:
        if out is not sys.stdout:
            out.close()


def _open_output(args):
    path = args.output
    if path is None:
        outdir = os.environ.get(OUTPUT_DIR_ENV)
        if not outdir:
            return sys.stdout
        path = os.path.join(outdir, f"{args.command}.csv")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def read_config(path):
    """Parse a flat ``key=value`` file; keys use flag names without dashes."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _linspace(start, stop, count, minimum=2):
    if count < minimum:
        raise ValueError(f"count must be >= {minimum}")
    return np.linspace(start, stop, count)


def _time_scale(args):
    """Multiply raw times by this to get reported times."""
    return 1.0 if args.raw_units else args.kappa


# --- commands ---------------------------------------------------------------

def cmd_probabilities(args):
    n = args.photons
    try:
        sc = photon_scenario(args.alpha, args.coop, n, kappa=args.kappa)
        closed = cf.closed_form_table(args.alpha, args.coop)
        rows = []
        if n == 1:
            pe = wtd.first_jump_probability(sc.L0, sc.jumps[E], sc.rho0)
            pg = wtd.first_jump_probability(sc.L0, sc.jumps[G], sc.rho0)
            t1 = wtd.mean_first_jump_time(sc.L0, sc.rho0) * args.kappa
            numeric = {"p_e": pe, "p_gamma": pg, "kappa_t1": t1}
        else:
            table = wtd.jump_probability_table(sc.L0, sc.jumps, sc.rho0, length=2)
            numeric = {name: table.entries[seq] for name, seq in SEQUENCES.items()}
            numeric["p_e1"] = table.marginal(0, E)
            numeric["p_e2"] = table.marginal(1, E)
    except InconsistentSystemError as exc:
        raise CheckFailed(f"{n}-photon scenario at alpha={args.alpha}, C={args.coop}: {exc}") from exc
    for name, value in numeric.items():
        ref = getattr(closed, name)
        rows.append((name, ref, value, abs(ref - value)))
    if n == 2:
        total = sum(numeric[k] for k in SEQUENCES)
        rows.append(("sum_sequences", 1.0, total, abs(total - 1.0)))
    write_csv(args, ["quantity", "closed_form", "numeric", "abs_diff"], rows)
    worst = max(r[3] for r in rows)
    if worst > ENGINE_TOL:
        raise CheckFailed(f"engine and closed forms differ by {worst:.3e} > {ENGINE_TOL}")


def cmd_sweep(args):
    axis = "C" if args.axis in ("C", "cooperativity") else "alpha"
    grid = _linspace(args.start, args.stop, args.count)
    other = "alpha" if axis == "C" else "C"
    header = [axis, other, "p_e", "p_e1", "p_e2", "p_ee", "kappa_t1", "max_engine_diff"]
    rows = []
    worst = 0.0
    for x in grid:
        alpha, coop = (args.alpha, x) if axis == "C" else (x, args.coop)
        if not alpha > 0 or coop < 0:
            raise ValueError(f"invalid grid point alpha={alpha}, C={coop}")
        ref = cf.closed_form_table(alpha, coop)
        sc1 = photon_scenario(alpha, coop, 1)
        diffs = [
            abs(wtd.first_jump_probability(sc1.L0, sc1.jumps[E], sc1.rho0) - ref.p_e),
            abs(wtd.mean_first_jump_time(sc1.L0, sc1.rho0) - ref.kappa_t1),
        ]
        if args.photons == 2:
            sc2 = photon_scenario(alpha, coop, 2)
            table = wtd.jump_probability_table(sc2.L0, sc2.jumps, sc2.rho0, length=2)
            diffs += [
                abs(table.marginal(0, E) - ref.p_e1),
                abs(table.marginal(1, E) - ref.p_e2),
                abs(table.entries[(E, E)] - ref.p_ee),
            ]
        diff = max(diffs)
        worst = max(worst, diff)
        first, second = (coop, alpha) if axis == "C" else (alpha, coop)
        rows.append((first, second, ref.p_e, ref.p_e1, ref.p_e2, ref.p_ee, ref.kappa_t1, diff))
    write_csv(args, header, rows)
    if worst > ENGINE_TOL:
        raise CheckFailed(f"max engine difference {worst:.3e} > {ENGINE_TOL}")


def cmd_wtd_curve(args):
    sc = photon_scenario(args.alpha, args.coop, args.photons, kappa=args.kappa,
                         delta_d=args.delta_d * args.kappa, delta_r=args.delta_r * args.kappa)
    scale = _time_scale(args)
    rows = []
    for t_rep in _linspace(args.t_from, args.t_to, args.count):
        t = t_rep / scale
        we = wtd.wtd_time_density(sc.L0, sc.jumps[E], sc.rho0, t)
        wg = wtd.wtd_time_density(sc.L0, sc.jumps[G], sc.rho0, t)
        wt = wtd.first_jump_time_density(sc.L0, sc.rho0, t, jumps=sc.jumps)
        surv = wtd.survival_probability(sc.L0, sc.rho0, t)
        rows.append((t_rep, we / scale, wg / scale, wt / scale, surv))
    write_csv(args, ["t", "W_e", "W_gamma", "W_total", "survival"], rows)


def cmd_efficiency(args):
    k = args.kappa
    base = ModelParams.from_dimensionless(args.alpha, args.coop, kappa=k,
                                          epsilon=args.epsilon, t_c=args.t_c)
    dd = _linspace(args.dd_from, args.dd_to, args.dd_count, minimum=1)
    dr = _linspace(args.dr_from, args.dr_to, args.dr_count, minimum=1)
    resonant = efficiency_resonant(args.epsilon, args.t_c, args.coop)
    rows = []
    worst = 0.0
    for d in dd:
        for r in dr:
            eta = efficiency_detuned(base.replace(delta_d=d * k, delta_r=r * k))
            if d == 0 and r == 0:
                worst = max(worst, abs(eta - resonant))
            rows.append((d, r, eta))
    write_csv(args, ["delta_d", "delta_r", "eta"], rows)
    if worst > 1e-12:
        raise CheckFailed(f"detuned formula at resonance differs from resonant one by {worst:.3e}")


def cmd_dyson(args):
    K = args.photons if args.max_jumps is None else args.max_jumps
    sc = photon_scenario(args.alpha, args.coop, args.photons, kappa=args.kappa,
                         delta_d=args.delta_d * args.kappa, delta_r=args.delta_r * args.kappa)
    scale = _time_scale(args)
    rows = []
    try:
        for t_rep in _linspace(args.t_from, args.t_to, args.count):
            probs = wtd.jump_number_decomposition(sc.split.L, sc.L0, sc.jumps, sc.rho0,
                                                  t_rep / scale, K, nodes=args.nodes)
            rows.append((t_rep, *probs))
    except QuadratureError as exc:
        raise CheckFailed(str(exc)) from exc
    write_csv(args, ["t"] + [f"P{k}" for k in range(K + 1)], rows)


def cmd_trajectories(args):
    if args.n < 100:
        print(f"warning: n={args.n} < 100 trajectories; standard errors are unreliable",
              file=sys.stderr)
    seed = args.seed
    if seed is None:
        seed = secrets.randbits(63)
        print(f"no --seed given; using seed={seed}", file=sys.stderr)
    n = args.photons
    sc = photon_scenario(args.alpha, args.coop, n, kappa=args.kappa,
                         delta_d=args.delta_d * args.kappa, delta_r=args.delta_r * args.kappa)
    t_max = args.t_max / args.kappa
    records = simulate_records(sc.model.H, sc.model.channels, sc.psi0, args.n, seed, t_max,
                               backend=args.backend)
    stats = summarize(*records, seed)
    if stats.n_unterminated:
        print(f"warning: {stats.n_unterminated}/{args.n} trajectories reached t_max",
              file=sys.stderr)
    resonant = args.delta_d == 0 and args.delta_r == 0
    closed = cf.closed_form_table(args.alpha, args.coop) if resonant else None
    t_engine = wtd.mean_first_jump_time(sc.L0, sc.rho0) * args.kappa
    scale = _time_scale(args)
    rows = []
    if n == 1:
        targets = {
            "p_e": closed.p_e if closed else wtd.first_jump_probability(sc.L0, sc.jumps[E], sc.rho0),
            "p_gamma": closed.p_gamma if closed else wtd.first_jump_probability(sc.L0, sc.jumps[G], sc.rho0),
        }
        est = {"p_e": stats.first_click_freq[E], "p_gamma": stats.first_click_freq[G]}
    else:
        table = wtd.jump_probability_table(sc.L0, sc.jumps, sc.rho0, length=2)
        targets = {name: (getattr(closed, name) if closed else table.entries[seq])
                   for name, seq in SEQUENCES.items()}
        targets["p_e1"] = closed.p_e1 if closed else table.marginal(0, E)
        targets["p_e2"] = closed.p_e2 if closed else table.marginal(1, E)
        est = {name: stats.sequence_freq[seq] for name, seq in SEQUENCES.items()}
        est["p_e1"] = stats.position_freq(0, E)
        est["p_e2"] = stats.position_freq(1, E)
    for name, (value, se) in est.items():
        rows.append((name, value, se, targets[name], _z(value, se, targets[name])))
    if n == 1 and closed:
        t_target = closed.kappa_t1
    else:
        t_target = t_engine
    mt, mse = stats.mean_first_click_time
    t_target_rep = t_target / args.kappa * scale
    rows.append(("t1" if args.raw_units else "kappa_t1", mt * scale, mse * scale, t_target_rep,
                 _z(mt * scale, mse * scale, t_target_rep)))
    write_csv(args, ["quantity", "estimate", "stderr", "target", "z"], rows)
    print(f"n_traj={stats.n_traj} seed={seed} unterminated={stats.n_unterminated}",
          file=sys.stderr)

    if args.dump:
        names, labels, times, n_clicks, _ = records
        with open(args.dump, "w", encoding="utf-8", newline="") as fh:
            write_click_dump(fh, names, labels, times, n_clicks, time_unit=1.0 / scale)

    worst = max(abs(r[4]) for r in rows if not np.isnan(r[4]))
    if worst > Z_LIMIT:
        raise CheckFailed(f"|z| = {worst:.2f} exceeds {Z_LIMIT}")


def _z(value, se, target):
    if se > 0:
        return (value - target) / se
    return 0.0 if value == target else float("inf")


# --- parser -----------------------------------------------------------------

def _positive(x):
    v = float(x)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {x}")
    return v


def _nonneg(x):
    v = float(x)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {x}")
    return v


def _photons(allowed):
    def parse(x):
        v = int(x)
        if v not in allowed:
            raise argparse.ArgumentTypeError(
                f"photon number must be one of {sorted(allowed)}, got {v}")
        return v
    return parse


def _count(x):
    v = int(x)
    if v < 2:
        raise argparse.ArgumentTypeError(f"count must be >= 2, got {v}")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file with defaults for any option")
    common.add_argument("--alpha", type=_positive, default=1.0, help="gamma/kappa")
    common.add_argument("--coop", "--C", dest="coop", type=_nonneg, default=1.0,
                        help="cooperativity 4 g^2/(gamma kappa)")
    common.add_argument("--kappa", type=_positive, default=1.0, help="photon loss rate (unit)")
    common.add_argument("--output", "-o", help="CSV path (default: stdout or $%s)" % OUTPUT_DIR_ENV)
    common.add_argument("--raw-units", action="store_true",
                        help="report times and rates in raw units instead of 1/kappa, kappa")
    common.add_argument("-v", "--verbose", action="store_true")

    detuning = argparse.ArgumentParser(add_help=False)
    detuning.add_argument("--delta-d", type=float, default=0.0, help="dot detuning / kappa")
    detuning.add_argument("--delta-r", type=float, default=0.0, help="cavity detuning / kappa")

    times = argparse.ArgumentParser(add_help=False)
    times.add_argument("--t-from", type=_nonneg, default=0.0)
    times.add_argument("--t-to", type=_nonneg, default=10.0)
    times.add_argument("--count", type=_count, default=101)

    parser = argparse.ArgumentParser(prog="dqdwtd", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probabilities", parents=[common],
                       help="closed-form vs numeric click probabilities")
    p.add_argument("--photons", type=_photons({1, 2}), default=1)
    p.set_defaults(func=cmd_probabilities)

    p = sub.add_parser("sweep", parents=[common], help="closed forms along an alpha or C grid")
    p.add_argument("--axis", choices=["C", "cooperativity", "alpha"], default="C")
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.add_argument("--to", dest="stop", type=float, default=10.0)
    p.add_argument("--count", type=_count, default=101)
    p.add_argument("--photons", type=_photons({1, 2}), default=1,
                   help="2 also cross-checks the two-photon columns")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("wtd-curve", parents=[common, detuning, times],
                       help="time-resolved waiting-time densities")
    p.add_argument("--photons", type=_photons(range(1, 9)), default=1)
    p.set_defaults(func=cmd_wtd_curve)

    p = sub.add_parser("trajectories", parents=[common, detuning],
                       help="quantum-jump Monte Carlo ensemble")
    p.add_argument("--photons", type=_photons({1, 2}), default=1)
    p.add_argument("--n", type=int, default=10000, help="number of trajectories")
    p.add_argument("--seed", type=int, help="master seed (random if omitted)")
    p.add_argument("--t-max", type=_positive, default=200.0, help="time limit in units of 1/kappa")
    p.add_argument("--backend", choices=["numba", "numpy"])
    p.add_argument("--dump", help="write traj_id,channel,time lines to this file")
    p.set_defaults(func=cmd_trajectories)

    p = sub.add_parser("efficiency", parents=[common], help="detection efficiency vs detunings")
    p.add_argument("--epsilon", type=float, default=1.0, help="dot energy difference")
    p.add_argument("--t-c", type=float, default=0.0, help="interdot tunneling")
    for name in ("dd", "dr"):
        p.add_argument(f"--{name}-from", type=float, default=0.0)
        p.add_argument(f"--{name}-to", type=float, default=0.0)
        p.add_argument(f"--{name}-count", type=int, default=1)
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("dyson", parents=[common, detuning, times],
                       help="probabilities of k clicks up to time t")
    p.add_argument("--photons", type=_photons(range(1, 5)), default=1)
    p.add_argument("--max-jumps", type=int, help="highest k (default: photons)")
    p.add_argument("--nodes", type=int, default=64, help="Gauss-Legendre nodes per layer")
    p.set_defaults(func=cmd_dyson)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        for action in subparser._actions:
            if action.dest in cfg and isinstance(action, argparse._StoreTrueAction):
                cfg[action.dest] = cfg[action.dest].lower() in ("1", "true", "yes", "on")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (DQDWTDError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
