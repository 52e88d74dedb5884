"""Command-line front end: ``hedgelab <command> --config FILE``."""
from __future__ import annotations

import argparse
import os
import sys
import tempfile

from . import constants, fourier, levy, montecarlo, payoffs
from .config import ConfigError, parse_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

NUMERIC_ERRORS = (
    payoffs.NoAdmissibleStrip,
    payoffs.InadmissibleR,
    fourier.IntegrabilityError,
    fourier.QuadratureError,
    levy.StripError,
    levy.AdjustmentError,
    levy.EnvelopeError,
    montecarlo.SignalError,
    ArithmeticError,
)

ERRORS_HEADER = ["strategy", "n", "h", "mean_sq", "std_err", "n_paths", "mean", "mean_se"]
RATEFIT_HEADER = ["strategy", "method", "slope", "ci_low", "ci_high", "r_squared", "intercept", "h_fine", "status"]
THEORY_HEADER = ["strategy", "n", "h", "theorem", "beta_pred", "constant_pred", "mean_sq", "ratio"]


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if v is None:
        return "nan"
    return "%.17e" % float(v)


def _csv(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_atomic(directory, files):
    """Write {name: text} into directory; either all files appear or none."""
    os.makedirs(directory, exist_ok=True)
    temps, done = [], []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=directory)
            temps.append((tmp, os.path.join(directory, name)))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
        for tmp, final in temps:
            backup = None
            if os.path.exists(final):
                backup = tmp + ".old"
                os.link(final, backup)
            try:
                os.replace(tmp, final)
            except BaseException:
                if backup is not None:
                    os.unlink(backup)
                raise
            done.append((final, backup))
    except BaseException:
        for tmp, _ in temps:
            if os.path.exists(tmp):
                os.unlink(tmp)
        # roll back files already moved into place
        for final, backup in done:
            if backup is None:
                os.unlink(final)
            else:
                os.replace(backup, final)
        raise
    for _, backup in done:
        if backup is not None:
            os.unlink(backup)


# ---------------------------------------------------------------------------
# commands


def cmd_predict(cfg, args, out):
    pair, pay = cfg.market_pair(), cfg.payoff_obj()
    for s in cfg.strategies:
        pred = constants.predict(pair, pay, s, cfg.T, S0=cfg.S0)
        line = f"strategy={s} theorem={pred.theorem}"
        if pred.covered:
            line += f" beta={pred.rate_exponent:.4g}"
            if pred.constant is not None:
                line += f" constant={pred.constant:.10g}"
        print(line, file=out)
        for k, v in pred.diagnostics.items():
            print(f"  {k}={v}", file=out)
    return EXIT_OK


def cmd_price(cfg, args, out):
    pair, pay = cfg.market_pair(), cfg.payoff_obj()
    S = cfg.S0 if args.spot is None else args.spot
    v = fourier.price(pair, pay, args.t, S, T=cfg.T)
    print(f"t={args.t:g} S={S:g} price={v:.15g}", file=out)
    return EXIT_OK


def cmd_strategy(cfg, args, out):
    pair, pay = cfg.market_pair(), cfg.payoff_obj()
    S = cfg.S0 if args.spot is None else args.spot
    parts = [f"t={args.t:g}", f"S={S:g}"]
    for s in cfg.strategies:
        parts.append(f"{s}={fourier.strategy_value(pair, pay, s, args.t, S, T=cfg.T):.15g}")
    print(" ".join(parts), file=out)
    return EXIT_OK


def cmd_constants(cfg, args, out):
    pair = cfg.market_pair()
    p = pair.p_model
    print(f"A={pair.A:.15g}", file=out)
    print(f"A_bar={pair.A_bar:.15g}", file=out)
    print(f"D={constants.constant_D():.15g}", file=out)
    alpha = p.bg_index
    if p.a == 0 and 1 < alpha < 2:
        print(f"D_alpha={constants.constant_D_alpha(alpha):.15g} alpha={alpha:g}", file=out)
        if alpha > 1.5:
            print(f"Q_alpha={constants.constant_Q_alpha(alpha):.15g}", file=out)
        try:
            sc = constants.stable_coeffs(p)
            print(f"c_plus={sc.c_plus:.10g} c_minus={sc.c_minus:.10g}", file=out)
        except (ValueError, ArithmeticError) as exc:
            print(f"stable coefficients unavailable: {exc}", file=out)
    print(f"two_pi_power={constants.TWO_PI_POWER}", file=out)
    return EXIT_OK


def run_experiment(cfg, threads=None, seed=None):
    """-> {filename: csv text}, summary lines."""
    pair, pay = cfg.market_pair(), cfg.payoff_obj()
    sim = cfg.sim_config(seed)
    n_list = list(cfg.experiment["n_list"])
    est = montecarlo.estimate_errors(pair, pay, cfg.strategies, n_list, sim, T=cfg.T, S0=cfg.S0, threads=threads)
    h_fine = cfg.T / montecarlo.fine_steps(n_list, sim.m)
    err_rows, fit_rows, th_rows, summary = [], [], [], []
    for s in cfg.strategies:
        rows = est[s]
        err_rows += [[s, e.n, e.h, e.mean_sq, e.std_err, e.n_paths, e.mean, e.mean_se] for e in rows]
        for hf in (None, h_fine):
            try:
                f, status = montecarlo.rate_fit(rows, h_fine=hf), "ok"
            except montecarlo.SignalError:
                f, status = montecarlo.rate_fit(rows, h_fine=hf, check_signal=False), "low-signal"
            fit_rows.append([s, f.method, f.slope, f.slope_ci[0], f.slope_ci[1], f.r_squared, f.intercept, hf, status])
            summary.append(
                f"strategy={s} fit={f.method} slope={f.slope:.4f} "
                f"ci=[{f.slope_ci[0]:.4f},{f.slope_ci[1]:.4f}] status={status}"
            )
        pred = constants.predict(pair, pay, s, cfg.T, S0=cfg.S0)
        for e in rows:
            ratio = None
            if pred.constant is not None:
                ratio = e.mean_sq / (pred.constant * e.h**pred.rate_exponent)
            th_rows.append([s, e.n, e.h, pred.theorem, pred.rate_exponent, pred.constant, e.mean_sq, ratio])
        beta = "nan" if pred.rate_exponent is None else f"{pred.rate_exponent:.4f}"
        summary.append(f"strategy={s} theorem={pred.theorem} beta_pred={beta}")
    files = {
        "errors.csv": _csv(ERRORS_HEADER, err_rows),
        "ratefit.csv": _csv(RATEFIT_HEADER, fit_rows),
        "theory.csv": _csv(THEORY_HEADER, th_rows),
    }
    return files, summary


def cmd_experiment(cfg, args, out):
    directory = args.out or cfg.output["directory"]
    files, summary = run_experiment(cfg, threads=args.threads, seed=args.seed)
    try:
        write_atomic(directory, files)
    except OSError as exc:
        print(f"error: cannot write output to {directory}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in summary:
        print(line, file=out)
    print(f"wrote {', '.join(files)} to {directory}", file=out)
    return EXIT_OK


COMMANDS = {
    "predict": cmd_predict,
    "price": cmd_price,
    "strategy": cmd_strategy,
    "constants": cmd_constants,
    "experiment": cmd_experiment,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="hedgelab", description="Discrete hedging errors in exponential Levy models.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="experiment config file")
    ap.add_argument("--out", help="output directory (overrides [output] directory)")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides [experiment] seed)")
    ap.add_argument("--threads", type=int, help="worker threads (default: $HEDGELAB_THREADS or 1)")
    ap.add_argument("--t", type=float, default=0.0, help="valuation time for price/strategy")
    ap.add_argument("--spot", type=float, help="spot for price/strategy (default: S0)")
    return ap


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must lie in [0, 2^64)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args, out)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
