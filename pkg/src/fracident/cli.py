"""Command line entry point: ``fracident <subcommand> [options]``.

Options override values read from ``--config``.  Each subcommand writes
CSV files and exits with status 0 only if its checks pass.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import ExperimentConfig, load_config

log = logging.getLogger("fracident")

# flag -> config key
_FLAGS = {
    "problem": "problem",
    "n_elem": "n_elem",
    "s_range": "s_range",
    "eta": "eta",
    "xi": "xi",
    "q0": "q0",
    "s_star": "s_star",
    "delta_star": "delta_star",
    "alpha": "alpha",
    "beta": "beta",
    "sigma": "sigma",
    "seed": "seed",
    "solver": "solver",
    "solver_tol": "solver_tol",
    "grad_tol": "grad_tol",
    "max_iter": "max_iter",
    "kernel_factor": "kernel_factor",
    "levels": "levels",
    "m_list": "m_list",
    "out": "output_path",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--problem", choices=["I", "II"])
    common.add_argument("--n-elem", dest="n_elem", help="number of elements on (-1, 1)")
    common.add_argument("--s-range", dest="s_range", help="interpolation range, e.g. 0.05,0.95")
    common.add_argument("--eta", help="interpolation tolerance or 'auto'")
    common.add_argument("--xi", help="interval parameter in (0.1, 0.5) or 'auto'")
    common.add_argument("--q0", help="initial guess s0[,delta0]")
    common.add_argument("--s-star", dest="s_star")
    common.add_argument("--delta-star", dest="delta_star")
    common.add_argument("--alpha")
    common.add_argument("--beta")
    common.add_argument("--sigma", help="noise standard deviation")
    common.add_argument("--seed")
    common.add_argument("--solver", choices=["direct", "cholesky", "cg"])
    common.add_argument("--solver-tol", dest="solver_tol")
    common.add_argument("--grad-tol", dest="grad_tol")
    common.add_argument("--max-iter", dest="max_iter")
    common.add_argument("--kernel-factor", dest="kernel_factor")
    common.add_argument("--levels", help="mesh levels l with h = 2^-l, e.g. 4,5,6")
    common.add_argument("--m-list", dest="m_list", help="nodes per interval, e.g. 1,2,3")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="fracident", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("identify", parents=[common], help="BFGS identification of (s, delta)")
    sub.add_parser("convergence", parents=[common], help="discretization error study")
    sub.add_parser("interp-study", parents=[common], help="interpolation error against nodes")
    sub.add_parser("bench", parents=[common], help="assembly timings")
    sub.add_parser("gradcheck", parents=[common], help="adjoint gradient against finite differences")
    return p


def config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {key: str(getattr(args, flag)) for flag, key in _FLAGS.items()
                 if getattr(args, flag, None) is not None}
    return cfg.update(overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    cfg = config_from_args(args)
    cmd = args.command
    if cmd == "identify":
        res = experiments.run_identify(cfg)
        s = res.summary
        print(f"s={s['s']:.6f} delta={s['delta']:.6f} iterations={s['iterations']} "
              f"evaluations={s['evaluations']} converged={res.run.converged}")
    elif cmd == "convergence":
        res = experiments.run_convergence(cfg)
        print(f"rate_Hs={res.rate_Hs:.4f} rate_L2={res.rate_L2:.4f} "
              f"(exact operator: {res.rate_Hs_exact:.4f}, {res.rate_L2_exact:.4f})")
    elif cmd == "interp-study":
        res = experiments.run_interp_study(cfg)
        for m, e, d in res.rows:
            print(f"M={m:3d} solution_error={e:.3e} deriv_error={d:.3e}")
        print(f"node-count R^2={res.node_r2:.4f}")
    elif cmd == "bench":
        res = experiments.run_bench(cfg)
        for phase, n, t in res.rows:
            print(f"{phase:28s} N={n:6d} {t:.4f}s")
    elif cmd == "gradcheck":
        res = experiments.run_gradcheck(cfg)
        print(f"max relative error {res.max_rel_err:.3e}")
    else:  # pragma: no cover - argparse enforces choices
        raise AssertionError(cmd)
    print(f"wrote {cfg.output_path}")
    return 0 if res.ok else 1


if __name__ == "__main__":
    sys.exit(main())
