"""Train a DGM network on the Black-Scholes equation for a European call.

The network sees the PDE and the payoff only. Its surface is then compared
with the closed-form price and with a Feynman-Kac Monte Carlo estimate.
Sampling can be uniform on an oversampled box or log-normal along price paths.

    python demos/02_european_call.py --iterations 3000 --sampler lognormal
"""
import argparse

import numpy as np

from dgmpde.baselines import McConfig, feynman_kac_mc
from dgmpde.problems import EuropeanCall
from dgmpde.training import TrainConfig, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--width", type=int, default=30)
    ap.add_argument("--sampler", choices=["uniform", "lognormal"], default="uniform")
    args = ap.parse_args()

    problem = EuropeanCall(sampler=args.sampler, sizes={"interior": 256, "terminal": 128})
    models = problem.new_models(np.random.default_rng(0), 3, args.width)
    n = args.iterations
    cfg = TrainConfig(iterations=n, lr_schedule=[(0, 1e-3), (n // 2, 3e-4), (4 * n // 5, 1e-4)], tol=0)

    def report(it, rep, _):
        if (it + 1) % max(n // 10, 1) == 0:
            print(f"iter {it + 1:6d}  L1 {rep.l1_operator:.3e}  L3 {rep.l3_terminal:.3e}")

    train(problem, models, cfg, callback=report)

    t, x = np.meshgrid(np.linspace(0, 1, 50), np.linspace(0, 100, 50), indexing="ij")
    pts = np.column_stack([t.ravel(), x.ravel()])
    err = np.abs(models["f"](pts) - problem.oracle("f", pts))
    print(f"mean abs error vs closed form on [0,1]x[0,100]: {err.mean():.4f} (max {err.max():.4f})")

    c = problem.coeffs
    mc, se = feynman_kac_mc(c, lambda s: np.maximum(s - c.K, 0.0), McConfig(n_paths=200_000, seed=1))
    net = float(models["f"](np.array([[0.0, c.s0]]))[0])
    print(f"price at t=0, x={c.s0}: network {net:.4f}, closed form {problem.oracle('f', [[0.0, c.s0]])[0]:.4f}, "
          f"Monte Carlo {mc:.4f} +/- {se:.4f}")


if __name__ == "__main__":
    main()
