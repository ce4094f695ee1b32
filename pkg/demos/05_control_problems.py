"""Stochastic control: Merton's portfolio problem and optimal execution.

Both value functions have closed forms. The demo first pushes the closed forms
through the finite-difference residuals to show the O(h^2) truncation, then
trains networks and reads the optimal controls off their derivatives.

    python demos/05_control_problems.py --iterations 1500
"""
import argparse

import numpy as np

from dgmpde.problems import Execution, Merton, mean_abs_residual
from dgmpde.residuals import DerivConfig
from dgmpde.training import TrainConfig, train


def residual_orders(problem, rng):
    lo, hi = problem.box.lo[0], problem.box.hi[0]
    x = rng.uniform(lo + 0.1 * (hi - lo), hi, 200)
    pts = np.column_stack([rng.uniform(problem.box.t0, problem.box.T, 200), x])
    hs = [1e-2, 5e-3, 2.5e-3]
    res = [mean_abs_residual(problem, problem.oracle_fns(), pts, DerivConfig(h=h)) for h in hs]
    return np.polyfit(np.log(hs), np.log(res), 1)[0]


def fit(problem, n, width):
    models = problem.new_models(np.random.default_rng(0), 3, width)
    train(problem, models, TrainConfig(iterations=n, lr_schedule=[(0, 1e-3), (n // 2, 3e-4)], tol=0))
    return models


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iterations", type=int, default=1000)
    ap.add_argument("--width", type=int, default=30)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cfg = DerivConfig()

    for problem in (Merton(sizes={"interior": 256, "terminal": 128}),
                    Execution(sizes={"interior": 256, "terminal": 128})):
        print(f"== {problem.id}: closed-form residual order {residual_orders(problem, rng):.2f}")
        models = fit(problem, args.iterations, args.width)
        name = problem.unknowns[0]
        pts = np.array([[t, x] for t in (0.0, 0.5) for x in np.linspace(problem.box.lo[0], problem.box.hi[0], 5)[1:]])
        net, ref = models[name](pts), problem.oracle(name, pts)
        ctl, ctl_ref = problem.control(models, pts, cfg), problem.control_oracle(pts)
        key = next(iter(ctl_ref))
        print("   t      x     value(net)  value(exact)  control(net)  control(exact)")
        for p, a, b, u, v in zip(pts, net, ref, ctl[key], ctl_ref[key]):
            print(f"{p[0]:5.2f} {p[1]:6.2f} {a:12.5f} {b:13.5f} {u:13.5f} {v:15.5f}")


if __name__ == "__main__":
    main()
