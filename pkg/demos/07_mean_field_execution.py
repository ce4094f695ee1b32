"""Mean-field optimal execution: a coupled HJB / Fokker-Planck system.

A population of traders liquidates inventory while the average trading rate
moves the price. The value function h and the log-density u each get a
network. The mean inventory path is compared with a fixed-point grid solver.

    python demos/07_mean_field_execution.py --iterations 1500

The mean path gets within a few percent with --width 50 --iterations 8000
(about an hour on one core).
"""
import argparse

import numpy as np

from dgmpde.baselines import mfg_grid_solver
from dgmpde.problems import MeanFieldExecution
from dgmpde.training import TrainConfig, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iterations", type=int, default=800)
    ap.add_argument("--width", type=int, default=30)
    args = ap.parse_args()

    problem = MeanFieldExecution(sizes={"n_t": 16, "n_x": 64, "terminal": 512})
    grid = mfg_grid_solver(problem.coeffs, n_t=200, n_q=201)
    print(f"grid solver: {len(grid.changes)} fixed-point sweeps, mass drift {np.ptp(grid.mass()):.1e}")

    models = problem.new_models(np.random.default_rng(0), 3, args.width)
    n = args.iterations
    train(problem, models, TrainConfig(iterations=n, lr_schedule=[(0, 1e-3), (n // 2, 3e-4)], tol=0))

    print("   t   mean inventory (net)  (grid)")
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        i = int(np.argmin(np.abs(grid.t - t)))
        print(f"{t:5.2f} {problem.mean_inventory(models['u'], t):20.4f} {grid.mean[i]:8.4f}")


if __name__ == "__main__":
    main()
