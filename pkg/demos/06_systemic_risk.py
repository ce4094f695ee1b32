"""Systemic risk: N banks borrowing and lending towards the average.

Each bank has its own value function, coupled through the others' controls,
so the network solves a system of N HJB equations in N space dimensions.
The trained V^1 is compared with the closed form, and the symmetry
between banks is checked.

    python demos/06_systemic_risk.py --banks 2 --iterations 2000
"""
import argparse

import numpy as np

from dgmpde.problems import Systemic, SystemicCoeffs
from dgmpde.training import TrainConfig, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--banks", type=int, default=2)
    ap.add_argument("--iterations", type=int, default=1000)
    ap.add_argument("--width", type=int, default=30)
    args = ap.parse_args()

    problem = Systemic(SystemicCoeffs(N=args.banks), sizes={"interior": 256, "terminal": 128})
    models = problem.new_models(np.random.default_rng(0), 3, args.width)
    n = args.iterations

    def report(it, rep, _):
        if (it + 1) % max(n // 5, 1) == 0:
            print(f"iter {it + 1:6d}  total loss {rep.total:.4e}")

    train(problem, models, TrainConfig(iterations=n, lr_schedule=[(0, 1e-3), (n // 2, 3e-4)], tol=0),
          callback=report)

    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.uniform(0, 1, 1000), rng.uniform(0, 10, (1000, args.banks))])
    ref = problem.oracle("V1", pts)
    err = np.abs(models["V1"](pts) - ref).mean() / np.ptp(ref)
    print(f"V1 mean abs error relative to its range: {err:.4f}")
    if args.banks >= 2:
        swapped = pts.copy()
        swapped[:, [1, 2]] = pts[:, [2, 1]]
        gap = np.abs(models["V1"](pts) - models["V2"](swapped)).max() / np.ptp(ref)
        print(f"largest V1(x1,x2) - V2(x2,x1) gap relative to range: {gap:.4f}")


if __name__ == "__main__":
    main()
