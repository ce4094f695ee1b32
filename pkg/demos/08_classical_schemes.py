"""Classical references: Euler schemes, finite differences and Monte Carlo.

Shows the stability limits that motivate implicit schemes, then prices a
European call three ways (implicit grid, Monte Carlo, closed form).

    python demos/08_classical_schemes.py
"""
import numpy as np

from dgmpde.baselines import McConfig, bs_grid_solver, btcs_heat, euler_explicit, euler_implicit, feynman_kac_mc, ftcs_heat
from dgmpde.problems import BsCoeffs, bs_call_price


def main():
    lam = -50.0
    for h in (0.01, 0.05):
        _, ye = euler_explicit(lambda t, y: lam * y, 1.0, 1.0, h)
        _, yi, _ = euler_implicit(lambda t, y: lam * y, lambda t, y: lam, 1.0, 1.0, h)
        print(f"y' = {lam:g} y, step {h}: explicit y(1) = {ye[-1]:.3e}, implicit y(1) = {yi[-1]:.3e}")

    def sine(x):
        return np.sin(np.pi * x)

    def exact(x):
        return np.exp(-np.pi**2 * 0.1) * sine(x)

    for n_t in (480, 700):
        g = ftcs_heat(1.0, 1.0, 0.1, 51, n_t, sine)
        print(f"FTCS ratio {g.info['ratio']:.3f}: unstable={g.info['unstable']}, "
              f"max error {np.abs(g.u[-1] - exact(g.x)).max():.2e}")
    g = btcs_heat(1.0, 1.0, 0.1, 51, 20, sine)
    print(f"BTCS with 20 large steps: max error {np.abs(g.u[-1] - exact(g.x)).max():.2e}")

    c = BsCoeffs()
    grid = bs_grid_solver(c, 400, 400, 130.0)
    j = int(np.argmin(np.abs(grid.x - c.s0)))
    mc, se = feynman_kac_mc(c, lambda s: np.maximum(s - c.K, 0.0), McConfig(n_paths=1_000_000, seed=0))
    print(f"call at x={c.s0}: grid {grid.u[0, j]:.4f}, Monte Carlo {mc:.4f} +/- {se:.4f}, "
          f"closed form {bs_call_price(0.0, c.s0, c):.4f}")


if __name__ == "__main__":
    main()
