import numpy as np
import pytest
from scipy.linalg import solve_banded

from dgmpde.baselines import (ConvergenceError, Grid1D, McConfig, bs_grid_solver, btcs_heat, euler_explicit,
                              euler_implicit, feynman_kac_mc, ftcs_heat, mfg_grid_solver, ou_simulate, thomas)
from dgmpde.problems import (BsCoeffs, ExecCoeffs, MfgCoeffs, OuCoeffs, bs_call_price, bs_put_price,
                             execution_value_oracle)

BS = BsCoeffs()


def sine(x):
    return np.sin(np.pi * x)


def heat_exact(t, x, alpha=1.0):
    return np.exp(-(alpha**2) * np.pi**2 * t) * np.sin(np.pi * x)


# -- ODE schemes ---------------------------------------------------------------------------

def test_explicit_euler_examples():
    t, y = euler_explicit(lambda t, y: 0.0, 2.5, 1.0, 0.1)
    assert np.all(y == 2.5)
    t, y = euler_explicit(lambda t, y: 1.0, 0.0, 1.0, 0.125)
    np.testing.assert_allclose(y, t, rtol=0, atol=1e-15)
    # |1 + h lambda| = 3 > 1
    _, y = euler_explicit(lambda t, y: -40.0 * y, 1.0, 1.0, 0.1)
    assert np.all(np.abs(np.diff(np.abs(y))) > 0) and abs(y[-1]) > 1e4


def test_implicit_euler_is_a_stable():
    lam = -1e6
    t, y, iters = euler_implicit(lambda t, y: lam * y, lambda t, y: lam, 1.0, 1.0, 0.1)
    assert np.all(np.abs(np.diff(y)) <= np.abs(y[:-1]))
    assert np.all(np.abs(y) <= 1.0)
    np.testing.assert_allclose(y, (1 / (1 - 0.1 * lam)) ** np.arange(t.size), rtol=1e-9, atol=1e-12)


def test_newton_one_step_on_linear_problem():
    _, _, iters = euler_implicit(lambda t, y: -2.0 * y + t, lambda t, y: -2.0, 1.0, 1.0, 0.01)
    # one step lands on the root; the second only confirms the zero update
    assert np.all(iters <= 2)


def test_newton_failure_is_reported():
    # a wrong Jacobian makes Newton cycle
    with pytest.raises(ConvergenceError):
        euler_implicit(lambda t, y: -np.cbrt(y) * 50, lambda t, y: 0.0, 1.0, 1.0, 0.5, max_iter=50)


def test_implicit_euler_first_order():
    errs = []
    for h in (0.02, 0.01, 0.005):
        t, y, _ = euler_implicit(lambda t, y: -y, lambda t, y: -1.0, 1.0, 1.0, h)
        errs.append(abs(y[-1] - np.exp(-1.0)))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)


# -- grids ------------------------------------------------------------------------------------

def test_grid_shape_invariant():
    with pytest.raises(ValueError):
        Grid1D(np.zeros(3), np.zeros(4), np.zeros((4, 3)))


def test_thomas_matches_banded_solver(rng):
    n = 50
    lo, up = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    d = 3.0 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    ab = np.zeros((3, n))
    ab[0, 1:], ab[1], ab[2, :-1] = up[:-1], d, lo[1:]
    np.testing.assert_allclose(thomas(lo, d, up, rhs), solve_banded((1, 1), ab, rhs), rtol=1e-12)


@pytest.mark.parametrize("solver", [ftcs_heat, btcs_heat])
def test_heat_sine_decay(solver):
    g = solver(1.0, 1.0, 0.1, 50, 2000, sine)
    exact = heat_exact(0.1, g.x)
    assert np.max(np.abs(g.u[-1] - exact)) < 0.01 * np.max(exact)


@pytest.mark.parametrize("solver", [ftcs_heat, btcs_heat])
def test_heat_zero_initial_stays_zero(solver):
    assert np.all(solver(1.0, 1.0, 0.1, 20, 100, np.zeros_like).u == 0.0)


def test_ftcs_instability_detector():
    # ratio 0.6 over enough steps to amplify round-off
    n_x = 50
    h = 1.0 / n_x
    k = 0.6 * h * h
    bad = ftcs_heat(1.0, 1.0, 3000 * k, n_x, 3000, sine)
    assert bad.info["ratio"] == pytest.approx(0.6) and bad.info["unstable"] and bad.info["growth"] > 10
    good = ftcs_heat(1.0, 1.0, 3000 * 0.4 * h * h, n_x, 3000, sine)
    assert not good.info["unstable"]


def test_btcs_convergence_orders():
    # first order in k at fine h
    ek = [np.max(np.abs(btcs_heat(1.0, 1.0, 0.1, 400, nt, sine).u[-1] - heat_exact(0.1, np.linspace(0, 1, 401))))
          for nt in (20, 40)]
    assert np.log2(ek[0] / ek[1]) == pytest.approx(1.0, abs=0.15)
    # second order in h with k tied to h^2
    eh = []
    for nx in (10, 20):
        g = btcs_heat(1.0, 1.0, 0.1, nx, 4 * nx * nx, sine)
        eh.append(np.max(np.abs(g.u[-1] - heat_exact(0.1, g.x))))
    assert np.log2(eh[0] / eh[1]) == pytest.approx(2.0, abs=0.2)


def test_bs_grid_call_matches_closed_form():
    g = bs_grid_solver(BS, 400, 400, 130.0)
    j = np.argmin(np.abs(g.x - 50.0))
    assert abs(g.u[0, j] - bs_call_price(0.0, g.x[j], BS)) < 0.05


@pytest.fixture(scope="module")
def american():
    return bs_grid_solver(BS, 200, 400, 130.0, kind="put", american=True)


def test_american_grid_above_payoff_and_european(american):
    g = american
    payoff = np.maximum(BS.K - g.x, 0.0)
    assert np.all(g.u >= payoff[None, :])
    # same scheme without exercise: the projection only ever raises values
    euro_grid = bs_grid_solver(BS, 200, 400, 130.0, kind="put")
    assert np.all(g.u >= euro_grid.u)
    # closed-form European put, away from the kink where the grid error concentrates
    early = g.t <= 0.9
    euro = bs_put_price(g.t[early, None], g.x[None, :], BS)
    assert np.all(g.u[early] >= euro - 0.01)


def test_american_value_nonincreasing_toward_maturity(american):
    g = american
    sel = g.x >= BS.K
    assert np.all(np.diff(g.u[:, sel], axis=0) <= 1e-10)


def test_bs_grid_rejects_kind():
    with pytest.raises(ValueError):
        bs_grid_solver(BS, 10, 10, 100.0, kind="digital")


# -- Monte Carlo ------------------------------------------------------------------------------

def call(s):
    return np.maximum(s - BS.K, 0.0)


def test_mc_zero_payoff():
    assert feynman_kac_mc(BS, np.zeros_like, McConfig(1000)) == (0.0, 0.0)


def test_mc_call_within_three_se():
    est, se = feynman_kac_mc(BS, call, McConfig(1_000_000, seed=1))
    assert abs(est - bs_call_price(0.0, 50.0, BS)) < 3 * se


def test_mc_se_scaling():
    _, se1 = feynman_kac_mc(BS, call, McConfig(100_000, seed=2))
    _, se2 = feynman_kac_mc(BS, call, McConfig(200_000, seed=3))
    assert se1 / se2 == pytest.approx(np.sqrt(2), rel=0.05)


def test_mc_unbiased_over_repeats():
    runs = [feynman_kac_mc(BS, call, McConfig(20_000, n_steps=2, seed=s, antithetic=True)) for s in range(30)]
    est = np.array([r[0] for r in runs])
    se = np.sqrt(np.sum([r[1] ** 2 for r in runs])) / len(runs)
    assert abs(est.mean() - bs_call_price(0.0, 50.0, BS)) < 3 * se


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(0)


def test_ou_deterministic_without_noise():
    c = OuCoeffs(kappa=2.0, theta=0.5, sigma=0.0, v=0.0, m0=3.0)
    p = ou_simulate(c, 10, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(p.samples, (0.5 + 2.5 * np.exp(-2.0 * p.t))[:, None] * np.ones(10), rtol=1e-14)


def test_ou_moments_within_three_se():
    c = OuCoeffs()
    p = ou_simulate(c, 100_000, [0.0, 0.5, 1.0], seed=4)
    mean, var, se_mean, se_var = p.moments()
    assert np.all(np.abs(mean) < 3 * se_mean)
    assert np.all(np.abs(var - (c.v + c.sigma**2 * p.t)) < 3 * se_var)
    dens, edges = p.histogram(2, bins=40, range=(-8, 8))
    assert dens.sum() * (edges[1] - edges[0]) == pytest.approx(1.0, abs=0.01)


# -- mean-field grid solver ------------------------------------------------------------------

def test_mfg_decoupled_grid_matches_execution_oracle():
    c = MfgCoeffs(kappa=0.0, k=0.01, phi=0.1, alpha=0.1)
    g = mfg_grid_solver(c, n_t=200, n_q=201)
    ref = execution_value_oracle(g.t[:, None], g.q[None, :], ExecCoeffs(k=0.01, b=0.0, phi=0.1, alpha=0.1))
    sel = g.q <= 5.0
    assert np.max(np.abs(g.h[:, sel] - ref[:, sel])) < 0.01 * np.max(np.abs(ref[:, sel]))


@pytest.fixture(scope="module")
def mfg():
    return mfg_grid_solver(MfgCoeffs(), n_t=200, n_q=401)


def test_mfg_mass_conserved(mfg):
    np.testing.assert_allclose(mfg.mass(), 1.0, atol=1e-8)
    assert np.all(mfg.m >= 0)


def test_mfg_mean_inventory_decreasing(mfg):
    assert np.all(np.diff(mfg.mean) < 0)


def test_mfg_fixed_point_converges(mfg):
    tail = np.array(mfg.changes[-5:])
    assert np.all(np.diff(tail) < 0) and tail[-1] < 1e-6
