import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgmpde.autodiff import Tape
from dgmpde.network import Model, dgm, dgm_forward
from dgmpde.problems import EuropeanCall
from dgmpde.problems.base import Problem, mean_abs_residual
from dgmpde.residuals import (DerivConfig, ResidualError, fd_gradient, fd_hessian, inequality_penalty,
                              integral_term, residual_l1, stencil, terminal_loss_l3, total_loss)
from dgmpde.sampling import Batch, DomainBox


class Heat(Problem):
    """u_t = u_xx on [0,1]^2 with zero terminal data (test fixture)."""

    id = "heat"

    def __init__(self):
        super().__init__(None, DomainBox((0.0, 1.0), (0.0,), (1.0,)))

    def residuals(self, fns, batch, cfg):
        d = self.derivs(fns["f"], batch.interior, cfg)
        return [d.f_t - d.f_xx]

    def condition(self, name, x):
        return np.zeros(np.atleast_2d(x).shape[0])


def test_deriv_config_validation():
    for bad in (0.0, -1e-3, 0.02):
        with pytest.raises(ValueError):
            DerivConfig(bad)
    with pytest.raises(ValueError):
        DerivConfig(1e-3, scheme="forward")


@pytest.mark.parametrize("h", [1e-1, 1e-3, 0.37])
def test_central_gradient_exact_on_quadratic(h):
    assert fd_gradient(lambda p: p[0] ** 2, 3.0, h)[0] == pytest.approx(6.0, rel=1e-10)


def test_gradient_of_constant_is_zero():
    np.testing.assert_array_equal(fd_gradient(lambda p: 4.2, [1.0, 2.0, 3.0], 1e-3), 0.0)


def test_exp_gradient_error_is_h2_over_6():
    h = 1e-3
    err = fd_gradient(lambda p: np.exp(p[0]), 0.0, h)[0] - 1.0
    assert err == pytest.approx(h**2 / 6, rel=1e-3)


def test_hessian_examples():
    H = fd_hessian(lambda p: p[0] * p[1], [0.3, -0.7], 1e-3)
    np.testing.assert_allclose(H, [[0.0, 1.0], [1.0, 0.0]], atol=1e-9)
    assert fd_hessian(lambda p: p[0] ** 2, 1.5, 1e-3)[0, 0] == pytest.approx(2.0, rel=1e-6)


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_hessian_exactly_symmetric(p):
    f = lambda q: np.sin(q[0] * q[1]) + q[2] ** 3 * q[0] + np.exp(0.3 * q[1] * q[2])  # noqa: E731
    H = fd_hessian(f, p, 1e-3)
    assert H.tobytes() == H.T.tobytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_value_reported():
    with pytest.raises(ResidualError, match="coordinate 1"):
        fd_gradient(lambda p: 1 / p[1], [1.0, 1e-3], 1e-3)
    with pytest.raises(ResidualError):
        stencil(lambda rows: np.log(rows[:, 1]), np.array([[0.5, 0.0]]), [1e-3, 1e-3], (0, 1))


def test_batched_stencil_matches_pointwise(rng):
    f = lambda rows: np.sin(rows[:, 0]) * np.exp(rows[:, 1]) * np.cos(rows[:, 2])  # noqa: E731
    pts = rng.uniform(0.1, 0.9, size=(5, 3))
    d = stencil(f, pts, [1e-3] * 3, (0.0, 1.0), cross=True)
    for i, p in enumerate(pts):
        g = fd_gradient(lambda q: f(q[None])[0], p, 1e-3)
        H = fd_hessian(lambda q: f(q[None])[0], p, 1e-3)
        assert d.f_t[i] == pytest.approx(g[0], rel=1e-9)
        assert d.grad[1][i] == pytest.approx(g[2], rel=1e-9)
        assert d.hess[0][1][i] == pytest.approx(H[1, 2], rel=1e-6, abs=1e-6)
        assert d.hess[1][1][i] == pytest.approx(H[2, 2], rel=1e-6, abs=1e-6)


def test_one_sided_time_stencil_at_box_edges():
    f = lambda rows: np.exp(rows[:, 0])  # noqa: E731
    pts = np.array([[1.0, 0.0], [0.0, 0.0], [0.5, 0.0]])
    d = stencil(f, pts, [1e-3, 1e-3], (0.0, 1.0), space_order=0)
    np.testing.assert_allclose(d.f_t, np.exp(pts[:, 0]), rtol=1e-6)
    # no evaluation leaves the time range: error halves with O(h^2)
    errs = [abs(stencil(f, pts[:1], [h, h], (0.0, 1.0), space_order=0).f_t[0] - np.e) for h in (1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_fd_input_gradient_matches_tape(rng):
    # the same network differentiated in its inputs by both routes
    params = dgm(2, 6, 3, 1, rng=rng)
    x0 = rng.uniform(size=3)
    t = Tape()
    x = t.var(x0[None, :], "parameter")
    w = {k: t.const(v) for k, v in params.arrays.items()}
    tape_grad = t.backward(dgm_forward(params, x, w).sum())[x][0]
    fd = fd_gradient(lambda p: dgm_forward(params, p[None])[0, 0], x0, 1e-4)
    np.testing.assert_allclose(fd, tape_grad, rtol=1e-4)


def test_zero_network_solves_heat_equation():
    prob = Heat()
    fns = {"f": lambda rows: np.zeros(np.atleast_2d(rows).shape[0])}
    batch = prob.sample(np.random.default_rng(0))
    assert residual_l1(prob, fns, batch, DerivConfig()) == 0.0


def test_empty_interior_batch_is_an_error():
    prob = Heat()
    fns = {"f": lambda rows: np.zeros(len(rows))}
    with pytest.raises(ResidualError):
        residual_l1(prob, fns, Batch(np.zeros((0, 2)), np.zeros((3, 1))), DerivConfig())
    with pytest.raises(ResidualError):
        terminal_loss_l3(prob, fns, Batch(np.zeros((3, 2)), np.zeros((0, 1))))


def test_bs_oracle_residual_is_small():
    prob = EuropeanCall()
    r = np.random.default_rng(4)
    pts = np.column_stack([r.uniform(0, 0.9, 100), r.uniform(1, 130, 100)])
    assert mean_abs_residual(prob, prob.oracle_fns(), pts, DerivConfig(1e-3)) < 1e-3


def test_terminal_loss_examples():
    prob = EuropeanCall()
    batch = prob.sample(np.random.default_rng(0))
    payoff = {"f": lambda rows: np.maximum(np.atleast_2d(rows)[:, 1] - 50.0, 0.0)}
    assert terminal_loss_l3(prob, payoff, batch) == 0.0
    assert terminal_loss_l3(prob, prob.oracle_fns(), batch) < 1e-24
    below = Batch(batch.interior, np.random.default_rng(1).uniform(0, 49, (40, 1)))
    assert terminal_loss_l3(prob, {"f": lambda rows: np.zeros(len(rows))}, below) == 0.0


def _put_payoff(x):
    return np.maximum(50.0 - x[..., 0], 0.0)


def test_penalty_examples():
    zero = lambda rows: np.zeros(len(rows))  # noqa: E731
    assert inequality_penalty(zero, np.array([[0.5, 40.0]]), _put_payoff) == 100.0
    above = lambda rows: _put_payoff(rows[:, 1:]) + 1.0  # noqa: E731
    pts = np.column_stack([np.linspace(0, 1, 50), np.linspace(0, 100, 50)])
    assert inequality_penalty(above, pts, _put_payoff) == 0.0


@given(st.lists(st.floats(-20, 20), min_size=5, max_size=5), st.floats(0, 10))
def test_penalty_monotone_in_f(f_vals, bump):
    pts = np.column_stack([np.full(5, 0.5), np.linspace(30, 70, 5)])
    f = np.array(f_vals)
    low = inequality_penalty(lambda rows: f, pts, _put_payoff)
    high = inequality_penalty(lambda rows: f + bump, pts, _put_payoff)
    assert high <= low


def test_integral_term_examples():
    t, x = np.linspace(0.1, 0.9, 5), np.linspace(-1, 1, 7)
    const = integral_term(lambda rows: np.cos(rows[:, 1]), t, x, 1e-3, (0.0, 1.0))
    np.testing.assert_allclose(const, 0.0, atol=1e-12)
    lin = integral_term(lambda rows: rows[:, 0], t, x, 1e-3, (0.0, 1.0))
    np.testing.assert_allclose(lin, 1.0, rtol=1e-9)
    # u = t x is equal across x = {0, 1} only at t = 0, where the weights are 1/2
    half = integral_term(lambda rows: rows[:, 0] * rows[:, 1], [0.0], [0.0, 1.0], 1e-3, (0.0, 1.0))
    assert half[0] == pytest.approx(0.5, rel=1e-9)


def test_integral_term_empty_grid():
    with pytest.raises(ResidualError):
        integral_term(lambda rows: rows[:, 0], [], [0.0], 1e-3)


def test_total_loss_terms_and_weights():
    prob = EuropeanCall()
    batch = prob.sample(np.random.default_rng(0))
    model = prob.new_models(np.random.default_rng(0), 1, 8)["f"]
    fns = {"f": model}
    rep = total_loss(prob, fns, batch, DerivConfig())
    assert rep.l2_boundary == 0.0 and rep.l4_penalty == 0.0
    assert rep.total == pytest.approx(rep.l1_operator + rep.l3_terminal, rel=1e-14)
    zero = total_loss(prob, fns, batch, DerivConfig(), {"l1": 0.0, "l2": 0.0, "l3": 0.0, "l4": 0.0})
    assert zero.total == 0.0
    scaled = total_loss(prob, fns, batch, DerivConfig(), {"l1": 2.0, "l3": 0.5})
    assert scaled.total == pytest.approx(2 * rep.l1_operator + 0.5 * rep.l3_terminal, rel=1e-14)


def test_total_loss_of_call_oracle():
    # away from the payoff kink at maturity, where the finite differences straddle it
    prob = EuropeanCall()
    batch = prob.sample(np.random.default_rng(0))
    batch.interior = batch.interior[batch.interior[:, 0] <= 0.9]
    assert total_loss(prob, prob.oracle_fns(), batch, DerivConfig(1e-3)).total < 1e-4


@given(st.integers(0, 10_000))
def test_total_loss_nonnegative_and_taped(seed):
    prob = EuropeanCall(sizes={"interior": 20, "terminal": 10})
    r = np.random.default_rng(seed)
    model = prob.new_models(r, 1, 4)["f"]
    batch = prob.sample(r)
    tape = Tape()
    w = model.params.bind(tape)
    rep = total_loss(prob, {"f": lambda rows: model(rows, w)}, batch, DerivConfig())
    assert rep.total >= 0 and rep.total_var is not None
    assert float(rep.total_var.value) == rep.total
    zero = Model(model.params.copy(), model.lo, model.hi, 0.0)
    rep0 = total_loss(prob, {"f": zero}, Batch(batch.interior, np.zeros((5, 1)) + 10.0), DerivConfig())
    assert rep0.total == 0.0
