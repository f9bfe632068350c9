import numpy as np
import pytest

from sofrgit.core import bond_forward
from sofrgit.core.bond_forward import (
    ForwardCurveMap,
    ForwardPutContract,
    forward_rate,
    solve_forward_put,
    solve_zcb,
)
from sofrgit.core.errors import ConfigError, DomainError, NumericalInstabilityError
from sofrgit.core.oracles import deterministic_zcb


@pytest.fixture
def gaussian_model(flat_model):
    # beta = -1, no reversion, far above the lower boundary
    return flat_model(beta=-1.0, alpha=0.0, sigma=0.005, rbar_star=-0.02, horizon=1.0)


def test_flat_curve_forward_is_the_rate() -> None:
    def price(t, y, q):
        return np.exp(-0.03 * (q - t))

    assert forward_rate(price, 0.0, 0.0, 0.5, dq=0.01) == pytest.approx(0.03, rel=1e-12)
    # backward stencil once Q + dq leaves the horizon
    assert forward_rate(price, 0.0, 0.0, 1.0, dq=0.01, horizon=1.0) == pytest.approx(0.03, rel=1e-10)


def test_forward_stencils_are_exact_for_quadratic_log_prices() -> None:
    def price(t, y, q):
        return np.exp(-0.5 * (q - t) ** 2)

    # f = Q - t
    assert forward_rate(price, 0.1, 0.0, 0.6, dq=0.05) == pytest.approx(0.5, rel=1e-10)
    assert forward_rate(price, 0.1, 0.0, 0.6, dq=0.05, horizon=0.6) == pytest.approx(0.5, rel=1e-10)


def test_forward_stencil_must_stay_after_t() -> None:
    with pytest.raises(DomainError):
        forward_rate(lambda t, y, q: 1.0, 0.5, 0.0, 0.5005, dq=0.001)
    with pytest.raises(ConfigError):
        forward_rate(lambda t, y, q: 1.0, 0.0, 0.0, 0.5, dq=0.0)


def test_bond_is_one_at_maturity_and_on_the_boundary(gaussian_model) -> None:
    sol = solve_zcb(gaussian_model, 1.0, n_t=6, n_x=40, x_max=0.5, y_spot=0.10)
    assert sol.method == "recurrent"
    assert np.all(sol.u[0] == 1.0)
    assert np.all(sol.u[:, 0] == 1.0)
    assert sol.price(1.0, 0.10) == pytest.approx(1.0)
    assert np.all((sol.u >= 0.0) & (sol.u <= 1.0))
    with pytest.raises(DomainError):
        sol.price(1.5, 0.10)


def test_bond_tracks_the_gaussian_closed_form(gaussian_model) -> None:
    sol = solve_zcb(gaussian_model, 1.0, n_t=16, n_x=200, x_max=0.5, y_spot=0.10)
    reference = deterministic_zcb(gaussian_model, 0.0, 0.10, 1.0) * np.exp(0.005 ** 2 / 6.0)
    assert reference == pytest.approx(0.9231, abs=1e-4)
    assert sol.price(0.0, 0.10) == pytest.approx(reference, rel=1e-4)


def test_bond_maturity_must_fit_the_horizon(gaussian_model) -> None:
    with pytest.raises(ConfigError):
        solve_zcb(gaussian_model, 1.5, n_t=6, n_x=20, x_max=0.5, y_spot=0.1)
    with pytest.raises(ConfigError):
        solve_zcb(gaussian_model, 0.5, n_t=6, n_x=20, x_max=0.5, y_spot=0.1, method="explicit")


def test_forward_map_solves_each_stencil_maturity_once(gaussian_model) -> None:
    inside = ForwardCurveMap(gaussian_model, 0.5, n_t=4, n_x=16, x_max=0.5, y_spot=0.1, dq=0.01)
    assert sorted(inside.solutions) == pytest.approx([0.49, 0.51])
    edge = ForwardCurveMap(gaussian_model, 1.0, n_t=4, n_x=16, x_max=0.5, y_spot=0.1, dq=0.01)
    assert sorted(edge.solutions) == pytest.approx([0.98, 0.99, 1.0])


def test_forward_put_contract_validation() -> None:
    with pytest.raises(ConfigError):
        ForwardPutContract(K=0.05, T_f=0.6, Q=0.5, y_spot=0.1)
    with pytest.raises(ConfigError):
        ForwardPutContract(K=-1.0, T_f=0.25, Q=0.5, y_spot=0.1)


def test_forward_put_below_every_forward_is_worthless(gaussian_model) -> None:
    contract = ForwardPutContract(K=0.01, T_f=0.25, Q=0.5, y_spot=0.1)
    sol = solve_forward_put(gaussian_model, contract, n_t=5, n_x=20, x_max=0.5, forward=lambda t, y: 0.05)
    assert sol.worthless
    assert sol.spot_price == 0.0
    assert sol.price_at(0.1) == 0.0


def test_bond_survives_gaps_below_the_kernel_threshold(gaussian_model) -> None:
    # tau(0) = 2.5e-5, so every step of a 32-level grid is shorter than TAU_MIN
    sol = solve_zcb(gaussian_model, 1.0, n_t=32, n_x=60, x_max=0.5, y_spot=0.10)
    assert np.all(np.isfinite(sol.u))
    assert np.all(np.diff(sol.tau_nodes) < 1e-6)
    reference = deterministic_zcb(gaussian_model, 0.0, 0.10, 1.0)
    assert sol.price(0.0, 0.10) == pytest.approx(reference, rel=1e-3)


def test_bond_with_the_boundary_at_zero_rates(flat_model) -> None:
    # rbar_star > 0: y_l = 0 and x_l = 0 on the whole window
    model = flat_model(beta=-1.0, alpha=0.0, sigma=1e-4, rbar_star=0.02, horizon=1.0)
    sol = solve_zcb(model, 1.0, n_t=16, n_x=120, x_max=0.5, y_spot=0.01)
    assert np.all(sol.x_nodes[:, 0] == 0.0)
    assert sol.price(0.0, 0.01) == pytest.approx(np.exp(-0.03), rel=1e-5)


def test_bond_prices_outside_the_unit_interval_raise() -> None:
    bond_forward._check_bond_range(np.array([[0.0, 1.0 + 0.5e-6]]))
    with pytest.raises(NumericalInstabilityError):
        bond_forward._check_bond_range(np.array([[0.5, 1.0 + 1e-3]]))
    with pytest.raises(NumericalInstabilityError):
        bond_forward._check_bond_range(np.array([[-1e-3, 0.5]]))
