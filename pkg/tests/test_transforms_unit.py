import numpy as np
import pytest

from sofrgit.core.errors import ConfigError, DomainError, SingularityError
from sofrgit.core.term_structure import LINEAR, ModelSpec, ParamCurve
from sofrgit.core.transforms import build_transform


def test_affine_volatility_gives_half_order(flat_model) -> None:
    cache = build_transform(flat_model(beta=-1.0), 0.5, 0.0)
    assert cache.nu == pytest.approx(-0.5)
    assert cache.b == pytest.approx(0.0)


def test_order_and_exponent_for_general_beta(flat_model) -> None:
    cache = build_transform(flat_model(beta=-0.3, sigma=0.1), 0.5, 0.0)
    assert cache.nu == pytest.approx(1.0 / (2.0 * -0.3))
    assert cache.b == pytest.approx(0.7 / -0.6)


def test_tau_is_sigma_squared_time_without_reversion(flat_model) -> None:
    cache = build_transform(flat_model(alpha=0.0, sigma=0.3), 0.25, 0.0)
    assert cache.tau_total == pytest.approx(0.09 * 0.25, rel=1e-12)
    assert cache.tau(0.25) == pytest.approx(0.0, abs=1e-15)
    assert cache.F(0.1) == pytest.approx(1.0)


def test_tau_with_reversion_matches_closed_form(flat_model) -> None:
    alpha, sigma, beta, T = 0.5, 0.2, -0.5, 1.0
    cache = build_transform(flat_model(alpha=alpha, sigma=sigma, beta=beta), T, 0.0)
    # F = exp(beta alpha (T - t)), tau = sigma^2 int_0^T F^2
    k = 2.0 * beta * alpha
    expected = sigma ** 2 * np.expm1(k * T) / k
    assert cache.tau_total == pytest.approx(expected, rel=1e-10)


def test_inverse_time_map_round_trips(flat_model) -> None:
    cache = build_transform(flat_model(alpha=0.5, sigma=0.2, beta=-0.5), 1.0, 0.0)
    t = np.array([0.0, 0.1, 0.5, 0.9, 1.0])
    back = np.asarray(cache.t_of_tau(cache.tau(t)))
    assert np.allclose(back, t, atol=1e-10)


def test_space_map_round_trips(flat_model) -> None:
    cache = build_transform(flat_model(beta=-0.6, alpha=0.3), 1.0, 0.0)
    y = np.array([0.01, 0.05, 0.2])
    x = np.asarray(cache.x_of_y(0.4, y))
    assert np.all(x > 0.0)
    assert np.allclose(cache.y_of_x(0.4, x), y, rtol=1e-12)


def test_space_map_rejects_non_positive_factor(flat_model) -> None:
    cache = build_transform(flat_model(), 1.0, 0.0)
    with pytest.raises(DomainError):
        cache.x_of_y(0.5, 0.0)


def test_lower_boundary_image(flat_model) -> None:
    cache = build_transform(flat_model(beta=-1.0, rbar_star=-0.02), 1.0, 0.0)
    # beta = -1, alpha = 0: x = y
    assert cache.x_lower_at_t(0.3) == pytest.approx(0.02)


def test_C_is_linear_in_z(flat_model) -> None:
    cache = build_transform(flat_model(), 0.5, 0.0)
    t, x = 0.3, 0.05
    c0 = cache.coeff_C_at_t(t, x, 0.0)
    c1 = cache.coeff_C_at_t(t, x, 1.0)
    c2 = cache.coeff_C_at_t(t, x, 2.0)
    assert c2 - c1 == pytest.approx(c1 - c0)
    assert c1 - c0 == pytest.approx(-cache.coeff_Q_at_t(t))


def test_Q_is_singular_at_the_start_of_averaging(flat_model) -> None:
    cache = build_transform(flat_model(), 0.5, 0.1)
    with pytest.raises(SingularityError):
        cache.coeff_Q_at_t(0.1)


def test_transform_window_must_fit_the_horizon(flat_model) -> None:
    with pytest.raises(ConfigError):
        build_transform(flat_model(horizon=1.0), 1.5, 0.0)
    with pytest.raises(ConfigError):
        build_transform(flat_model(), 0.5, 0.5)


def _centered_x_l_slope(cache, t: float, h: float = 1e-4) -> float:
    dx = float(cache.x_lower_at_t(t + h)) - float(cache.x_lower_at_t(t - h))
    dtau = float(cache.tau(t + h)) - float(cache.tau(t - h))
    return dx / dtau


def test_boundary_speed_matches_finite_differences(reference_model) -> None:
    cache = build_transform(reference_model, 0.25, 0.0)
    for t in (0.05, 0.125, 0.2):
        assert cache.x_l_prime_at_t(t) == pytest.approx(_centered_x_l_slope(cache, t), rel=1e-6)


def test_boundary_speed_follows_a_sloped_curve() -> None:
    model = ModelSpec(
        beta=-0.5,
        alpha=ParamCurve.flat(0.3, 0.0, 1.0),
        sigma=ParamCurve.flat(0.05, 0.0, 1.0),
        rbar_star=ParamCurve(breakpoints=(0.0, 1.0), values=(-0.03, -0.01), interpolation=LINEAR),
        horizon=1.0,
    )
    cache = build_transform(model, 1.0, 0.0)
    for t in (0.2, 0.5, 0.8):
        assert cache.x_l_prime_at_t(t) == pytest.approx(_centered_x_l_slope(cache, t), rel=1e-6)


def test_homogenizer_switches_to_constant_when_the_boundary_touches_zero(flat_model) -> None:
    touching = build_transform(flat_model(rbar_star=0.02), 1.0, 0.0)
    assert not touching.inverse_homogenizer()
    assert touching.x_lower_at_t(0.5) == 0.0
    assert np.allclose(touching.homogenizer_at_t(0.5, [0.1, 0.4], 100.0, inverse=False), 100.0)
    assert np.allclose(touching.source_lambda_at_t(0.5, [0.1, 0.4], 100.0, inverse=False), 0.0)

    inside = build_transform(flat_model(rbar_star=-0.02), 1.0, 0.0)
    assert inside.inverse_homogenizer()
    x = np.array([0.05, 0.2])
    assert np.allclose(inside.homogenizer_at_t(0.5, x, 100.0), 100.0 * 0.02 / x)


def test_tau_indexed_coefficients_agree_with_calendar_time(reference_model) -> None:
    cache = build_transform(reference_model, 0.25, 0.0)
    t = 0.1
    tau = float(cache.tau(t))
    x = np.array([0.5, 80.0, 120.0])
    assert np.allclose(cache.coeff_B(tau, x), cache.coeff_B_at_t(t, x), rtol=1e-8)
    assert np.allclose(cache.coeff_C(tau, x, 100.0), cache.coeff_C_at_t(t, x, 100.0), rtol=1e-6)
    assert cache.x_l_prime(tau) == pytest.approx(cache.x_l_prime_at_t(t), rel=1e-8)
