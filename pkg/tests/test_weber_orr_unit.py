import numpy as np
import pytest

from sofrgit.core.errors import DomainError, SingularityError
from sofrgit.core.weber_orr import (
    ThetaQuery,
    bessel_j,
    bessel_y,
    green_point,
    green_weights,
    kernel_V,
    kernel_W,
    kernel_W_prime,
    kernel_weights,
    theta,
    theta_closed_form,
    theta_delta_action,
    theta_hankel,
    theta_matrix,
    theta_quadrature,
)


def test_half_order_bessel_closed_forms() -> None:
    assert bessel_j(0.5, np.pi / 2.0) == pytest.approx(2.0 / np.pi, rel=1e-14)
    assert bessel_y(0.5, np.pi) == pytest.approx(np.sqrt(2.0 / np.pi ** 2), rel=1e-14)


def test_bessel_y_needs_positive_argument() -> None:
    with pytest.raises(DomainError):
        bessel_y(1.0, 0.0)


def test_kernel_W_vanishes_on_the_boundary() -> None:
    p = np.linspace(0.1, 20.0, 50)
    for nu_abs in (0.5, 1.0, 1.7):
        assert np.all(kernel_W(nu_abs, p, 1.3, 1.3) == 0.0)


def test_theta_closed_form_reference_value() -> None:
    # 1/(sqrt(1.32) sqrt(pi)) * (exp(-0.01) - exp(-0.09))
    assert theta_closed_form(0.5, 1.2, 1.1, 1.0) == pytest.approx(3.738e-2, rel=1e-3)


def test_theta_is_symmetric_in_v_and_w() -> None:
    a = theta_closed_form(0.3, 1.7, 1.2, 1.0)
    b = theta_closed_form(0.3, 1.2, 1.7, 1.0)
    assert a == pytest.approx(b, rel=1e-14)

    m = theta_quadrature(1.0, 0.3, [1.2, 1.7], [1.2, 1.7], 1.0)
    assert m[0, 1] == pytest.approx(m[1, 0], rel=1e-12)


def test_theta_vanishes_at_the_lower_boundary() -> None:
    assert theta_closed_form(0.2, 1.0, 1.5, 1.0) == 0.0
    for nu_abs in (0.5, 1.0, 1.0 / 0.6):
        m = theta_quadrature(nu_abs, 0.2, [1.0], [1.0, 1.5, 3.0], 1.0)
        assert np.all(m == 0.0)


@pytest.mark.parametrize("tau", [0.05, 0.5, 1.0])
def test_quadrature_matches_closed_form_at_half_order(tau: float) -> None:
    v = np.array([1.0, 1.3, 2.5])
    w = np.array([1.1, 1.7, 3.0])
    closed = np.asarray(theta_closed_form(tau, v[:, None], w[None, :], 1.0))
    quad = theta_quadrature(0.5, tau, v, w, 1.0)
    assert np.allclose(quad, closed, atol=1e-8)


def test_theta_derivative_matches_difference_quotient() -> None:
    tau, v, w, a, h = 0.4, 1.6, 1.9, 1.0, 1e-6
    d = theta_closed_form(tau, v, w, a, derivative=True)
    fd = (theta_closed_form(tau, v + h, w, a) - theta_closed_form(tau, v - h, w, a)) / (2.0 * h)
    assert d == pytest.approx(fd, rel=1e-6)


def test_theta_matrix_dispatches_on_order() -> None:
    m = theta_matrix(0.5, 0.5, [1.2], [1.1], 1.0)
    assert m.shape == (1, 1)
    assert m[0, 0] == pytest.approx(theta_closed_form(0.5, 1.2, 1.1, 1.0))


def test_theta_query_validates_arguments() -> None:
    assert theta(ThetaQuery(nu_abs=0.5, tau=0.5, v=1.2, w=1.1, a=1.0)) == pytest.approx(3.738e-2, rel=1e-3)
    with pytest.raises(DomainError):
        ThetaQuery(nu_abs=0.5, tau=0.5, v=0.9, w=1.1, a=1.0)
    with pytest.raises(DomainError):
        ThetaQuery(nu_abs=0.5, tau=0.5, v=1.2, w=1.1, a=-1.0)


def test_small_tau_is_a_singularity() -> None:
    with pytest.raises(SingularityError) as ei:
        theta_closed_form(1e-9, 1.2, 1.1, 1.0)
    assert ei.value.where == "weber_orr.theta"


def test_delta_action_limit_values() -> None:
    assert theta_delta_action(0.5, lambda w: 1.0, 2.0, 1.0) == pytest.approx(0.5)
    assert theta_delta_action(0.5, lambda w: 1.0, 1.0, 1.0) == 0.0
    assert theta_delta_action(1.0, lambda w: w, 3.0, 1.0) == pytest.approx(1.0)


def test_delta_action_on_sampled_function() -> None:
    nodes = np.linspace(1.0, 3.0, 21)
    g = 2.0 * nodes
    assert theta_delta_action(0.5, g, 2.0, 1.0, nodes=nodes) == pytest.approx(2.0)


def test_kernel_W_prime_is_the_v_derivative() -> None:
    p, v, a, h = np.array([0.7, 2.0, 5.5]), 1.8, 1.0, 1e-6
    for nu_abs in (0.5, 1.0, 1.7):
        fd = (kernel_W(nu_abs, p, v + h, a) - kernel_W(nu_abs, p, v - h, a)) / (2.0 * h)
        assert np.allclose(kernel_W_prime(nu_abs, p, v, a), fd, rtol=1e-6, atol=1e-9)


def test_kernel_V_at_half_order() -> None:
    # J_1/2^2 + Y_1/2^2 = 2 / (pi x)
    p = np.array([0.5, 1.0, 4.0])
    assert np.allclose(kernel_V(0.5, p, 1.5), 2.0 / (np.pi * p * 1.5), rtol=1e-13)


def test_quadrature_derivative_matches_closed_form() -> None:
    v = np.array([1.2, 2.0])
    w = np.array([1.5, 2.4])
    closed = np.asarray(theta_closed_form(0.3, v[:, None], w[None, :], 1.0, derivative=True))
    quad = theta_quadrature(0.5, 0.3, v, w, 1.0, derivative=True)
    assert np.allclose(quad, closed, atol=1e-7)


def test_hankel_form_with_the_boundary_at_the_origin() -> None:
    v = np.array([0.4, 1.0, 3.0])
    w = np.array([0.2, 1.1, 2.5])
    closed = np.asarray(theta_closed_form(0.2, v[:, None], w[None, :], 0.0))
    assert np.allclose(theta_hankel(0.5, 0.2, v, w), closed, rtol=1e-10, atol=1e-14)
    # theta_matrix routes a = 0 to the Hankel form away from the half order
    assert np.allclose(theta_matrix(1.0, 0.2, v, w, 0.0), theta_hankel(1.0, 0.2, v, w))


def test_heat_green_reproduces_linear_data_away_from_the_boundary() -> None:
    nodes = np.linspace(0.0, 10.0, 401)
    m = green_weights(-0.5, 0.1, [5.0], nodes, 0.0)
    assert float(m @ np.ones_like(nodes)) == pytest.approx(1.0, rel=1e-10)
    assert float(m @ nodes) == pytest.approx(5.0, rel=1e-10)


def test_short_gaps_use_the_asymptotic_kernel() -> None:
    nu = 1.0 / (2.0 * -0.3)
    nodes = np.linspace(1.0, 3.0, 201)
    m = green_weights(nu, 1e-9, [2.0], nodes, 1.0)
    assert float(m @ np.ones_like(nodes)) == pytest.approx(1.0, rel=1e-4)
    assert np.all(np.isfinite(kernel_weights(abs(nu), 1e-9, [2.0], nodes, 1.0)))
    assert np.all(np.isfinite(green_point(nu, 1e-9, [2.0, 2.1], 2.05, 1.0)))


def test_green_point_vanishes_for_a_source_on_the_boundary() -> None:
    assert np.all(green_point(-0.5, 0.1, [1.2, 2.0], 1.0, 1.0) == 0.0)
    assert np.all(green_point(-0.8, 0.1, [1.2, 2.0], 1.0, 1.0) == 0.0)
