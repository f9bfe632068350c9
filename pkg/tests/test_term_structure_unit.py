import numpy as np
import pytest

from sofrgit.core.errors import ConfigError, DomainError
from sofrgit.core.term_structure import LINEAR, ModelSpec, ParamCurve, evaluate_curve, y_lower


def test_constant_curve_is_right_continuous_at_breakpoints() -> None:
    c = ParamCurve(breakpoints=(0.0, 0.5, 1.0), values=(1.0, 2.0))
    assert evaluate_curve(c, 0.25) == 1.0
    assert evaluate_curve(c, 0.5) == 2.0
    # last segment is closed
    assert evaluate_curve(c, 1.0) == 2.0


def test_linear_curve_interpolates_between_breakpoints() -> None:
    c = ParamCurve(breakpoints=(0.0, 1.0), values=(1.0, 3.0), interpolation=LINEAR)
    assert c(0.5) == pytest.approx(2.0)
    assert c.slope(0.3) == pytest.approx(2.0)


def test_curve_integrals_are_exact_per_segment() -> None:
    c = ParamCurve(breakpoints=(0.0, 0.5, 1.0), values=(1.0, 3.0))
    assert float(c.integral(0.0, 1.0)) == pytest.approx(2.0)
    assert float(c.integral(0.25, 0.75)) == pytest.approx(0.25 + 0.75)
    assert float(c.integral(0.0, 1.0, square=True)) == pytest.approx(0.5 + 4.5)

    lin = ParamCurve(breakpoints=(0.0, 1.0), values=(0.0, 1.0), interpolation=LINEAR)
    assert float(lin.integral(0.0, 1.0, square=True)) == pytest.approx(1.0 / 3.0)


def test_curve_rejects_bad_shapes() -> None:
    with pytest.raises(ConfigError):
        ParamCurve(breakpoints=(0.0, 0.0), values=(1.0,))
    with pytest.raises(ConfigError):
        ParamCurve(breakpoints=(0.0, 1.0), values=(1.0, 2.0))
    with pytest.raises(ConfigError):
        ParamCurve(breakpoints=(0.0, 1.0), values=(1.0,), interpolation="cubic")


def test_curve_outside_domain_raises() -> None:
    c = ParamCurve.flat(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        c(1.5)


def test_y_lower_is_clamped_at_zero(flat_model) -> None:
    assert y_lower(flat_model(rbar_star=-0.01), 0.5) == pytest.approx(0.01)
    assert y_lower(flat_model(rbar_star=0.02), 0.5) == 0.0


def test_y_lower_follows_a_stepped_curve(flat_model) -> None:
    m = ModelSpec(
        beta=-1.0,
        alpha=ParamCurve.flat(0.0, 0.0, 1.0),
        sigma=ParamCurve.flat(0.3, 0.0, 1.0),
        rbar_star=ParamCurve(breakpoints=(0.0, 0.5, 1.0), values=(-0.02, 0.01)),
        horizon=1.0,
    )
    out = np.asarray(m.y_lower([0.1, 0.7]))
    assert out.tolist() == pytest.approx([0.02, 0.0])


def test_model_rejects_beta_outside_range(flat_model) -> None:
    with pytest.raises(ConfigError):
        flat_model(beta=0.0)
    with pytest.raises(ConfigError):
        flat_model(beta=-1.5)


def test_model_requires_curves_to_cover_the_horizon() -> None:
    with pytest.raises(ConfigError):
        ModelSpec(
            beta=-1.0,
            alpha=ParamCurve.flat(0.0, 0.0, 0.5),
            sigma=ParamCurve.flat(0.3, 0.0, 1.0),
            rbar_star=ParamCurve.flat(-0.01, 0.0, 1.0),
            horizon=1.0,
        )


def test_killing_rate_variants(flat_model) -> None:
    y = np.array([0.02, 0.05])
    full = flat_model(killing="short_rate")
    assert np.allclose(full.killing_rate(0.5, y), -0.01 + y)

    curve_only = flat_model(killing="curve")
    assert np.allclose(curve_only.killing_rate(0.5, y), -0.01)

    off = flat_model(discounting_enabled=False)
    assert np.allclose(off.killing_rate(0.5, y), 0.0)


def test_mean_rate_integral_without_reversion(flat_model) -> None:
    m = flat_model(alpha=0.0, rbar_star=0.01)
    # int_0^1 (0.01 + 0.02) ds
    assert m.mean_rate_integral(0.0, 0.02, 1.0) == pytest.approx(0.03)


def test_mean_rate_integral_with_reversion(flat_model) -> None:
    m = flat_model(alpha=2.0, rbar_star=0.0)
    expected = 0.05 * (1.0 - np.exp(-2.0 * 0.75)) / 2.0
    assert m.mean_rate_integral(0.25, 0.05, 1.0) == pytest.approx(expected, rel=1e-12)
