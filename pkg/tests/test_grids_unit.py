import numpy as np
import pytest

from sofrgit.core.errors import ConfigError, ContractError
from sofrgit.core.grids import (
    build_grids,
    integrate_space,
    integrate_time,
    reference_z_nodes,
    simpson_weights,
    stretched_nodes,
    z_nodes,
)
from sofrgit.core.transforms import build_transform


def test_simpson_weights_on_four_intervals() -> None:
    w = simpson_weights(4, 0.25)
    assert np.allclose(w, np.array([1.0, 4.0, 2.0, 4.0, 1.0]) * 0.25 / 3.0)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 8, 9])
def test_simpson_weights_integrate_cubics_exactly(n: int) -> None:
    h = 1.0 / n
    s = np.linspace(0.0, 1.0, n + 1)
    w = simpson_weights(n, h)
    assert integrate_time(s ** 2, w) == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert integrate_time(s ** 3, w) == pytest.approx(0.25, rel=1e-12)


def test_simpson_weights_degenerate_counts() -> None:
    assert simpson_weights(0, 0.1).tolist() == [0.0]
    assert np.allclose(simpson_weights(1, 0.1), [0.05, 0.05])
    with pytest.raises(ContractError):
        simpson_weights(-1, 0.1)


def test_integrate_time_checks_lengths() -> None:
    with pytest.raises(ContractError):
        integrate_time(np.ones(3), simpson_weights(3, 0.1))


def test_trapezoid_space_integral() -> None:
    x = np.linspace(1.0, 2.0, 2001)
    assert integrate_space(1.0 / x, x) == pytest.approx(np.log(2.0), rel=1e-7)


def test_stretched_nodes_are_increasing_and_cluster_at_spot() -> None:
    x = stretched_nodes(0.0, 10.0, 4.0, 41)
    assert x[0] == 0.0 and x[-1] == 10.0
    assert np.all(np.diff(x) > 0.0)
    gaps = np.diff(x)
    near_spot = gaps[np.searchsorted(x, 4.0) - 1]
    assert near_spot < gaps[-1]


def test_z_columns_run_from_boundary_to_top() -> None:
    Z = z_nodes(np.array([0.0, 50.0, 100.0]), 300.0, 5)
    assert Z.shape == (3, 5)
    assert Z[:, 0].tolist() == [0.0, 50.0, 100.0]
    assert np.all(Z[:, -1] == 300.0)
    assert reference_z_nodes(300.0, 5).size == 121
    assert reference_z_nodes(300.0, 20).size == 160


def test_build_grids_starts_each_level_at_the_lower_boundary(flat_model) -> None:
    cache = build_transform(flat_model(alpha=-0.1, rbar_star=-0.01, horizon=0.25), 0.25, 0.0)
    x_max = float(cache.x_of_y(0.0, 1.0))
    spot = float(cache.x_of_y(0.0, 0.05))
    g = build_grids(cache, 6, 20, 4, x_max, spot)
    assert g.n_t == 6 and g.n_x == 20
    assert g.t_nodes[0] == 0.25 and g.t_nodes[-1] == 0.0
    for i, t in enumerate(g.t_nodes):
        assert g.x_nodes[i, 0] == pytest.approx(float(cache.x_lower_at_t(t)))
    assert g.y_max == pytest.approx(1.0)
    assert g.time_weights(4).size == 5


def test_build_grids_rejects_small_or_inverted_grids(flat_model) -> None:
    cache = build_transform(flat_model(), 0.5, 0.0)
    with pytest.raises(ConfigError):
        build_grids(cache, 2, 20, 4, 1.0, 0.05)
    with pytest.raises(ConfigError):
        build_grids(cache, 6, 20, 4, 0.05, 1.0)
