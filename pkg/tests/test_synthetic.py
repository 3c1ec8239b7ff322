import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgrflow.errors import LGRError
from lgrflow.synthetic import (
    FLOWS,
    AnalyticFlow,
    GridSpec,
    advect,
    apply_euclidean_motion,
    dense_ftle_oracle,
    double_gyre,
    make_flow,
    random_seeds,
    rigid_rotation,
    saddle,
    scaled,
    shear,
)


def _fd_gradient(flow, p, t, h=1e-6):
    g = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        g[:, j] = (flow.velocity(p + e, t) - flow.velocity(p - e, t)) / (2 * h)
    return g


def test_rotation_quarter_turn():
    tset = advect(rigid_rotation(1.0), [[1.0, 0.0]], 0.0, math.pi / 2, 1e-3)
    np.testing.assert_allclose(tset.positions[-1], [0.0, 1.0], rtol=0, atol=1e-8)
    assert tset.frame_times[-1] == math.pi / 2


def test_zero_velocity_is_constant():
    tset = advect(shear(0.0), [[0.3, 0.4], [1.0, -2.0]], 0.0, 1.0, 0.1)
    for tid in tset.ids:
        _, pos = tset.track(int(tid))
        assert np.all(pos == pos[0])


def test_saddle_exponential():
    tset = advect(saddle(1.0), [[1.0, 1.0]], 0.0, 1.0, 1e-2)
    np.testing.assert_allclose(tset.positions[-1], [np.e, 1 / np.e], rtol=0, atol=1e-6)


def test_rk4_fourth_order():
    def err(dt):
        tset = advect(rigid_rotation(1.0), [[1.0, 0.0]], 0.0, 2.0, dt)
        return np.linalg.norm(tset.positions[-1] - [np.cos(2.0), np.sin(2.0)])
    ratio = err(0.1) / err(0.05)
    assert 16 * 0.8 < ratio < 16 * 1.2


def test_advect_errors():
    with pytest.raises(ValueError):
        advect(saddle(), [[0, 0]], 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        advect(saddle(), [[0, 0]], 1.0, 1.0, 0.1)
    blow = AnalyticFlow("blow", lambda p, t: p * (np.inf if t >= 0.5 else 0.0), lambda p, t: None)
    with pytest.raises(LGRError, match=r"seed \[1\.0, 2\.0\] between t=0\.25 and t=0\.5"):
        advect(blow, [[1.0, 2.0]], 0.0, 1.0, 0.25)


def test_uneven_final_step_lands_on_end():
    tset = advect(saddle(), [[0.1, 0.1]], 0.0, 1.0, 0.3)
    np.testing.assert_allclose(tset.frame_times, [0.0, 0.3, 0.6, 0.9, 1.0])


def test_double_gyre_defaults():
    dg = double_gyre()
    assert dg.params == {"A": 0.1, "eps": 0.25, "omega": math.pi / 5}
    assert dg.domain == ((0.0, 2.0), (0.0, 1.0))
    # no-penetration on the walls
    assert dg.velocity(np.array([0.0, 0.4]), 1.3)[0] == pytest.approx(0.0, abs=1e-15)
    assert dg.velocity(np.array([0.7, 1.0]), 1.3)[1] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        make_flow("vortex_street")


def test_oracle_saddle_and_rotation():
    saddle_field = dense_ftle_oracle(saddle(1.0), GridSpec(-1, 1, 41, -1, 1, 41), 0.0, 1.0)
    np.testing.assert_allclose(saddle_field.sigma, 1.0, rtol=0, atol=1e-3)
    rot_field = dense_ftle_oracle(rigid_rotation(1.0), GridSpec(-1, 1, 41, -1, 1, 41), 0.0, 1.0)
    np.testing.assert_allclose(rot_field.sigma, 0.0, rtol=0, atol=1e-6)
    np.testing.assert_allclose(saddle_field.sample([[0.13, -0.4]]), [1.0], atol=1e-3)
    with pytest.raises(LGRError, match="outside oracle grid"):
        saddle_field.sample([[1.5, 0.0]])


def test_oracle_bilinear_sampling_matches_direct_interpolation():
    field = dense_ftle_oracle(double_gyre(), GridSpec(0, 2, 21, 0, 1, 11), 0.0, 2.0)
    gx, gy = field.grid.axes()
    # midpoint of a cell is the mean of its corners
    p = [(gx[3] + gx[4]) / 2, (gy[5] + gy[6]) / 2]
    corners = field.sigma[5:7, 3:5].mean()
    assert field.sample([p])[0] == pytest.approx(corners, abs=1e-14)


def test_euclidean_motion_examples():
    tset = advect(rigid_rotation(0.5), random_seeds(20, ((-1, 1), (-1, 1)), 1), 0.0, 1.0, 0.1)
    same = apply_euclidean_motion(tset, lambda t: 0.0, lambda t: np.zeros(2))
    assert same.equals(tset)
    drift = apply_euclidean_motion(tset, lambda t: 0.0, lambda t: np.array([t, 0.0]))
    _, _, times, _ = tset.sample_arrays()
    np.testing.assert_allclose(drift.positions - tset.positions, np.c_[times, np.zeros_like(times)],
                               atol=1e-15)


def test_scaled_flow_consistent():
    base = double_gyre()
    big = scaled(base, 10.0, 4.0)
    p = np.array([3.0, 7.0])
    np.testing.assert_allclose(big.velocity(p, 2.0), base.velocity(p / 10, 0.5) * 2.5)
    np.testing.assert_allclose(big.gradient(p, 2.0), _fd_gradient(big, p, 2.0), atol=1e-6)
    assert big.domain == ((0.0, 20.0), (0.0, 10.0))


# -- properties ------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(FLOWS))
def test_gradient_matches_finite_differences(name):
    flow = make_flow(name)
    rng = np.random.default_rng(7)
    (x0, x1), (y0, y1) = flow.domain
    for _ in range(100):
        p = rng.uniform([x0, y0], [x1, y1])
        t = rng.uniform(0, 10)
        np.testing.assert_allclose(flow.gradient(p, t), _fd_gradient(flow, p, t), rtol=0, atol=1e-6)


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-5, 5), st.floats(-5, 5))
def test_euclidean_motion_preserves_distances(seed, rate, vx, vy):
    rng = np.random.default_rng(seed)
    tset = advect(double_gyre(), rng.uniform([0, 0], [2, 1], size=(6, 2)), 0.0, 1.0, 0.25)
    moved = apply_euclidean_motion(tset, lambda t: rate * t + 0.2, lambda t: np.array([vx, vy]) * t)
    assert moved.ids.tolist() == tset.ids.tolist()
    for f in tset.frame_numbers.tolist():
        a = tset.frame_view(f).positions
        b = moved.frame_view(f).positions
        da = np.linalg.norm(a[:, None] - a[None], axis=2)
        db = np.linalg.norm(b[:, None] - b[None], axis=2)
        np.testing.assert_allclose(db, da, rtol=0, atol=1e-12)
