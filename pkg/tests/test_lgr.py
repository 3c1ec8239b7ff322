import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.linalg import expm

from lgrflow.errors import InsufficientNeighborsError, RankDeficiencyError
from lgrflow.lgr import (
    FIELD_PRESET,
    LAB_PRESET,
    FlowMapJacobian,
    KernelConfig,
    compose_jacobians,
    gaussian_kernel_weights,
    regress_jacobian,
    velocity_gradient,
)
from lgrflow.synthetic import advect, rigid_rotation, saddle
from lgrflow.trajectories import TrajectorySet

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def _two_frame_set(x0, x1, dt=1.0):
    n = len(x0)
    ids = np.repeat(np.arange(n), 2)
    frames = np.tile([0, 1], n)
    pos = np.stack([x0, x1], axis=1).reshape(-1, 2)
    return TrajectorySet.from_arrays(ids, frames, pos, [0.0, dt])


def _jac(m, a=0, b=1, center=0):
    return FlowMapJacobian(np.asarray(m, dtype=float), center, (a, b))


def test_kernel_weights():
    assert gaussian_kernel_weights([[0.0, 0.0]], 1.0)[0] == 1.0
    assert gaussian_kernel_weights([[0.0, 2.0]], 2.0)[0] == pytest.approx(np.exp(-0.5), abs=1e-15)
    w = gaussian_kernel_weights([[0.03, 0.0]], 0.03)[0]
    assert w == pytest.approx(0.60653, abs=1e-5)
    with pytest.raises(ValueError):
        gaussian_kernel_weights([[1.0, 0.0]], 0.0)


def test_presets():
    assert (LAB_PRESET.k, LAB_PRESET.s) == (15, 0.03)
    assert (FIELD_PRESET.k, FIELD_PRESET.s) == (25, 0.6)
    assert KernelConfig().gamma == 1e-10
    with pytest.raises(ValueError):
        KernelConfig(k=2)
    with pytest.raises(ValueError):
        KernelConfig(s=-1)
    with pytest.raises(ValueError):
        KernelConfig(gamma=-1e-3)


def test_exact_shear_map(rng):
    a = np.array([[1.0, 0.1], [0.0, 1.0]])
    x0 = rng.uniform(-1, 1, size=(8, 2))
    tset = _two_frame_set(x0, x0 @ a.T + 0.3)
    jac = regress_jacobian(tset, 0, range(1, 8), 0, 1, KernelConfig(k=7, s=0.5, gamma=0.0))
    np.testing.assert_allclose(jac.matrix, a, rtol=0, atol=1e-14)
    assert jac.n_used == 7 and not jac.shortfall


def test_rotation_regression_matches_matrix_exponential(rng):
    dt = 0.01
    seeds = rng.uniform(-0.05, 0.05, size=(16, 2)) + [0.4, -0.2]
    tset = advect(rigid_rotation(1.0), seeds, 0.0, dt, dt)
    jac = regress_jacobian(tset, 0, range(1, 16), 0, 1, KernelConfig(k=15, s=0.05, gamma=1e-12))
    oracle = expm(ROT * dt)
    assert np.linalg.norm(jac.matrix - oracle) < 1e-4
    grad = velocity_gradient(jac, dt)
    assert np.linalg.norm(grad.matrix - ROT) < 1e-2


def test_collinear_neighbors_rank_deficient():
    x0 = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    tset = _two_frame_set(x0, x0)
    with pytest.raises(RankDeficiencyError, match="center tracer 0") as info:
        regress_jacobian(tset, 0, [1, 2], 0, 1, KernelConfig(k=3, s=1.0, gamma=0.0))
    assert info.value.center == 0


def test_too_few_neighbors():
    x0 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tset = _two_frame_set(x0, x0)
    with pytest.raises(InsufficientNeighborsError):
        regress_jacobian(tset, 0, [1, 2], 0, 1, KernelConfig(k=3, s=1.0, gamma=0.0))
    jac = regress_jacobian(tset, 0, [1, 2], 0, 1, KernelConfig(k=3, s=1.0, gamma=1e-6))
    assert jac.shortfall and jac.n_used == 2


def test_identity_for_degenerate_interval():
    tset = _two_frame_set(np.zeros((3, 2)) + [[0, 0], [1, 0], [0, 1]], np.zeros((3, 2)))
    jac = regress_jacobian(tset, 0, [1, 2], 1, 1, KernelConfig(k=3))
    np.testing.assert_array_equal(jac.matrix, np.eye(2))


def test_velocity_gradient_examples():
    g = velocity_gradient(_jac([[1, -0.01], [0.01, 1]]), 0.01)
    np.testing.assert_allclose(g.matrix, ROT, atol=1e-12)
    np.testing.assert_array_equal(velocity_gradient(_jac(np.eye(2)), 0.3).matrix, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        velocity_gradient(_jac(np.eye(2)), 0.0)


def test_compose_examples():
    out = compose_jacobians([_jac([[1, 0.1], [0, 1]], 0, 1), _jac([[1, 0], [0.1, 1]], 1, 2)])
    np.testing.assert_allclose(out.matrix, [[1, 0.1], [0.1, 1.01]], atol=1e-15)
    assert out.interval == (0, 2)
    ident = compose_jacobians([_jac(np.eye(2), i, i + 1) for i in range(5)])
    np.testing.assert_array_equal(ident.matrix, np.eye(2))
    with pytest.raises(ValueError, match="gap between frames 1 and 2"):
        compose_jacobians([_jac(np.eye(2), 0, 1), _jac(np.eye(2), 2, 3)])
    with pytest.raises(ValueError):
        compose_jacobians([])


def test_saddle_composition_matches_analytic_flow_map(rng):
    seeds = np.vstack([[0.2, 0.3], rng.uniform(-0.1, 0.1, size=(20, 2)) + [0.2, 0.3]])
    tset = advect(saddle(1.0), seeds, 0.0, 1.0, 0.01)
    cfg = KernelConfig(k=15, s=0.1)
    chain = []
    for f in range(100):
        pos = tset.positions_at(np.arange(21), f)
        d = np.linalg.norm(pos[1:] - pos[0], axis=1)
        nb = (np.argsort(d)[:15] + 1).tolist()
        chain.append(regress_jacobian(tset, 0, nb, f, f + 1, cfg))
    total = compose_jacobians(chain).matrix
    oracle = np.diag([np.e, 1 / np.e])
    assert np.linalg.norm(total - oracle) / np.linalg.norm(oracle) < 0.01


# -- properties ------------------------------------------------------------

def _random_affine(rng):
    a = rng.normal(size=(2, 2))
    while abs(np.linalg.det(a)) < 0.05:
        a = rng.normal(size=(2, 2))
    return a, rng.normal(size=2)


def _spread(rng, n):
    x = rng.uniform(-1, 1, size=(n, 2))
    return x


@given(st.integers(0, 2**32 - 1), st.integers(3, 30), st.floats(0.5, 5.0))
def test_affine_exactness(seed, n, s):
    # n neighbors plus the center; bandwidths comparable to the spread keep weights non-vanishing
    rng = np.random.default_rng(seed)
    a, b = _random_affine(rng)
    x0 = _spread(rng, n + 1)
    rel = x0[1:] - x0[0]
    assume(np.linalg.eigvalsh(rel.T @ rel)[0] > 1e-3)
    tset = _two_frame_set(x0, x0 @ a.T + b)
    jac = regress_jacobian(tset, 0, range(1, n + 1), 0, 1, KernelConfig(k=3, s=s, gamma=0.0))
    assert np.linalg.norm(jac.matrix - a) < 1e-10


@given(st.integers(0, 2**32 - 1), st.floats(-np.pi, np.pi), st.floats(-100, 100), st.floats(-100, 100))
def test_equivariance(seed, theta, tx, ty):
    rng = np.random.default_rng(seed)
    x0 = _spread(rng, 12)
    x1 = x0 + 0.1 * np.sin(3 * x0[:, ::-1]) + 0.05 * x0 ** 2
    q = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    cfg = KernelConfig(k=11, s=0.7)
    base = regress_jacobian(_two_frame_set(x0, x1), 0, range(1, 12), 0, 1, cfg).matrix
    rot = regress_jacobian(_two_frame_set(x0 @ q.T, x1 @ q.T), 0, range(1, 12), 0, 1, cfg).matrix
    shift = regress_jacobian(_two_frame_set(x0 + [tx, ty], x1 + [tx, ty]), 0, range(1, 12), 0, 1, cfg).matrix
    np.testing.assert_allclose(rot, q @ base @ q.T, rtol=0, atol=1e-9)
    np.testing.assert_allclose(shift, base, rtol=0, atol=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_composition_consistency_on_affine_flows(seed, n_steps):
    rng = np.random.default_rng(seed)
    # short-time maps are near the identity
    maps = [(expm(0.3 * rng.normal(size=(2, 2))), 0.1 * rng.normal(size=2)) for _ in range(n_steps)]
    x = [_spread(rng, 10)]
    for a, b in maps:
        x.append(x[-1] @ a.T + b)
    ids = np.repeat(np.arange(10), n_steps + 1)
    frames = np.tile(np.arange(n_steps + 1), 10)
    pos = np.stack(x, axis=1).reshape(-1, 2)
    tset = TrajectorySet.from_arrays(ids, frames, pos, np.arange(n_steps + 1.0))
    cfg = KernelConfig(k=9, s=1.0, gamma=0.0)
    chain = [regress_jacobian(tset, 0, range(1, 10), f, f + 1, cfg) for f in range(n_steps)]
    full = regress_jacobian(tset, 0, range(1, 10), 0, n_steps, cfg).matrix
    composed = compose_jacobians(chain).matrix
    scale = max(1.0, np.linalg.norm(full))
    assert np.linalg.norm(composed - full) / scale < 1e-8


def test_gamma_monotone_convergence(rng):
    x0 = _spread(rng, 15)
    x1 = x0 + 0.2 * np.tanh(x0[:, ::-1])
    tset = _two_frame_set(x0, x1)
    exact = regress_jacobian(tset, 0, range(1, 15), 0, 1, KernelConfig(k=14, s=0.8, gamma=0.0)).matrix
    errs = [np.linalg.norm(regress_jacobian(tset, 0, range(1, 15), 0, 1,
                                            KernelConfig(k=14, s=0.8, gamma=g)).matrix - exact)
            for g in (1e-2, 1e-6, 1e-12)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-9


def test_velocity_gradient_first_order_convergence(rng):
    seeds = np.vstack([[0.3, 0.1], rng.uniform(-0.05, 0.05, size=(15, 2)) + [0.3, 0.1]])
    errs = []
    for dt in (0.04, 0.02, 0.01):
        tset = advect(rigid_rotation(1.0), seeds, 0.0, dt, dt)
        jac = regress_jacobian(tset, 0, range(1, 16), 0, 1, KernelConfig(k=15, s=0.05))
        errs.append(np.linalg.norm(velocity_gradient(jac, dt).matrix - ROT))
    assert errs[1] <= 0.5 * errs[0] * 1.2 and errs[2] <= 0.5 * errs[1] * 1.2
