import numpy as np
import pytest

from momobs import (
    FrictionSpec,
    ModelError,
    Scenario,
    build_named_model,
    check_zrs,
    crane_constants,
    integrate_scenario,
    make_constant_inertia,
    sample_positions,
    SpiderCraneParams,
)


def test_constant_identity_inertia():
    model = make_constant_inertia(np.eye(3), np.zeros((3, 3)))
    q = np.array([0.3, -0.2, 1.0])
    assert np.array_equal(model.factor(q), np.eye(3))
    assert np.array_equal(model.integral_map(q), q)


def test_constant_random_spd():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 3))
    M = A @ A.T + 3.0 * np.eye(3)
    model = make_constant_inertia(M, np.eye(3))
    T = model.factor(np.zeros(3))
    assert np.allclose(T @ T.T, model.minv(np.zeros(3)), atol=1e-12)
    assert np.allclose(T, T.T, atol=1e-12)  # symmetric square root
    # linear integral map differentiates exactly to the factor inverse
    q = rng.uniform(-1, 1, 3)
    assert np.allclose(
        model.integral_map(q), model.factor_inverse(q) @ q, atol=1e-12
    )


def test_constant_rejects_bad_inertia():
    with pytest.raises(ModelError):
        make_constant_inertia(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(ModelError):
        make_constant_inertia(np.diag([1.0, -2.0]), np.eye(2))


def test_constant_energy_budget():
    # no friction, no input, no disturbance: total energy is conserved;
    # with friction it can only fall
    K = np.diag([1.0, 2.0])
    M = np.diag([1.0, 0.5])

    def energy_series(friction):
        model = make_constant_inertia(M, K, friction)
        sc = Scenario(model=model, observer="none", q0=[1.0, -0.5], mom0=[0.0, 0.3],
                      t_final=10.0, dt=1e-3, stride=100)
        ts = integrate_scenario(sc)
        return np.array([
            0.5 * mom @ model.minv(q) @ mom + model.potential(q)
            for q, mom in zip(ts.q, ts.mom)
        ])

    conserved = energy_series(FrictionSpec(np.zeros(2), np.ones(2, dtype=bool)))
    assert np.abs(conserved - conserved[0]).max() <= 1e-8
    damped = energy_series(FrictionSpec(np.array([0.5, 0.5]), np.ones(2, dtype=bool)))
    assert np.diff(damped).max() <= 1e-10
    assert damped[-1] < damped[0] - 1e-3


def test_crane_factor_constants():
    a, b, c = crane_constants(SpiderCraneParams())
    assert a == pytest.approx(1.0 / np.sqrt(1.5), rel=1e-15)
    assert c == pytest.approx(np.sqrt(12.0), rel=1e-15)
    assert b == pytest.approx(1.0 / (c * 0.5 * 0.5), rel=1e-15)


def test_crane_closed_form_inverse_inertia(crane):
    # the printed closed form for the inverse inertia and the factor product
    # are two independent formulas for the same matrix
    rng = np.random.default_rng(1)
    for _ in range(1000):
        q = rng.uniform(-np.pi, np.pi, 3)
        T = crane.factor(q)
        assert np.linalg.norm(T @ T.T - crane.minv(q)) <= 1e-12


def test_crane_matches_direct_numeric_inverse(crane):
    # invert the mass matrix built from first principles
    p = SpiderCraneParams()
    rng = np.random.default_rng(2)
    for _ in range(20):
        q = rng.uniform(-np.pi, np.pi, 3)
        c3, s3 = np.cos(q[2]), np.sin(q[2])
        M = np.array(
            [
                [p.m_r + p.m, 0.0, p.m * p.L3 * c3],
                [0.0, p.m_r + p.m, p.m * p.L3 * s3],
                [p.m * p.L3 * c3, p.m * p.L3 * s3, p.m * p.L3**2],
            ]
        )
        assert np.linalg.norm(crane.minv(q) - np.linalg.inv(M)) < 1e-10


def test_crane_gravity_gradient(crane):
    q = np.array([0.0, 0.0, 0.4])
    g = crane.grad_potential(q)
    assert np.allclose(g, [0.0, 0.0, 1.0 * 9.81 * 0.5 * np.sin(0.4)])
    h = 1e-6
    e = np.array([0.0, 0.0, h])
    fd = (crane.potential(q + e) - crane.potential(q - e)) / (2 * h)
    assert g[2] == pytest.approx(fd, abs=1e-8)


def test_crane_unknown_rows_constant(crane, manipulator):
    rng = np.random.default_rng(3)
    for model in (crane, manipulator):
        kappa = model.friction.unknown_indices
        base = model.factor(rng.uniform(-np.pi, np.pi, model.n))[kappa]
        for _ in range(50):
            rows = model.factor(rng.uniform(-np.pi, np.pi, model.n))[kappa]
            assert np.abs(rows - base).max() <= 1e-12


def test_manipulator_factor_inverse_consistency(manipulator):
    rng = np.random.default_rng(4)
    for _ in range(100):
        q = rng.uniform(-np.pi, np.pi, 4)
        T = manipulator.factor(q)
        assert np.linalg.norm(T @ manipulator.factor_inverse(q) - np.eye(4)) <= 1e-12
        assert np.linalg.norm(T @ T.T - manipulator.minv(q)) <= 1e-12


def test_manipulator_selector(manipulator):
    C = manipulator.friction.selector
    assert np.array_equal(C, np.vstack([np.eye(2), np.zeros((2, 2))]))


def test_cholesky_variant_shares_inertia(crane, crane_cholesky):
    rng = np.random.default_rng(5)
    for _ in range(20):
        q = rng.uniform(-np.pi, np.pi, 3)
        L = crane_cholesky.factor(q)
        assert np.allclose(L, np.tril(L))
        assert np.linalg.norm(L @ L.T - crane.minv(q)) <= 1e-12
    assert crane_cholesky.integral_map is None
    assert not crane_cholesky.zrs


def test_structure_reports(crane, crane_cholesky, manipulator):
    samples3 = sample_positions(3, 40)
    assert check_zrs(crane, samples3).all_ok
    assert not check_zrs(crane_cholesky, samples3).zrs_ok
    assert check_zrs(manipulator, sample_positions(4, 40)).all_ok


def test_named_model_dispatch():
    crane = build_named_model("spider-crane", m_r=0.5, m=1.0, L3=0.5)
    assert crane.name == "spider-crane"
    manip = build_named_model("manipulator")
    assert manip.n == 4
    with pytest.raises(ModelError):
        build_named_model("hovercraft")


def test_params_validate():
    with pytest.raises(ModelError):
        SpiderCraneParams(m_r=-1.0)
