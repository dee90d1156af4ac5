"""Ready-made mechanical models: constant inertia, planar manipulator, spider crane.

Each factory returns a MechanicalModel whose factor T is a specific closed
form, chosen so that the factor columns commute.  The crane also gets a
variant built on the ordinary lower-triangular Cholesky factor of the same
inverse inertia matrix; that factor does not commute and the variant exists
to exercise the failure path of the structural checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import FrictionSpec, MechanicalModel, ModelError

Array = np.ndarray


@dataclass(frozen=True)
class SpiderCraneParams:
    """Gantry ring of mass m_r moving in its plane, payload m on a cable L3."""

    m_r: float = 0.5
    m: float = 1.0
    L3: float = 0.5
    g: float = 9.81
    friction: Sequence[float] = (0.0, 0.0, 0.5)
    known_mask: Sequence[bool] = (True, True, False)

    def __post_init__(self):
        if min(self.m_r, self.m, self.L3) <= 0:
            raise ModelError("masses and cable length must be positive")


@dataclass(frozen=True)
class ManipulatorParams:
    """Planar redundant manipulator with one elastic degree of freedom."""

    I: float = 1.0
    M: float = 1.0
    m: float = 1.0
    l: float = 1.0
    friction: Sequence[float] = (0.3, 0.2, 0.1, 0.1)
    known_mask: Sequence[bool] = (False, False, True, True)

    def __post_init__(self):
        if min(self.I, self.M, self.m, self.l) <= 0:
            raise ModelError("physical constants must be positive")


def make_constant_inertia(M, K, friction: FrictionSpec | None = None) -> MechanicalModel:
    """Linear mass-spring system with constant inertia M and stiffness K.

    The factor is the symmetric square root of M^-1, so it is constant, its
    columns trivially commute, and the integral map is linear.  All friction
    coefficients may be treated as unknown here.
    """
    M = np.asarray(M, dtype=float)
    K = np.asarray(K, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n) or not np.allclose(M, M.T):
        raise ModelError("inertia matrix must be square symmetric")
    w, V = np.linalg.eigh(M)
    if np.any(w <= 0):
        raise ModelError("inertia matrix must be positive definite")
    minv = V @ np.diag(1.0 / w) @ V.T
    T = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    Tinv = V @ np.diag(np.sqrt(w)) @ V.T
    if friction is None:
        friction = FrictionSpec(np.zeros(n), np.zeros(n, dtype=bool))
    G = np.eye(n)
    zeros_jac = np.zeros((n, n, n))
    return MechanicalModel(
        n=n,
        m=n,
        minv=lambda q: minv,
        potential=lambda q: 0.5 * float(q @ K @ q),
        grad_potential=lambda q: K @ q,
        input_matrix=lambda q: G,
        factor=lambda q: T,
        factor_inv=lambda q: Tinv,
        friction=friction,
        integral_map=lambda q: Tinv @ q,
        zrs=True,
        factor_jac=lambda q: zeros_jac,
        lip_factor_inv=0.0,
        name="constant",
    )


def make_planar_manipulator(params: ManipulatorParams = ManipulatorParams()) -> MechanicalModel:
    """4-dof underactuated manipulator with an elastic joint.

    The factor here is lower triangular and depends on q only through
    q1 + q2; its first two rows are constant, so the frictions on the
    elastic coordinate and the revolute joint can be treated as unknown.
    The potential is not part of this model (it lives with the physical
    parameters we do not fix); structural identities are what it is for.
    """
    I, M, m, l = params.I, params.M, params.m, params.l
    a2 = np.sqrt(M * m) * l / np.sqrt(m + M)
    a3 = np.sqrt(M + m)
    rho = np.sqrt(M / m)
    sI = np.sqrt(I)

    def trig(q):
        s = q[0] + q[1]
        return np.sin(s), np.cos(s)

    def factor(q):
        s12, c12 = trig(q)
        return np.array(
            [
                [1.0 / sI, 0.0, 0.0, 0.0],
                [-1.0 / sI, 1.0 / a2, 0.0, 0.0],
                [0.0, -rho * s12 / a3, 1.0 / a3, 0.0],
                [0.0, rho * c12 / a3, 0.0, 1.0 / a3],
            ]
        )

    def factor_inv(q):
        s12, c12 = trig(q)
        return np.array(
            [
                [sI, 0.0, 0.0, 0.0],
                [a2, a2, 0.0, 0.0],
                [a2 * rho * s12, a2 * rho * s12, a3, 0.0],
                [-a2 * rho * c12, -a2 * rho * c12, 0.0, a3],
            ]
        )

    def integral_map(q):
        s12, c12 = trig(q)
        return np.array(
            [
                sI * q[0],
                a2 * (q[0] + q[1]),
                -a2 * rho * c12 + a3 * q[2],
                -a2 * rho * s12 + a3 * q[3],
            ]
        )

    def factor_jac(q):
        s12, c12 = trig(q)
        d = np.zeros((4, 4, 4))
        col = np.array([0.0, 0.0, -rho * c12 / a3, -rho * s12 / a3])
        d[0][:, 1] = col
        d[1][:, 1] = col
        return d

    def minv(q):
        T = factor(q)
        return T @ T.T

    G = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    friction = FrictionSpec(np.asarray(params.friction, float), np.asarray(params.known_mask, bool))
    return MechanicalModel(
        n=4,
        m=2,
        minv=minv,
        potential=lambda q: 0.0,
        grad_potential=lambda q: np.zeros(4),
        input_matrix=lambda q: G,
        factor=factor,
        factor_inv=factor_inv,
        friction=friction,
        integral_map=integral_map,
        zrs=True,
        factor_jac=factor_jac,
        name="manipulator",
    )


def crane_constants(params: SpiderCraneParams):
    """The three constants of the crane's upper-triangular factor."""
    a = 1.0 / np.sqrt(params.m_r + params.m)
    c = np.sqrt((params.m_r + params.m) / (params.m * params.L3**2 * params.m_r))
    b = 1.0 / (c * params.L3 * params.m_r)
    return a, b, c


def make_spider_crane(params: SpiderCraneParams = SpiderCraneParams()) -> MechanicalModel:
    """2D spider crane: gantry ring plus pendulum payload on a fixed cable.

    Uses the upper-triangular factor whose third row is constant, so the
    cable-angle friction coefficient can be estimated.  The two gantry
    forces are the inputs.  The potential is the pendulum term
    m g L3 (1 - cos q3); the ring moves in a horizontal plane.
    """
    p = params
    a, b, c = crane_constants(p)
    mgl = p.m * p.g * p.L3
    alm = a * p.L3 * p.m
    G = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def minv(q):
        s3, c3 = np.sin(q[2]), np.cos(q[2])
        den = (p.m_r + p.m) * p.m_r
        return np.array(
            [
                [(p.m_r + p.m * c3**2) / den, p.m * c3 * s3 / den, -c3 / (p.L3 * p.m_r)],
                [p.m * c3 * s3 / den, (p.m_r + p.m * s3**2) / den, -s3 / (p.L3 * p.m_r)],
                [-c3 / (p.L3 * p.m_r), -s3 / (p.L3 * p.m_r), (p.m_r + p.m) / (p.m_r * p.L3**2 * p.m)],
            ]
        )

    def factor(q):
        s3, c3 = np.sin(q[2]), np.cos(q[2])
        return np.array([[a, 0.0, -b * c3], [0.0, a, -b * s3], [0.0, 0.0, c]])

    def factor_inv(q):
        s3, c3 = np.sin(q[2]), np.cos(q[2])
        return np.array(
            [[1.0 / a, 0.0, alm * c3], [0.0, 1.0 / a, alm * s3], [0.0, 0.0, 1.0 / c]]
        )

    def integral_map(q):
        s3, c3 = np.sin(q[2]), np.cos(q[2])
        return np.array([q[0] / a + alm * s3, q[1] / a - alm * c3, q[2] / c])

    def factor_jac(q):
        s3, c3 = np.sin(q[2]), np.cos(q[2])
        d = np.zeros((3, 3, 3))
        d[2][0, 2] = b * s3
        d[2][1, 2] = -b * c3
        return d

    friction = FrictionSpec(np.asarray(p.friction, float), np.asarray(p.known_mask, bool))
    return MechanicalModel(
        n=3,
        m=2,
        minv=minv,
        potential=lambda q: mgl * (1.0 - np.cos(q[2])),
        grad_potential=lambda q: np.array([0.0, 0.0, mgl * np.sin(q[2])]),
        input_matrix=lambda q: G,
        factor=factor,
        factor_inv=factor_inv,
        friction=friction,
        integral_map=integral_map,
        zrs=True,
        factor_jac=factor_jac,
        lip_factor_inv=alm,
        name="spider-crane",
    )


def make_spider_crane_cholesky(params: SpiderCraneParams = SpiderCraneParams()) -> MechanicalModel:
    """Spider crane on the lower-triangular Cholesky factor of the same M^-1.

    That factor's columns do not commute, so this model has no integral map
    and fails the structural checks; it exists to demonstrate that the
    factor choice matters.
    """
    base = make_spider_crane(params)

    def factor(q):
        return np.linalg.cholesky(base.minv(q))

    friction = FrictionSpec(np.asarray(params.friction, float), np.asarray(params.known_mask, bool))
    return MechanicalModel(
        n=3,
        m=2,
        minv=base.minv,
        potential=base.potential,
        grad_potential=base.grad_potential,
        input_matrix=base.input_matrix,
        factor=factor,
        factor_inv=None,
        friction=friction,
        integral_map=None,
        zrs=False,
        name="spider-crane-cholesky",
    )


def build_named_model(name: str, **kwargs) -> MechanicalModel:
    """Factory dispatch used by the CLI configuration layer."""
    if name == "constant":
        return make_constant_inertia(**kwargs)
    if name == "manipulator":
        return make_planar_manipulator(ManipulatorParams(**kwargs))
    if name == "spider-crane":
        return make_spider_crane(SpiderCraneParams(**kwargs))
    if name == "spider-crane-cholesky":
        return make_spider_crane_cholesky(SpiderCraneParams(**kwargs))
    raise ModelError(f"unknown model name: {name!r}")
