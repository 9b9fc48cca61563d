"""Time-domain simulation: nonlinear attitude dynamics and linear Monte Carlo runs.

The nonlinear model couples the rigid-body quaternion dynamics with reaction
wheels (torque and momentum saturation) and, optionally, the linear flexible
modes attached through the inertia square root:

    [[J, J^1/2 L], [L' J^1/2, I]] [wdot; etadd] =
        [-w x (J w + h) - T + T_ext;  -2 Z Om etad - Om^2 eta]
    hdot = T,    qdot = 1/2 [[-w^x, w], [-w', 0]] q

``T`` is the torque on the wheels; the body feels ``-T``.  The quaternion is
renormalized at every output step.  Integration uses the same adaptive
4/5-order scheme and tolerances as the analysis oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .benchmark import PhysicalData, default_physical_data
from .errors import BlowUp, StructureMismatch
from .uss import SampledSystem

__all__ = [
    "SatState",
    "NonlinearSatModel",
    "Trajectory",
    "simulate_nonlinear",
    "simulate_linear",
    "saturate",
]

OMEGA_BLOWUP = 1e3


def saturate(x, limit: float) -> np.ndarray:
    """Symmetric saturation; idempotent by construction."""
    return np.clip(x, -limit, limit)


@dataclass
class SatState:
    """Satellite state: body rate, attitude quaternion, wheel momenta, flex modes."""

    omega: np.ndarray
    q: np.ndarray
    h: np.ndarray
    eta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    etad: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float).reshape(3)
        self.q = np.asarray(self.q, dtype=float).reshape(4)
        self.h = np.asarray(self.h, dtype=float).reshape(3)
        self.eta = np.asarray(self.eta, dtype=float).ravel()
        self.etad = np.asarray(self.etad, dtype=float).ravel()
        if self.eta.shape != self.etad.shape:
            raise StructureMismatch("eta and etad must have matching shapes")
        n = np.linalg.norm(self.q)
        if not 0.9 < n < 1.1:
            raise StructureMismatch("quaternion must be near unit norm")
        self.q = self.q / n

    def pack(self) -> np.ndarray:
        return np.concatenate([self.omega, self.q, self.h, self.eta, self.etad])

    @classmethod
    def unpack(cls, x: np.ndarray, n_modes: int) -> "SatState":
        return cls(x[0:3], x[3:7], x[7:10],
                   x[10:10 + n_modes], x[10 + n_modes:10 + 2 * n_modes])

    @classmethod
    def rest(cls, n_modes: int = 0) -> "SatState":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(3),
                   np.zeros(n_modes), np.zeros(n_modes))


def _cross_mat(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


@dataclass
class NonlinearSatModel:
    """Physical data of one nonlinear simulation scenario.

    ``coupling`` may be empty (rigid body only).  ``t_ext`` is an optional
    external disturbance torque, callable t -> (3,).
    """

    j: np.ndarray
    coupling: np.ndarray = field(default_factory=lambda: np.zeros((3, 0)))
    omega_flex: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zeta_flex: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sat_torque: float = 5e-3
    sat_momentum: float = 0.12
    t_ext: object = None

    def __post_init__(self):
        self.j = np.asarray(self.j, dtype=float).reshape(3, 3)
        self.coupling = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        if self.coupling.size == 0:
            self.coupling = np.zeros((3, 0))
        if self.coupling.shape[0] != 3:
            raise StructureMismatch("coupling must have three rows")
        self.omega_flex = np.asarray(self.omega_flex, dtype=float).ravel()
        self.zeta_flex = np.asarray(self.zeta_flex, dtype=float).ravel()
        k = self.coupling.shape[1]
        if len(self.omega_flex) != k or len(self.zeta_flex) != k:
            raise StructureMismatch("flex parameter lengths must match coupling columns")
        w, v = np.linalg.eigh(self.j)
        if w.min() <= 0:
            raise StructureMismatch("inertia must be positive definite")
        self._root_j = (v * np.sqrt(w)) @ v.T
        mass = np.block([
            [self.j, self._root_j @ self.coupling],
            [self.coupling.T @ self._root_j, np.eye(k)],
        ])
        self._mass = mass
        if np.linalg.eigvalsh(mass).min() <= 0:
            raise StructureMismatch("coupled mass matrix must be positive definite")

    @property
    def n_modes(self) -> int:
        return self.coupling.shape[1]

    @classmethod
    def from_physical(cls, phys: PhysicalData | None = None,
                      omega_flex=None, zeta_flex=None, j=None,
                      appendices=(1, 2, 3, 4)) -> "NonlinearSatModel":
        """Build from benchmark data at given (or midpoint) flexible parameters."""
        phys = phys or default_physical_data()
        cols = []
        for k in appendices:
            cols += [2 * (k - 1), 2 * (k - 1) + 1]
        coupling = phys.coupling[:, cols]
        n_modes = coupling.shape[1]
        if omega_flex is None:
            omega_flex = np.full(n_modes, 0.5 * sum(phys.omega_interval))
        if zeta_flex is None:
            zeta_flex = np.full(n_modes, 0.5 * sum(phys.zeta_interval))
        return cls(
            j=phys.j_nominal if j is None else j,
            coupling=coupling,
            omega_flex=np.broadcast_to(np.asarray(omega_flex, float), (n_modes,)),
            zeta_flex=np.broadcast_to(np.asarray(zeta_flex, float), (n_modes,)),
            sat_torque=phys.sat_torque,
            sat_momentum=phys.sat_momentum,
        )


@dataclass
class Trajectory:
    """Sampled trajectory on a uniform output grid."""

    t: np.ndarray
    states: np.ndarray          # one state row per output instant
    outputs: np.ndarray | None = None

    def column(self, idx: int) -> np.ndarray:
        return self.states[:, idx]


def _wheel_torque(model: NonlinearSatModel, u_cmd: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Wheel torque realizing the commanded body torque, with both saturations.

    The commanded torque saturates at the torque limit; a wheel at momentum
    saturation cannot accelerate further, which leaves the body unactuated
    on that axis in the outward direction.
    """
    t_cmd = saturate(-np.asarray(u_cmd, dtype=float).reshape(3), model.sat_torque)
    blocked = (np.abs(h) >= model.sat_momentum) & (np.sign(t_cmd) == np.sign(h))
    return np.where(blocked, 0.0, t_cmd)


def simulate_nonlinear(model: NonlinearSatModel, initial: SatState, control_law,
                       t_final: float, dt_out: float = 0.25,
                       rtol: float = 1e-7, atol: float = 1e-9) -> Trajectory:
    """Integrate the nonlinear attitude dynamics under a feedback law.

    ``control_law(t, state) -> (3,)`` returns the commanded body torque; pass
    ``None`` for free motion.  Raises :class:`BlowUp` when the body rate
    exceeds 1e3 rad/s.
    """
    k = model.n_modes
    if initial.eta.size != k:
        raise StructureMismatch("initial state flex dimension does not match the model")
    omgs = np.diag(model.omega_flex)
    zets = np.diag(model.zeta_flex)
    stiff = omgs @ omgs
    damp = 2.0 * zets @ omgs
    root_l = model._root_j @ model.coupling

    def rhs(t, x):
        st = SatState.unpack(x, k)
        u_cmd = np.zeros(3) if control_law is None else np.asarray(
            control_law(t, st), dtype=float).reshape(3)
        torque_w = _wheel_torque(model, u_cmd, st.h)
        t_ext = np.zeros(3) if model.t_ext is None else np.asarray(
            model.t_ext(t), dtype=float).reshape(3)
        rigid = -_cross_mat(st.omega) @ (model.j @ st.omega + st.h) - torque_w + t_ext
        if k:
            flex = -damp @ st.etad - stiff @ st.eta
            acc = np.linalg.solve(model._mass, np.concatenate([rigid, flex]))
            wdot, etadd = acc[:3], acc[3:]
        else:
            wdot = np.linalg.solve(model.j, rigid)
            etadd = np.zeros(0)
        qdot = 0.5 * np.concatenate([
            -_cross_mat(st.omega) @ st.q[:3] + st.q[3] * st.omega,
            [-st.omega @ st.q[:3]],
        ])
        return np.concatenate([wdot, qdot, torque_w, st.etad, etadd])

    n_steps = int(round(t_final / dt_out))
    ts = [0.0]
    rows = [initial.pack()]
    x = initial.pack()
    for i in range(n_steps):
        t0, t1 = i * dt_out, (i + 1) * dt_out
        sol = scipy.integrate.solve_ivp(rhs, (t0, t1), x, method="RK45",
                                        rtol=rtol, atol=atol)
        if not sol.success:
            raise BlowUp(f"integration failed at t={t0}: {sol.message}")
        x = sol.y[:, -1].copy()
        # renormalize the quaternion and clamp wheel momenta once per step
        x[3:7] /= np.linalg.norm(x[3:7])
        x[7:10] = saturate(x[7:10], model.sat_momentum)
        if np.linalg.norm(x[0:3]) > OMEGA_BLOWUP:
            raise BlowUp(f"body rate exceeded {OMEGA_BLOWUP} rad/s at t={t1}")
        ts.append(t1)
        rows.append(x.copy())
    return Trajectory(np.asarray(ts), np.vstack(rows))


def simulate_linear(system: SampledSystem, x0=None, impulse_column: int | None = None,
                    t_final: float = 200.0, dt_out: float = 0.1,
                    rtol: float = 1e-7, atol: float = 1e-9) -> Trajectory:
    """Free response of a closed-loop sample from x0 or an impulse column.

    Outputs are the system's z channel sampled on the same grid.
    """
    if x0 is None:
        if impulse_column is None:
            raise StructureMismatch("need x0 or an impulse column")
        x0 = system.b_w[:, impulse_column]
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != system.n:
        raise StructureMismatch("x0 dimension mismatch")
    ts = np.arange(0.0, t_final + 0.5 * dt_out, dt_out)
    sol = scipy.integrate.solve_ivp(lambda t, x: system.a @ x, (0.0, float(ts[-1])),
                                    x0, method="RK45", rtol=rtol, atol=atol,
                                    t_eval=ts, dense_output=False)
    states = sol.y.T
    outputs = states @ system.c_z.T if system.c_z.size else None
    return Trajectory(np.asarray(sol.t), states, outputs)
