"""Generator for every variant of the uncertain flexible-satellite benchmark.

The physical model is a rigid body with up to four flexible appendices::

    [[J, J^1/2 L], [L' J^1/2, I]] [thdd; etadd] + [[0, 0], [2 Z Om, Om^2]] [etad; eta] = [I; 0] u

with uncertain inertia ``J`` (diagonal entries within 30 percent, off-diagonal
within +-3), and uncertain per-appendix frequencies ``om_i`` and dampings
``zeta_i`` in fixed intervals.  The module produces:

* the stiffness row block ``[2 Z Om, Om^2]`` as the minimal product LFT
  (frequency uncertainty repeated twice, damping once);
* the mass matrix block as an LFT that models the square root of the
  diagonal inertia exactly (each diagonal scalar repeated twice) plus the
  cross-inertia part (each off-diagonal scalar repeated twice), or
  alternatively through a symmetric matrix deviation of ``J^1/2``
  constrained to a quadratic set fitted over all inertia vertices;
* the descriptor model ``E(dE) Xdot = A(dA) X + B u`` and its conversion to
  a state space in feedback with ``diag(dE, dA)``;
* the augmented state-feedback design model: per-axis output integrators, a
  pseudo-integrator of the input modeling the reaction-wheel speed, a
  two-state wheel dynamics block, and the two performance channels
  (input disturbance to pointing error, initial-condition injection to
  wheel speed).

All generation functions are pure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    MissingSqrtSet,
    NonPsdVertex,
    SingularMass,
    StructureMismatch,
)
from .lft import (
    Interval,
    Lft,
    NormBounded,
    ScalarRepeated,
    SymmetricSet,
    UncertaintyStructure,
    constant_lft,
    diag_concat,
    lft_affine,
    normalize_interval,
    star_compose,
)
from .sdp import LinMatIneq, SdpProblem, Term, solve
from .uss import UncertainStateSpace

__all__ = [
    "BenchmarkConfig",
    "PhysicalData",
    "default_physical_data",
    "SqrtSetFit",
    "build_stiffness_lft",
    "build_inertia_lft",
    "fit_inertia_sqrt_set",
    "build_descriptor",
    "descriptor_to_statespace",
    "build_design_model",
    "mode_coupling",
]

J_NOMINAL = np.array([
    [31.38, -1.11, -0.26],
    [-1.11, 21.19, -0.78],
    [-0.26, -0.78, 35.70],
])

OMEGA_INTERVAL = (0.2 * 2.0 * math.pi, 0.6 * 2.0 * math.pi)
ZETA_INTERVAL = (5e-4, 5e-3)
JDIAG_REL = 0.30
JOFF_ABS = 3.0


def _default_coupling() -> np.ndarray:
    """Default cross-influence matrix L (3 x 8), one 3x2 block per appendix.

    The original benchmark data does not publish L, so a synthetic default is
    shipped: appendix k sits at azimuth 45 + 90k degrees, its torsion/bending
    pair couples into the two transverse axes through the rotation by that
    azimuth and into the third axis through a constant row.  Blocks are
    normalized to unit Frobenius norm and globally scaled by L_SCALE, which
    keeps ||L||_2 < 1 so the coupled mass matrix stays positive definite.
    """
    blocks = []
    for k in range(4):
        phi = math.radians(45.0 + 90.0 * k)
        raw = np.array([
            [math.cos(phi), -math.sin(phi)],
            [math.sin(phi), math.cos(phi)],
            [0.5, 0.5],
        ])
        blocks.append(raw / np.linalg.norm(raw))
    return L_SCALE * np.hstack(blocks)


#: Global scale of the default coupling matrix; calibrated so the single-axis
#: single-appendix deterministic design lands near the reference levels.
L_SCALE = 0.35

#: Wheel servo H(s) = 1 / (1 + s/WHEEL_BW)^2.  The bandwidth sits inside the
#: design pole band (-10, -1e-4), as the band constrains every closed-loop
#: pole including the wheel pair.
WHEEL_BW = 5.0

#: Moment of inertia of one reaction wheel (kg m^2); the wheel-speed model
#: state integrates commanded torque divided by this, so the monitored
#: output is a speed in rad/s.  Calibrated so the single-axis
#: single-appendix deterministic design certifies a wheel-speed peak near
#: the reference level of about 22.
WHEEL_INERTIA = 0.015

PSEUDO_POLE = 1e-3
SAT_TORQUE = 5e-3
SAT_MOMENTUM = 0.12
W2_RATE = 0.08 * math.pi / 180.0     # 1.4e-3 rad/s initial angular rate
W2_ANGLE = 15.0 * math.pi / 180.0    # 0.262 rad initial deviation


@dataclass(frozen=True)
class PhysicalData:
    """Benchmark constants; override fields to study variations."""

    j_nominal: np.ndarray = field(default_factory=lambda: J_NOMINAL.copy())
    coupling: np.ndarray = field(default_factory=_default_coupling)
    omega_interval: tuple[float, float] = OMEGA_INTERVAL
    zeta_interval: tuple[float, float] = ZETA_INTERVAL
    jdiag_rel: float = JDIAG_REL
    joff_abs: float = JOFF_ABS
    sat_torque: float = SAT_TORQUE
    sat_momentum: float = SAT_MOMENTUM
    pseudo_pole: float = PSEUDO_POLE
    wheel_bw: float = WHEEL_BW
    wheel_inertia: float = WHEEL_INERTIA
    w1_weight: float = 1.0
    w2_rate: float = W2_RATE
    w2_angle: float = W2_ANGLE

    def __post_init__(self):
        j = np.atleast_2d(np.asarray(self.j_nominal, dtype=float))
        if not np.allclose(j, j.T) or np.linalg.eigvalsh(j).min() <= 0:
            raise StructureMismatch("nominal inertia must be symmetric positive definite")
        l = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        if l.shape != (3, 8):
            raise StructureMismatch("coupling matrix must be 3 x 8 (two columns per appendix)")
        if np.linalg.norm(l, 2) >= 1.0:
            raise StructureMismatch("coupling matrix must have spectral norm < 1")
        object.__setattr__(self, "j_nominal", j)
        object.__setattr__(self, "coupling", l)

    def wheel_realization(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A_H, B_H, C_H) of the wheel servo H(s) = bw^2 / (s + bw)^2.

        The commanded torque reaches the body through H (unit DC gain, no
        zeros), so no body integrator is cancelled; the wheel-speed tap is a
        separate pseudo-integrator state.
        """
        bw = self.wheel_bw
        a = np.array([[-bw, bw], [0.0, -bw]])
        b = np.array([[0.0], [bw]])
        c = np.array([[1.0, 0.0]])
        return a, b, c


def default_physical_data() -> PhysicalData:
    return PhysicalData()


@dataclass(frozen=True)
class BenchmarkConfig:
    """Selection of axes, appendices, model and uncertainty flavor."""

    axes: tuple[int, ...] = (1, 2, 3)
    appendices: tuple[int, ...] = (1, 2, 3, 4)
    model_type: int = 1
    uncertainty_type: int = 1
    rwheels: int = 1
    perf_channel: int = 0

    def __post_init__(self):
        axes = tuple(sorted(set(int(a) for a in self.axes)))
        apps = tuple(sorted(set(int(a) for a in self.appendices)))
        if not axes or not set(axes) <= {1, 2, 3}:
            raise StructureMismatch(f"axes must be a non-empty subset of 1..3, got {self.axes}")
        if not apps or not set(apps) <= {1, 2, 3, 4}:
            raise StructureMismatch(
                f"appendices must be a non-empty subset of 1..4, got {self.appendices}")
        if self.model_type not in (1, 2):
            raise StructureMismatch("model_type must be 1 or 2")
        if self.uncertainty_type not in (1, 2, 3):
            raise StructureMismatch("uncertainty_type must be 1, 2 or 3")
        if self.rwheels not in (0, 1):
            raise StructureMismatch("rwheels must be 0 or 1")
        if self.perf_channel not in (0, 1, 2):
            raise StructureMismatch("perf_channel must be 0, 1 or 2")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "appendices", apps)

    @property
    def n_axes(self) -> int:
        return len(self.axes)

    @property
    def n_apps(self) -> int:
        return len(self.appendices)

    def with_perf(self, perf_channel: int) -> "BenchmarkConfig":
        return replace(self, perf_channel=perf_channel)

    def to_dict(self) -> dict:
        return {
            "axes": list(self.axes),
            "appendices": list(self.appendices),
            "model_type": self.model_type,
            "uncertainty_type": self.uncertainty_type,
            "rwheels": self.rwheels,
            "perf_channel": self.perf_channel,
        }


def _flex_bound(config: BenchmarkConfig):
    return NormBounded() if config.uncertainty_type == 1 else Interval(-1.0, 1.0)


def _inertia_bound(config: BenchmarkConfig):
    return NormBounded() if config.uncertainty_type in (1, 3) else Interval(-1.0, 1.0)


def mode_coupling(config: BenchmarkConfig, phys: PhysicalData) -> tuple[np.ndarray, list[str]]:
    """Reduced coupling matrix (n_axes x n_modes) and per-mode name tags.

    model_type 1 with several axes keeps the two modes of each appendix.
    With a single axis the torsion/bending pair of an appendix shares its
    parameters and is combined into one mode of coupling gain equal to the
    pair's row norm.  model_type 2 shares one (omega, zeta) across all
    appendices, so the mode space collapses onto the axes: an SVD of the
    selected coupling rows keeps one mode per nonzero singular direction.
    """
    ax = [a - 1 for a in config.axes]
    cols = []
    for k in config.appendices:
        cols += [2 * (k - 1), 2 * (k - 1) + 1]
    l_sub = phys.coupling[np.ix_(ax, cols)]
    if config.model_type == 2:
        u, s, _ = np.linalg.svd(l_sub)
        keep = s > 1e-12 * max(1.0, s[0])
        n_m = int(np.count_nonzero(keep))
        l_red = u[:, :n_m] * s[:n_m]
        return l_red, [f"mode{i + 1}" for i in range(n_m)]
    if config.n_axes == 1:
        gains = []
        for i, k in enumerate(config.appendices):
            gains.append(np.linalg.norm(l_sub[0, 2 * i:2 * i + 2]))
        return np.array([gains]), [f"app{k}" for k in config.appendices]
    return l_sub, [f"app{k}" for k in config.appendices for _ in range(2)]


def _flex_blocks(config: BenchmarkConfig, l_red: np.ndarray, kind: str) -> list[ScalarRepeated]:
    """Channel blocks of the frequency (kind='omega') or damping (kind='zeta') matrix."""
    bound = _flex_bound(config)
    n_m = l_red.shape[1]
    if config.model_type == 2:
        return [ScalarRepeated(kind, n_m, bound)]
    reps = 1 if config.n_axes == 1 else 2
    return [ScalarRepeated(f"{kind}{k}", reps, bound) for k in config.appendices]


def build_stiffness_lft(config: BenchmarkConfig, phys: PhysicalData | None = None) -> Lft:
    """Minimal LFT of the row block [2 Z Om, Om^2] mapping (etad; eta).

    Built as the product Om * [2Z, Om], which shares the frequency channel
    between both occurrences: the channel is (d_Om, d_Z, d_Om), dimension
    three times the mode count.
    """
    phys = phys or default_physical_data()
    l_red, _ = mode_coupling(config, phys)
    n_m = l_red.shape[1]
    om_a, om_b = normalize_interval(*phys.omega_interval)
    ze_a, ze_b = normalize_interval(*phys.zeta_interval)
    eye = np.eye(n_m)
    om_blocks = _flex_blocks(config, l_red, "omega")
    ze_blocks = _flex_blocks(config, l_red, "zeta")
    omega = Lft(np.zeros((n_m, n_m)), eye, om_b * eye, om_a * eye,
                UncertaintyStructure(om_blocks))
    two_zeta = Lft(np.zeros((n_m, n_m)), eye, 2.0 * ze_b * eye, 2.0 * ze_a * eye,
                   UncertaintyStructure(ze_blocks))
    row = lft_affine(np.hstack([eye, eye]), diag_concat([two_zeta, omega]),
                     np.eye(2 * n_m))
    return star_compose(omega, row)


def _axis_pairs(axes: tuple[int, ...]) -> list[tuple[int, int]]:
    return [(i, j) for i, j in itertools.combinations(range(len(axes)), 2)]


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    if w.min() <= 0.0:
        raise NonPsdVertex("matrix square root of a non positive definite matrix")
    return (v * np.sqrt(w)) @ v.T


@dataclass(frozen=True)
class SqrtSetFit:
    """Fitted quadratic set for the symmetric square-root deviation of J."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    delta_o: np.ndarray
    objective: float
    max_vertex_residual: float

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def inertia_vertices(axes: tuple[int, ...], phys: PhysicalData) -> list[np.ndarray]:
    """All 2^(diag + offdiag) extreme inertia matrices over the selected axes."""
    ax = [a - 1 for a in axes]
    j_o = phys.j_nominal[np.ix_(ax, ax)]
    n = len(ax)
    pairs = _axis_pairs(axes)
    n_unc = n + len(pairs)
    out = []
    for code in itertools.product((-1.0, 1.0), repeat=n_unc):
        j = j_o.copy()
        for i in range(n):
            j[i, i] = j_o[i, i] * (1.0 + phys.jdiag_rel * code[i])
        for p, (i, k) in enumerate(pairs):
            j[i, k] = j_o[i, k] + phys.joff_abs * code[n + p]
            j[k, i] = j[i, k]
        out.append(j)
    return out


def fit_inertia_sqrt_set(axes: tuple[int, ...] = (1, 2, 3),
                         phys: PhysicalData | None = None,
                         solver: str | None = None) -> SqrtSetFit:
    """Fit the smallest quadratic set containing every vertex square-root deviation.

    The deviations are ``Dv = sqrt(Jv) - sqrt(Jo)`` over all inertia vertices;
    the set center is their arithmetic mean.  ``(X, Z)`` minimize
    ``Tr(Do Z Do - X)`` subject to ``Z >= I`` and one containment LMI per
    vertex; ``Y`` is the symmetrized ``-(Do Z + Z Do)/2``, which makes each
    containment constraint exactly the membership form of the returned set.
    """
    phys = phys or default_physical_data()
    verts = inertia_vertices(tuple(sorted(axes)), phys)
    ax = [a - 1 for a in sorted(axes)]
    j_o = phys.j_nominal[np.ix_(ax, ax)]
    root_o = _sqrtm_psd(j_o)
    devs = [_sqrtm_psd(v) - root_o for v in verts]
    delta_o = sum(devs) / len(devs)
    n = j_o.shape[0]
    prob = SdpProblem()
    x = prob.add_variable("X", "symmetric", n)
    z = prob.add_variable("Z", "symmetric", n)
    eye = np.eye(n)
    prob.add_constraint(LinMatIneq(-eye, [Term(eye, z, eye)], ">=", label="Z >= I"))
    for k, dv in enumerate(devs):
        terms = [
            Term(eye, x, eye),
            Term(-0.5 * delta_o, z, dv),
            Term(-0.5 * eye, z, delta_o @ dv),
            Term(-0.5 * dv @ delta_o, z, eye),
            Term(-0.5 * dv, z, delta_o),
            Term(dv, z, dv),
        ]
        prob.add_constraint(LinMatIneq(1e-9 * eye, terms, "<=", label=f"vertex {k}"))
    prob.add_objective(z, delta_o @ delta_o)
    prob.add_objective(x, -eye)
    sol = solve(prob, solver=solver)
    if sol.status != "optimal":
        raise MissingSqrtSet(f"square-root set fit did not solve: {sol.status}")
    x_v, z_v = sol["X"], sol["Z"]
    y_v = -0.5 * (delta_o @ z_v + z_v @ delta_o)
    resid = max(
        float(np.linalg.eigvalsh(x_v + y_v @ d + d @ y_v + d @ z_v @ d).max())
        for d in devs
    )
    return SqrtSetFit(x_v, y_v, z_v, delta_o, float(sol.objective), resid)


def _perfect_shuffle(n: int, k: int) -> np.ndarray:
    """Permutation with P (I_k (x) M) P' = M (x) I_k for n x n blocks M."""
    p = np.zeros((n * k, n * k))
    for s in range(k):
        for i in range(n):
            p[k * i + s, n * s + i] = 1.0
    return p


def build_inertia_lft(config: BenchmarkConfig, phys: PhysicalData | None = None,
                      sqrt_set: SqrtSetFit | None = None,
                      symmetric: bool = False) -> Lft:
    """LFT of the mass block [[J, J^1/2 L], [L' J^1/2, I]].

    The default (scalar) variant models the square root of the diagonal
    inertia exactly with each diagonal scalar repeated twice, and the
    off-diagonal part with each cross scalar repeated twice; the square root
    of the full J is approximated by the square root of its diagonal.  With
    ``symmetric=True`` a fitted quadratic set must be supplied and J is
    modeled exactly as ``(Jo^1/2 + Delta)^2`` with the symmetric ``Delta``
    repeated as ``Delta (x) I_2``.
    """
    phys = phys or default_physical_data()
    ax = [a - 1 for a in config.axes]
    n = len(ax)
    l_red, _ = mode_coupling(config, phys)
    n_m = l_red.shape[1]
    j_o = phys.j_nominal[np.ix_(ax, ax)]
    if symmetric:
        if sqrt_set is None:
            raise MissingSqrtSet("symmetric inertia modeling needs a fitted (X, Y, Z) set")
        if sqrt_set.dim != n:
            raise StructureMismatch("fitted set dimension does not match the axis count")
        root_o = _sqrtm_psd(j_o)
        zero = np.zeros((n, n))
        eye = np.eye(n)
        m_d = np.block([[zero, eye], [zero, zero]])
        m_c = np.block([[root_o, l_red], [eye, np.zeros((n, n_m))]])
        m_b = np.block([[eye, root_o], [np.zeros((n_m, n)), l_red.T]])
        m_a = np.block([[j_o, root_o @ l_red], [l_red.T @ root_o, np.eye(n_m)]])
        shuffle = _perfect_shuffle(n, 2)
        block = SymmetricSet("DeltaJ", n, 2, sqrt_set.x, sqrt_set.y, sqrt_set.z)
        return Lft(shuffle @ m_d @ shuffle.T, shuffle @ m_c, m_b @ shuffle.T, m_a,
                   UncertaintyStructure([block]))
    bound = _inertia_bound(config)
    jd = np.diag(j_o)
    j2a = np.diag(0.5 * (np.sqrt((1.0 + phys.jdiag_rel) * jd)
                         + np.sqrt((1.0 - phys.jdiag_rel) * jd)))
    j2b = np.diag(0.5 * (np.sqrt((1.0 + phys.jdiag_rel) * jd)
                         - np.sqrt((1.0 - phys.jdiag_rel) * jd)))
    pairs = _axis_pairs(config.axes)
    npairs = len(pairs)
    j1a = np.zeros((n, n))
    j1b = np.zeros((n, npairs))
    j1c = np.zeros((npairs, n))
    pair_names = []
    for p, (i, k) in enumerate(pairs):
        j1a[i, k] = j_o[i, k]
        j1b[i, p] = phys.joff_abs
        j1c[p, k] = 1.0
        pair_names.append(f"J{config.axes[i]}{config.axes[k]}")
    diag_names = [f"J{a}{a}" for a in config.axes]
    q = 2 * npairs + 2 * n
    m_d = np.zeros((q, q))
    m_d[2 * npairs:2 * npairs + n, 2 * npairs + n:] = j2b @ j2b
    m_c = np.zeros((q, n + n_m))
    m_c[:npairs, :n] = j1c
    m_c[npairs:2 * npairs, :n] = j1b.T
    m_c[2 * npairs:2 * npairs + n, :n] = j2b @ j2a
    m_c[2 * npairs:2 * npairs + n, n:] = j2b @ l_red
    m_c[2 * npairs + n:, :n] = np.eye(n)
    m_b = np.zeros((n + n_m, q))
    m_b[:n, :npairs] = j1b
    m_b[:n, npairs:2 * npairs] = j1c.T
    m_b[:n, 2 * npairs:2 * npairs + n] = np.eye(n)
    m_b[:n, 2 * npairs + n:] = j2a @ j2b
    m_b[n:, 2 * npairs + n:] = l_red.T @ j2b
    m_a = np.block([
        [j1a + j1a.T + j2a @ j2a, j2a @ l_red],
        [l_red.T @ j2a, np.eye(n_m)],
    ])
    blocks = (
        [ScalarRepeated(nm, 1, bound) for nm in pair_names] * 2
        + [ScalarRepeated(nm, 1, bound) for nm in diag_names] * 2
    )
    return Lft(m_d, m_c, m_b, m_a, UncertaintyStructure(blocks))


def build_descriptor(config: BenchmarkConfig, phys: PhysicalData | None = None,
                     sqrt_set: SqrtSetFit | None = None, symmetric: bool = False
                     ) -> tuple[Lft, Lft, np.ndarray]:
    """Descriptor pair E(dE) Xdot = A(dA) X + B u over X = (thd, etad, th, eta)."""
    phys = phys or default_physical_data()
    l_red, _ = mode_coupling(config, phys)
    n_ax, n_m = l_red.shape
    half = n_ax + n_m
    n = 2 * half
    mass = build_inertia_lft(config, phys, sqrt_set=sqrt_set, symmetric=symmetric)
    e_lft = diag_concat([mass, constant_lft(np.eye(half))])
    stiff = build_stiffness_lft(config, phys)
    a_base = np.zeros((n, n))
    a_base[half:, :half] = np.eye(half)
    s_row = np.zeros((n, n_m))
    s_row[n_ax:half, :] = np.eye(n_m)
    s_col = np.zeros((2 * n_m, n))
    s_col[:n_m, n_ax:half] = np.eye(n_m)
    s_col[n_m:, half + n_ax:] = np.eye(n_m)
    a_lft = lft_affine(-s_row, stiff, s_col, offset=a_base)
    b = np.zeros((n, n_ax))
    b[:n_ax, :] = np.eye(n_ax)
    return e_lft, a_lft, b


def descriptor_to_statespace(e_lft: Lft, a_lft: Lft, b: np.ndarray,
                             state_names: list[str] | None = None) -> UncertainStateSpace:
    """Invert the nominal mass matrix and route both channels into one feedback.

    Follows the explicit conversion: with Ea invertible the dynamics read
    ``Xdot = Ea^-1 Aa X + [Ea^-1 Eb, Ea^-1 Ab] w + Ea^-1 B u`` and the
    stacked channel output collects the E rows (sign-flipped) above the A
    rows, closed by ``w = diag(dE, dA) z``.
    """
    e_a = e_lft.m_a
    sv = np.linalg.svd(e_a, compute_uv=False)
    if sv.min() <= 1e-12 * sv.max():
        raise SingularMass("nominal mass matrix is singular to working precision")
    n = e_a.shape[0]
    qe, qa = e_lft.delta_dim, a_lft.delta_dim
    ei_aa = np.linalg.solve(e_a, a_lft.m_a)
    ei_eb = np.linalg.solve(e_a, e_lft.m_b)
    ei_ab = np.linalg.solve(e_a, a_lft.m_b)
    ei_b = np.linalg.solve(e_a, b)
    e_c, e_d = e_lft.m_c, e_lft.m_d
    a_c, a_d = a_lft.m_c, a_lft.m_d
    c_delta = np.vstack([-e_c @ ei_aa, a_c])
    d_dd = np.block([
        [e_d - e_c @ ei_eb, -e_c @ ei_ab],
        [np.zeros((qa, qe)), a_d],
    ])
    d_du = np.vstack([-e_c @ ei_b, np.zeros((qa, b.shape[1]))])
    structure = e_lft.structure.concat(a_lft.structure)
    return UncertainStateSpace(
        a=ei_aa,
        b_delta=np.hstack([ei_eb, ei_ab]),
        b_u=ei_b,
        c_delta=c_delta,
        d_dd=d_dd,
        d_du=d_du,
        structure=structure,
        state_names=state_names,
    )


def _plant_state_names(config: BenchmarkConfig, mode_tags: list[str]) -> list[str]:
    names = [f"thd{a}" for a in config.axes]
    names += [f"etad_{t}" for t in mode_tags]
    names += [f"th{a}" for a in config.axes]
    names += [f"eta_{t}" for t in mode_tags]
    return names


def build_plant(config: BenchmarkConfig, phys: PhysicalData | None = None,
                sqrt_set: SqrtSetFit | None = None, symmetric: bool = False
                ) -> UncertainStateSpace:
    """Unaugmented satellite plant with the uncertainty channel closed in feedback."""
    phys = phys or default_physical_data()
    _, tags = mode_coupling(config, phys)
    e_lft, a_lft, b = build_descriptor(config, phys, sqrt_set=sqrt_set, symmetric=symmetric)
    return descriptor_to_statespace(e_lft, a_lft, b, _plant_state_names(config, tags))


def build_design_model(config: BenchmarkConfig, phys: PhysicalData | None = None,
                       sqrt_set: SqrtSetFit | None = None, symmetric: bool = False
                       ) -> UncertainStateSpace:
    """Augmented state-feedback design model with the selected performance channel.

    State order: plant (thd, etad, th, eta), per-axis output integrators,
    then (if rwheels) per-axis wheel states (two each) and per-axis
    pseudo-integrator states modeling wheel speed.  A static gain over this
    state vector realizes the full gain structure: position, integral and
    rate gains, flexible-mode gains, the wheel-state gain pair and the
    wheel-speed gain.

    perf_channel 1 exposes a torque disturbance at the plant input against
    the pointing error; perf_channel 2 injects the worst-case initial
    condition (rate then angle, one column per axis) against the wheel-speed
    states.
    """
    phys = phys or default_physical_data()
    if config.perf_channel == 2 and not config.rwheels:
        raise StructureMismatch(
            "the wheel-speed performance channel needs rwheels=1")
    plant = build_plant(config, phys, sqrt_set=sqrt_set, symmetric=symmetric)
    n_ax = config.n_axes
    n_p = plant.n
    q = plant.q
    th_rows = np.zeros((n_ax, n_p))
    thd_rows = np.zeros((n_ax, n_p))
    half = n_p // 2
    for i in range(n_ax):
        thd_rows[i, i] = 1.0
        th_rows[i, half + i] = 1.0
    names = list(plant.state_names) + [f"int_th{a}" for a in config.axes]
    if config.rwheels:
        a_h, b_h, c_h = phys.wheel_realization()
        a_hb = np.kron(np.eye(n_ax), a_h)
        b_hb = np.kron(np.eye(n_ax), b_h)
        c_hb = np.kron(np.eye(n_ax), c_h)
        n = n_p + n_ax + 2 * n_ax + n_ax
        i_int = slice(n_p, n_p + n_ax)
        i_h = slice(n_p + n_ax, n_p + 3 * n_ax)
        i_w = slice(n_p + 3 * n_ax, n)
        a = np.zeros((n, n))
        a[:n_p, :n_p] = plant.a
        a[:n_p, i_h] = plant.b_u @ c_hb
        a[i_int, :n_p] = th_rows
        a[i_h, i_h] = a_hb
        a[i_w, i_w] = -phys.pseudo_pole * np.eye(n_ax)
        b_u = np.zeros((n, n_ax))
        b_u[i_h, :] = b_hb
        b_u[i_w, :] = np.eye(n_ax) / phys.wheel_inertia
        c_delta = np.zeros((q, n))
        c_delta[:, :n_p] = plant.c_delta
        c_delta[:, i_h] = plant.d_du @ c_hb
        d_du = np.zeros((q, n_ax))
        for a_idx in range(n_ax):
            names += [f"wheel{config.axes[a_idx]}_{j}" for j in (1, 2)]
        names += [f"wspeed{a}" for a in config.axes]
    else:
        n = n_p + n_ax
        i_int = slice(n_p, n)
        a = np.zeros((n, n))
        a[:n_p, :n_p] = plant.a
        a[i_int, :n_p] = th_rows
        b_u = np.zeros((n, n_ax))
        b_u[:n_p, :] = plant.b_u
        c_delta = np.zeros((q, n))
        c_delta[:, :n_p] = plant.c_delta
        d_du = plant.d_du
    b_w = None
    c_z = None
    d_dw = None
    out_names = None
    if config.perf_channel == 1:
        b_w = np.zeros((n, n_ax))
        b_w[:n_p, :] = plant.b_u * phys.w1_weight
        d_dw = plant.d_du * phys.w1_weight
        c_z = np.zeros((n_ax, n))
        c_z[:, :n_p] = th_rows
        out_names = [f"th{a}" for a in config.axes]
    elif config.perf_channel == 2:
        b_w = np.zeros((n, n_ax))
        for i in range(n_ax):
            b_w[i, i] = phys.w2_rate
            b_w[half + i, i] = phys.w2_angle
        c_z = np.zeros((n_ax, n))
        c_z[:, i_w] = np.eye(n_ax)
        out_names = [f"wspeed{a}" for a in config.axes]
    return UncertainStateSpace(
        a=a, b_delta=np.vstack([plant.b_delta,
                                np.zeros((n - n_p, q))]) if q else None,
        b_u=b_u, b_w=b_w,
        c_delta=c_delta, c_z=c_z,
        d_dd=plant.d_dd, d_du=d_du, d_dw=d_dw,
        structure=plant.structure,
        state_names=names,
        input_names=[f"uc{a}" for a in config.axes],
        output_names=out_names,
    )


def design_models(config: BenchmarkConfig, phys: PhysicalData | None = None
                  ) -> tuple[UncertainStateSpace, UncertainStateSpace, UncertainStateSpace]:
    """The three models used by a design: augmented, w1/z1 and w2/z2 variants."""
    phys = phys or default_physical_data()
    return (
        build_design_model(config.with_perf(0), phys),
        build_design_model(config.with_perf(1), phys),
        build_design_model(config.with_perf(2), phys),
    )
