"""Closed-loop robust performance analysis.

Deterministic upper bounds come from common-Lyapunov LMIs with quadratic
separators; randomized estimates come from Monte Carlo sampling with the
sample counts fixed by the log-over-log bound (worst-case estimation) or the
Chernoff bound (probability estimation).  Per-sample performance values are
computed by plain numeric oracles: Hamiltonian bisection for the H-infinity
norm and adaptive time integration for impulse peaks.

Per-sample oracles are pure functions of the sample index, so Monte Carlo
loops parallelize over indices without changing any result.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.optimize

from .design_lmis import (
    HalfPlane,
    assemble_an_dstability,
    assemble_an_hinf,
    assemble_an_i2p,
)
from .errors import Infeasible, SolverFailure, StructureMismatch
from .lft import Interval, ScalarRepeated, UncertaintyStructure
from .sampling import RandomizedSettings, sample_at, sample_size
from .sdp import LinMatIneq, SdpProblem, Term, solve
from .separators import make_separator
from .synthesis import _separator_kind, _split_sampled_names
from .uss import SampledSystem, UncertainStateSpace

__all__ = [
    "AnalysisResult",
    "close_loop",
    "analyze_deterministic",
    "worst_case_estimate",
    "verify_probability",
    "hinf_sample",
    "i2p_sample",
]

PERFORMANCES = ("hinf", "i2p", "stability")


@dataclass
class AnalysisResult:
    """Outcome of one analysis run.

    ``kind`` is 'deterministic bound', 'worst-case estimate' or 'probability
    estimate'; ``value`` is the bound / estimate (+inf when a deterministic
    certificate does not exist or a sample is unstable).
    """

    kind: str
    performance: str
    value: float
    sample_count: int = 0
    settings: dict = field(default_factory=dict)
    extremizer: dict | None = None
    per_sample: list | None = None
    status: str = "ok"
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "performance": self.performance,
            "value": self.value,
            "sample_count": self.sample_count,
            "settings": self.settings,
            "status": self.status,
            "wall_time": self.wall_time,
        }
        if self.extremizer is not None:
            out["extremizer"] = self.extremizer
        return out


def close_loop(plant: UncertainStateSpace, gain) -> UncertainStateSpace:
    """Substitute u = K x, keeping the uncertainty channel open."""
    return plant.with_feedback(np.atleast_2d(np.asarray(gain, dtype=float)))


def _analysis_state_scale(clsys: UncertainStateSpace) -> np.ndarray:
    """Per-state response peaks of the nominal closed loop, as preconditioner."""
    import scipy.integrate

    from .lft import DeltaSample

    nom = clsys.close_delta(DeltaSample.zero(clsys.structure))
    n = nom.n
    if np.max(np.linalg.eigvals(nom.a).real) >= 0.0:
        return np.ones(n)
    x0 = np.abs(nom.b_w).sum(axis=1) if clsys.nw else np.ones(n)
    if not np.any(x0):
        x0 = np.ones(n)
    rates = -np.linalg.eigvals(nom.a).real
    horizon = 5.0 / max(rates.min(), 1e-4)
    sol = scipy.integrate.solve_ivp(lambda t, x: nom.a @ x, (0.0, horizon), x0,
                                    rtol=1e-6, atol=1e-12, dense_output=True)
    ts = np.linspace(0.0, horizon, 4000)
    peaks = np.max(np.abs(sol.sol(ts)), axis=1)
    floor = max(peaks.max(), 1e-12)
    return np.maximum(peaks, 1e-4 * floor)


def analyze_deterministic(clsys: UncertainStateSpace, performance: str,
                          scalar_separator: str = "auto",
                          solver: str | None = None) -> AnalysisResult:
    """Common-Lyapunov robust upper bound on a closed-loop performance.

    Returns +inf (status 'infeasible') when no certificate of the requested
    kind exists, which mirrors an infinite upper bound.
    """
    if performance not in PERFORMANCES:
        raise StructureMismatch(f"unknown performance {performance!r}")
    t0 = time.perf_counter()
    clsys = clsys.rescaled(_analysis_state_scale(clsys))
    problem = SdpProblem()
    n = clsys.n
    p = problem.add_variable("P", "symmetric", n)
    scale = max(1.0, float(np.max(np.abs(clsys.a))))
    problem.add_constraint(LinMatIneq(-1e-8 * scale * np.eye(n),
                                      [Term(np.eye(n), p, np.eye(n))],
                                      ">=", label="P > 0"))
    # same flat-face tie-breaker as the design side
    problem.add_objective(p, 1e-6 * np.eye(n))
    kind = _separator_kind(clsys.structure, scalar_separator)
    factory = lambda s: make_separator(problem, s, kind)  # noqa: E731
    if performance == "stability":
        # normalize the homogeneous feasibility problem so the solver has a
        # well-posed target, and trust only solutions that verify
        problem.add_constraint(LinMatIneq(-np.eye(n), [Term(np.eye(n), p, np.eye(n))],
                                          ">=", label="P >= I"))
        assemble_an_dstability(problem, clsys, p, HalfPlane(0.0), factory)
        sol = solve(problem, solver=solver)
        ok = (sol.status in ("optimal", "inaccurate")
              and sol.max_violation(problem) <= 1e-6)
        return AnalysisResult("deterministic bound", performance,
                              0.0 if ok else math.inf,
                              settings={"separator": kind},
                              status="ok" if ok else "infeasible",
                              wall_time=time.perf_counter() - t0)
    g = problem.add_variable("gamma", "scalar")
    problem.add_objective(g, 1.0)
    if performance == "hinf":
        assemble_an_hinf(problem, clsys, p, g, factory)
    else:
        assemble_an_i2p(problem, clsys, p, g, factory)
    sol = solve(problem, solver=solver)
    if sol.status == "infeasible":
        return AnalysisResult("deterministic bound", performance, math.inf,
                              settings={"separator": kind}, status="infeasible",
                              wall_time=time.perf_counter() - t0)
    if sol.status not in ("optimal", "inaccurate"):
        raise SolverFailure(f"analysis solve failed: {sol.diagnostics}")
    if sol.max_violation(problem) > 1e-6:
        # an unconverged iterate certifies nothing
        return AnalysisResult("deterministic bound", performance, math.inf,
                              settings={"separator": kind},
                              status="infeasible", wall_time=time.perf_counter() - t0)
    value = float(np.atleast_1d(sol["gamma"])[0])
    if performance == "i2p":
        value = math.sqrt(max(value, 0.0))
    return AnalysisResult("deterministic bound", performance, value,
                          settings={"separator": kind, "solver_status": sol.status},
                          wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# per-sample oracles


def _is_hurwitz(a: np.ndarray) -> bool:
    return a.size == 0 or float(np.max(np.linalg.eigvals(a).real)) < 0.0


def _sigma_max_response(a, b, c, d, w: float) -> float:
    n = a.shape[0]
    g = c @ np.linalg.solve(1j * w * np.eye(n) - a, b) + d
    return float(np.linalg.svd(g, compute_uv=False)[0]) if g.size else 0.0


def _has_imaginary_eig(a, b, c, d, gamma: float) -> bool:
    nw = b.shape[1]
    r = gamma * gamma * np.eye(nw) - d.T @ d
    ri_dc = np.linalg.solve(r, d.T @ c)
    ri_bt = np.linalg.solve(r, b.T)
    a_hat = a + b @ ri_dc
    ham = np.block([
        [a_hat, b @ ri_bt],
        [-c.T @ (np.eye(c.shape[0]) + d @ np.linalg.solve(r, d.T)) @ c, -a_hat.T],
    ])
    eig = np.linalg.eigvals(ham)
    scale = max(1.0, float(np.max(np.abs(eig))))
    return bool(np.any(np.abs(eig.real) <= 1e-9 * scale))


def hinf_sample(a, b, c, d=None, rel_tol: float = 1e-6) -> float:
    """H-infinity norm of (A, B, C, D) by Hamiltonian-matrix bisection.

    Returns +inf when A is not Hurwitz.
    """
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    c = np.atleast_2d(np.asarray(c, float))
    d = np.zeros((c.shape[0], b.shape[1])) if d is None else np.atleast_2d(np.asarray(d, float))
    if not _is_hurwitz(a):
        return math.inf
    if b.size == 0 or c.size == 0:
        return float(np.linalg.svd(d, compute_uv=False)[0]) if d.size else 0.0
    eig = np.linalg.eigvals(a)
    probes = {0.0}
    for lam in eig:
        probes.add(abs(lam.imag))
        probes.add(abs(lam))
    d_norm = float(np.linalg.svd(d, compute_uv=False)[0]) if d.size else 0.0
    lo = max(_sigma_max_response(a, b, c, d, w) for w in probes)
    lo = max(lo, d_norm)
    if lo == 0.0:
        return 0.0
    hi = 2.0 * lo
    while _has_imaginary_eig(a, b, c, d, hi):
        hi *= 2.0
        if hi > 1e14 * lo:
            raise SolverFailure("H-infinity bisection failed to bracket the norm")
    lo_b = lo
    while hi - lo_b > rel_tol * lo_b:
        mid = 0.5 * (hi + lo_b)
        if _has_imaginary_eig(a, b, c, d, mid):
            lo_b = mid
        else:
            hi = mid
    return 0.5 * (hi + lo_b)


def i2p_sample(a, b_w, c_z, rtol: float = 1e-7, atol: float = 1e-9,
               decay: float = 1e-6) -> float:
    """Peak of |z(t)| (max over outputs and disturbance columns) for impulses.

    An impulse on column j is the initial condition x(0) = B_w[:, j]; the
    response is integrated adaptively until the state has decayed below
    ``decay`` of its own peak, and the peak is refined on the dense output.
    Returns +inf when A is not Hurwitz.
    """
    a = np.atleast_2d(np.asarray(a, float))
    b_w = np.atleast_2d(np.asarray(b_w, float))
    c_z = np.atleast_2d(np.asarray(c_z, float))
    if not _is_hurwitz(a):
        return math.inf
    if b_w.size == 0 or c_z.size == 0:
        return 0.0
    eig = np.linalg.eigvals(a)
    rate_slow = float(np.min(-eig.real))
    freq = float(np.max(np.abs(eig.imag)))
    chunk = 3.0 / rate_slow
    n_eval = int(min(20000, 256 + 64 * chunk * max(freq, 1.0 / chunk) / (2 * math.pi)))
    peak = 0.0
    for j in range(b_w.shape[1]):
        x0 = b_w[:, j]
        x_peak = float(np.linalg.norm(x0))
        t0 = 0.0
        col_peak = float(np.max(np.abs(c_z @ x0)))
        while True:
            sol = scipy.integrate.solve_ivp(
                lambda t, x: a @ x, (t0, t0 + chunk), x0, method="RK45",
                rtol=rtol, atol=atol, dense_output=True)
            ts = np.linspace(t0, t0 + chunk, n_eval)
            xs = sol.sol(ts)
            zmag = np.max(np.abs(c_z @ xs), axis=0)
            k = int(np.argmax(zmag))
            if zmag[k] > col_peak:
                lob = ts[max(k - 1, 0)]
                upb = ts[min(k + 1, len(ts) - 1)]
                ref = scipy.optimize.minimize_scalar(
                    lambda t: -float(np.max(np.abs(c_z @ sol.sol(t)))),
                    bounds=(lob, upb), method="bounded",
                    options={"xatol": max(1e-12, (upb - lob) * 1e-8)})
                col_peak = max(zmag[k], -float(ref.fun))
            x_norms = np.linalg.norm(xs, axis=0)
            x_peak = max(x_peak, float(np.max(x_norms)))
            x0 = sol.y[:, -1]
            t0 += chunk
            if float(np.linalg.norm(x0)) <= decay * x_peak:
                break
            if t0 > 1000.0 * chunk:
                break
        peak = max(peak, col_peak)
    return peak


def _sample_value(clsys: UncertainStateSpace, performance: str, index: int,
                  seed: int, sampled_names: list[str], robust_names: list[str],
                  solver: str | None) -> float:
    smp = sample_at(clsys.structure, seed, index)
    if robust_names:
        part = clsys.close_partial(smp, sampled_names)
        res = analyze_deterministic(part, performance, solver=solver)
        return res.value if performance != "stability" else (
            0.0 if res.status == "ok" else math.inf)
    sys = clsys.close_delta(smp)
    if performance == "stability":
        return 0.0 if _is_hurwitz(sys.a) else math.inf
    if performance == "hinf":
        return hinf_sample(sys.a, sys.b_w, sys.c_z, sys.d_zw)
    return i2p_sample(sys.a, sys.b_w, sys.c_z)


def worst_case_estimate(clsys: UncertainStateSpace, performance: str,
                        settings: RandomizedSettings,
                        solver: str | None = None) -> AnalysisResult:
    """Randomized worst-case estimate with log-over-log sample count.

    With confidence 1 - delta, at most an epsilon fraction of the
    uncertainty set performs worse than the returned value.  Unstable
    samples contribute +inf.
    """
    t0 = time.perf_counter()
    n_samples = sample_size("loglog", settings)
    sampled_names, robust_names = _split_sampled_names(clsys.structure)
    values = []
    for k in range(n_samples):
        values.append(_sample_value(clsys, performance, k, settings.seed,
                                    sampled_names, robust_names, solver))
    k_worst = int(np.argmax(values))
    smp = sample_at(clsys.structure, settings.seed, k_worst)
    extremizer = {"index": k_worst}
    for name, val in smp.values.items():
        extremizer[name] = val.tolist() if isinstance(val, np.ndarray) else val
    return AnalysisResult("worst-case estimate", performance,
                          float(values[k_worst]), n_samples,
                          settings=settings.to_dict(), extremizer=extremizer,
                          per_sample=[float(v) for v in values],
                          wall_time=time.perf_counter() - t0)


def verify_probability(clsys: UncertainStateSpace, performance: str,
                       level: float | None, settings: RandomizedSettings,
                       solver: str | None = None) -> AnalysisResult:
    """Chernoff-bound estimate of P(performance satisfied).

    For 'stability' the predicate is asymptotic stability of the sample; for
    'hinf'/'i2p' it is (per-sample value <= level).  |estimate - truth| <=
    epsilon with confidence 1 - delta.
    """
    if performance != "stability" and level is None:
        raise StructureMismatch("verification of a norm level needs `level`")
    t0 = time.perf_counter()
    n_samples = sample_size("chernoff", settings)
    sampled_names, robust_names = _split_sampled_names(clsys.structure)
    hits = 0
    values = []
    for k in range(n_samples):
        v = _sample_value(clsys, performance, k, settings.seed,
                          sampled_names, robust_names, solver)
        values.append(float(v))
        if performance == "stability":
            hits += int(math.isfinite(v))
        else:
            hits += int(v <= level)
    return AnalysisResult("probability estimate", performance,
                          hits / n_samples, n_samples,
                          settings={**settings.to_dict(), "level": level},
                          per_sample=values,
                          wall_time=time.perf_counter() - t0)
