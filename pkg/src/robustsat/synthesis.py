"""Deterministic and randomized state-feedback design drivers.

All methods share one Lyapunov-shaping program: a single ``P = P' > 0`` and
``Y`` across every requested performance, with the gain recovered as
``K = Y P^-1``.  The deterministic path robustifies each inequality with
quadratic separators; the scenario path imposes the nominal inequalities at
randomly sampled uncertainties; the sequential path alternates small sampled
designs with independent randomized validation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .benchmark import BenchmarkConfig, PhysicalData, default_physical_data, design_models
from .design_lmis import (
    HalfPlane,
    assemble_sf_dstability,
    assemble_sf_hinf,
    assemble_sf_i2p,
)
from .errors import Infeasible, SolverFailure, StructureMismatch, ValidationExhausted
from .lft import Interval, NormBounded, ScalarRepeated, UncertaintyStructure
from .sampling import RandomizedSettings, sample_at, sample_size
from .sdp import LinMatIneq, SdpProblem, Term, solve
from .separators import make_separator
from .uss import UncertainStateSpace

__all__ = [
    "DesignItem",
    "DesignSpec",
    "Controller",
    "demeter_design_spec",
    "design_deterministic",
    "design_scenario",
    "design_sequential",
]

#: Residual below which a sampled constraint counts as violated.
VIOLATION_TOL = 1e-7

#: Interval scalar counts above which the automatic separator choice falls
#: back from the vertex family to DG scalings.
AUTO_VERTEX_LIMIT = 6

#: Weight of the Tr(P) tie-breaker added to every design objective.  The
#: level/weighted optimum sits on a nearly flat face of the feasible set;
#: the regularizer selects a well-centered point on it, which interior-point
#: backends otherwise fail to reach.  Levels shift by well under a percent.
TRACE_REG = 1e-3

SEQUENTIAL_BATCH0 = 32
SEQUENTIAL_MAX_ITER = 12
VALIDATION_SEED_SALT = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class DesignItem:
    """One requested performance: kind 'hinf', 'i2p', or 'dstability'."""

    kind: str
    plant: UncertainStateSpace
    weight: float = 0.0
    region: HalfPlane | None = None

    def __post_init__(self):
        if self.kind not in ("hinf", "i2p", "dstability"):
            raise StructureMismatch(f"unknown design item kind {self.kind!r}")
        if self.weight < 0:
            raise StructureMismatch("weights must be >= 0")
        if self.kind == "dstability" and self.region is None:
            raise StructureMismatch("dstability items need a region")


@dataclass(frozen=True)
class DesignSpec:
    """A multiobjective state-feedback design request."""

    items: tuple[DesignItem, ...]
    config: BenchmarkConfig | None = None

    def __post_init__(self):
        if not self.items:
            raise StructureMismatch("a design spec needs at least one item")
        n, m = self.items[0].plant.n, self.items[0].plant.m
        for it in self.items:
            if it.plant.n != n or it.plant.m != m:
                raise StructureMismatch("all plant variants must share state/control dims")
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def n(self) -> int:
        return self.items[0].plant.n

    @property
    def m(self) -> int:
        return self.items[0].plant.m

    @property
    def structure(self) -> UncertaintyStructure:
        return self.items[0].plant.structure


@dataclass
class Controller:
    """A state-feedback gain plus everything needed to replay its design."""

    gain: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gain = np.atleast_2d(np.asarray(self.gain, dtype=float))
        if not np.all(np.isfinite(self.gain)):
            raise StructureMismatch("controller gain has non-finite entries")

    @property
    def levels(self) -> dict:
        return self.provenance.get("levels", {})

    def to_json(self) -> str:
        import json

        return json.dumps({"gain": self.gain.tolist(), "provenance": self.provenance},
                          indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Controller":
        import json

        doc = json.loads(text)
        return cls(np.asarray(doc["gain"], dtype=float), doc.get("provenance", {}))


def demeter_design_spec(config: BenchmarkConfig, phys: PhysicalData | None = None,
                        hinf_weight: float = 1.0, i2p_weight: float = 100.0) -> DesignSpec:
    """The benchmark's four-specification design request.

    H-infinity on the disturbance-to-pointing channel (weight 1), impulse-to-
    peak on the initial-condition-to-wheel-speed channel (weight 100), and the
    pole band -10 < Re s < -1e-4 on the augmented plant.
    """
    phys = phys or default_physical_data()
    aug, w1z1, w2z2 = design_models(config, phys)
    return DesignSpec(
        (
            DesignItem("hinf", w1z1, weight=hinf_weight),
            DesignItem("i2p", w2z2, weight=i2p_weight),
            DesignItem("dstability", aug, region=HalfPlane(-1e-4)),
            DesignItem("dstability", aug, region=HalfPlane(-10.0, np.pi)),
        ),
        config=config,
    )


def _witness_state_peaks(a: np.ndarray, b_u: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Per-state peak magnitudes of an LQR-stabilized response from x0.

    Used purely as a diagonal preconditioner: the design model mixes states
    whose natural magnitudes span several decades (angles, rates, wheel
    speeds), which cripples interior-point solvers.  Rescaling by response
    peaks leaves every certified level unchanged.
    """
    import scipy.integrate
    import scipy.linalg

    n = a.shape[0]
    try:
        x_are = scipy.linalg.solve_continuous_are(a, b_u, np.eye(n),
                                                  100.0 * np.eye(b_u.shape[1]))
        k = -np.linalg.solve(100.0 * np.eye(b_u.shape[1]), b_u.T @ x_are)
        a_cl = a + b_u @ k
    except Exception:
        return np.ones(n)
    rates = -np.linalg.eigvals(a_cl).real
    horizon = 5.0 / max(rates.min(), 1e-4)
    sol = scipy.integrate.solve_ivp(lambda t, x: a_cl @ x, (0.0, horizon), x0,
                                    rtol=1e-6, atol=1e-12, dense_output=True)
    ts = np.linspace(0.0, horizon, 4000)
    peaks = np.max(np.abs(sol.sol(ts)), axis=1)
    floor = max(peaks.max(), 1e-12)
    return np.maximum(peaks, 1e-4 * floor)


def _scale_for(spec: DesignSpec) -> np.ndarray:
    plant = spec.items[0].plant
    from .lft import DeltaSample

    nom = plant.close_delta(DeltaSample.zero(plant.structure))
    x0 = np.zeros(spec.n)
    for item in spec.items:
        if item.plant.nw:
            x0 += np.abs(item.plant.b_w).sum(axis=1)
    if not np.any(x0):
        x0 = np.ones(spec.n)
    return _witness_state_peaks(nom.a, nom.b_u, x0)


def _scaled_spec(spec: DesignSpec) -> tuple[DesignSpec, np.ndarray]:
    scale = _scale_for(spec)
    items = tuple(
        DesignItem(it.kind, it.plant.rescaled(scale), it.weight, it.region)
        for it in spec.items
    )
    return DesignSpec(items, config=spec.config), scale


def _separator_kind(structure: UncertaintyStructure, requested: str) -> str:
    if requested != "auto":
        return requested
    scalar = [structure.block_of(n) for n in structure.names
              if isinstance(structure.block_of(n), ScalarRepeated)]
    if scalar and all(isinstance(b.bound, Interval) for b in scalar) \
            and len(scalar) <= AUTO_VERTEX_LIMIT:
        return "vertex"
    return "dg"


def _level_names(items) -> dict[int, str]:
    return {i: f"level{i}" for i, it in enumerate(items) if it.kind in ("hinf", "i2p")}


def _setup_shared(spec: DesignSpec, problem: SdpProblem):
    n, m = spec.n, spec.m
    p = problem.add_variable("P", "symmetric", n)
    y = problem.add_variable("Y", "rectangular", m, n)
    scale = max(1.0, float(np.max(np.abs(spec.items[0].plant.a))))
    problem.add_constraint(LinMatIneq(-1e-8 * scale * np.eye(n),
                                      [Term(np.eye(n), p, np.eye(n))],
                                      ">=", label="P > 0"))
    problem.add_objective(p, TRACE_REG * np.eye(n))
    gammas = {}
    for i, name in _level_names(spec.items).items():
        g = problem.add_variable(name, "scalar")
        gammas[i] = g
        if spec.items[i].weight > 0:
            problem.add_objective(g, spec.items[i].weight)
    return p, y, gammas


def _assemble_item(problem, item: DesignItem, plant, p, y, gamma, sep_factory,
                   include_decay: bool, label: str):
    if item.kind == "hinf":
        assemble_sf_hinf(problem, plant, p, y, gamma, sep_factory, label=label)
    elif item.kind == "i2p":
        assemble_sf_i2p(problem, plant, p, y, gamma, sep_factory,
                        include_decay=include_decay, label=label)
    else:
        assemble_sf_dstability(problem, plant, p, y, item.region, sep_factory,
                               label=label)


def _has_strict_dstab(spec: DesignSpec) -> bool:
    return any(it.kind == "dstability" and not it.region.flipped
               and it.region.offset < 0 for it in spec.items)


def _extract_controller(spec: DesignSpec, sol, method: str, extra: dict,
                        scale: np.ndarray | None = None) -> Controller:
    if sol.status == "infeasible":
        raise Infeasible(f"{method} design problem is infeasible")
    if sol.status not in ("optimal", "inaccurate"):
        raise SolverFailure(f"{method} design solve failed: {sol.diagnostics}")
    p_v = sol["P"]
    y_v = sol["Y"]
    gain = np.linalg.solve(p_v.T, y_v.T).T
    if scale is not None:
        gain = gain / scale[None, :]
    plant = spec.items[0].plant
    a_cl = plant.a + plant.b_u @ gain
    if np.max(np.linalg.eigvals(a_cl).real) >= 0.0:
        raise SolverFailure("returned gain does not stabilize the nominal plant")
    levels = {}
    for i, name in _level_names(spec.items).items():
        val = float(np.atleast_1d(sol[name])[0])
        # the i2p cost variable is the squared peak; report the level
        levels[spec.items[i].kind] = math.sqrt(max(val, 0.0)) \
            if spec.items[i].kind == "i2p" else val
    prov = {
        "method": method,
        "levels": levels,
        "solver": sol.solver,
        "solver_status": sol.status,
        "solve_time": sol.solve_time,
        "objective": sol.objective,
    }
    if spec.config is not None:
        prov["config"] = spec.config.to_dict()
    prov.update(extra)
    return Controller(gain, prov)


def design_deterministic(spec: DesignSpec, scalar_separator: str = "auto",
                         solver: str | None = None) -> Controller:
    """Multiobjective robust design with separator-certified inequalities.

    Returns certified levels valid for the whole uncertainty set; raises
    :class:`Infeasible` when no common-Lyapunov certificate exists.
    """
    t0 = time.perf_counter()
    scaled, scale = _scaled_spec(spec)
    problem = SdpProblem()
    p, y, gammas = _setup_shared(scaled, problem)
    kind = _separator_kind(spec.structure, scalar_separator)
    include_decay = not _has_strict_dstab(spec)
    for i, item in enumerate(scaled.items):
        factory = lambda s: make_separator(problem, s, kind)  # noqa: E731
        _assemble_item(problem, item, item.plant, p, y, gammas.get(i), factory,
                       include_decay, label=f"{item.kind}[{i}]")
    sol = solve(problem, solver=solver)
    extra = {"separator": kind, "wall_time": time.perf_counter() - t0}
    return _extract_controller(spec, sol, "deterministic", extra, scale=scale)


def _split_sampled_names(structure: UncertaintyStructure) -> tuple[list[str], list[str]]:
    """(sampled, kept-robust) names.  Norm-bounded scalars stay robust only in
    the mixed flavor where interval scalars coexist with them."""
    scalar_names = [n for n in structure.names
                    if isinstance(structure.block_of(n), ScalarRepeated)]
    interval = [n for n in scalar_names
                if isinstance(structure.block_of(n).bound, Interval)]
    norm = [n for n in scalar_names if n not in interval]
    sym = [n for n in structure.names if n not in scalar_names]
    if interval and norm:
        return interval + sym, norm
    return scalar_names + sym, []


class _SampledProgram:
    """Shared variables plus per-sample constraint lists for sampled designs."""

    def __init__(self, spec: DesignSpec, seed: int, solver: str | None,
                 shadow_of: "_SampledProgram | None" = None):
        self.spec = spec
        self.seed = seed
        self.solver = solver
        self.sampled_names, self.robust_names = _split_sampled_names(spec.structure)
        self.include_decay = not _has_strict_dstab(spec)
        self._cache: dict[int, list] = {}
        self._fixed = spec.structure.dim == 0 or not self.sampled_names
        if shadow_of is not None:
            # evaluate constraints at another program's variables, e.g. for
            # validating a candidate on an independent sample stream
            self.problem = shadow_of.problem
            self.p, self.y, self.gammas = shadow_of.p, shadow_of.y, shadow_of.gammas
            self.shared_seps = shadow_of.shared_seps
            return
        self.problem = SdpProblem()
        self.p, self.y, self.gammas = _setup_shared(spec, self.problem)
        self.shared_seps: dict[int, object] = {}
        if self.robust_names:
            kept = UncertaintyStructure(
                [b for b in spec.structure.blocks if b.name in self.robust_names])
            for i in range(len(spec.items)):
                self.shared_seps[i] = make_separator(self.problem, kept, "dg")

    def _closed(self, plant: UncertainStateSpace, index: int) -> UncertainStateSpace:
        if self.spec.structure.dim == 0:
            return plant
        smp = sample_at(self.spec.structure, self.seed, index)
        return plant.close_partial(smp, self.sampled_names)

    def decision_count(self) -> int:
        d = self.p.n_params + self.y.n_params + len(self.gammas)
        for sep in self.shared_seps.values():
            d += sum(v.n_params for v in sep.variables)
        return d

    def constraints_for(self, index: int) -> list:
        """Constraints of sample ``index`` (identical samples collapse to 0)."""
        if self._fixed:
            index = 0
        got = self._cache.get(index)
        if got is not None:
            return got
        staging = SdpProblem()
        staging.variables = list(self.problem.variables)
        for i, item in enumerate(self.spec.items):
            closed = self._closed(item.plant, index)
            factory = (lambda sep: (lambda s: sep))(self.shared_seps.get(i))
            _assemble_item(staging, item, closed, self.p, self.y,
                           self.gammas.get(i), factory, self.include_decay,
                           label=f"{item.kind}[{i}]@{index}")
        self._cache[index] = staging.constraints
        return staging.constraints

    def solve_active_set(self, n_samples: int, batch: int = 64):
        """Exact solution of the fully sampled program by constraint generation.

        Solves with a working subset, then checks every sampled constraint at
        the solution and pulls in the most violated ones until none remain.
        The final solution therefore satisfies all ``n_samples`` constraint
        sets to tolerance, exactly as if they had all been imposed at once.
        """
        if self._fixed:
            n_samples = 1
        active = list(range(min(batch, n_samples)))
        added = set(active)
        for idx in active:
            for con in self.constraints_for(idx):
                self.problem.add_constraint(con)
        rounds = 0
        while True:
            rounds += 1
            sol = solve(self.problem, solver=self.solver)
            if sol.status not in ("optimal", "inaccurate"):
                return sol, rounds
            violations = []
            for idx in range(n_samples):
                if idx in added:
                    continue
                worst = min(con.residual(sol.values) for con in self.constraints_for(idx))
                if worst < -VIOLATION_TOL:
                    violations.append((worst, idx))
            if not violations:
                return sol, rounds
            violations.sort()
            for _, idx in violations[:batch]:
                added.add(idx)
                for con in self.constraints_for(idx):
                    self.problem.add_constraint(con)

    def max_violation_at(self, values: dict, indices) -> float:
        worst = 0.0
        for idx in indices:
            for con in self.constraints_for(idx):
                worst = min(worst, con.residual(values))
        return -worst


def design_scenario(spec: DesignSpec, settings: RandomizedSettings,
                    solver: str | None = None) -> Controller:
    """Scenario design: nominal inequalities imposed at sampled uncertainties.

    The sample count follows the scenario bound with ``d`` equal to the
    number of scalar decision variables of the program.  In the mixed
    uncertainty flavor the norm-bounded scalars are not sampled; their
    channel stays in every sampled constraint, robustified by DG scalings
    shared across samples.
    """
    t0 = time.perf_counter()
    scaled, scale = _scaled_spec(spec)
    prog = _SampledProgram(scaled, settings.seed, solver)
    d = prog.decision_count()
    n_samples = sample_size("scenario", settings, d)
    sol, rounds = prog.solve_active_set(n_samples)
    extra = {
        "settings": settings.to_dict(),
        "sample_count": n_samples,
        "decision_count": d,
        "active_set_rounds": rounds,
        "sampled_names": prog.sampled_names,
        "robust_names": prog.robust_names,
        "wall_time": time.perf_counter() - t0,
    }
    return _extract_controller(spec, sol, "scenario", extra, scale=scale)


def design_sequential(spec: DesignSpec, settings: RandomizedSettings,
                      solver: str | None = None,
                      max_iterations: int = SEQUENTIAL_MAX_ITER) -> Controller:
    """Design on growing sample batches, validate each candidate independently.

    Iteration k designs on ``32 * 2^(k-1)`` samples and validates on a fresh
    set sized by the log-over-log bound at confidence ``delta / 2^k``; the
    first candidate whose validation set shows no violation is returned.
    """
    t0 = time.perf_counter()
    scaled, scale = _scaled_spec(spec)
    val_seed = settings.seed ^ VALIDATION_SEED_SALT
    val_used = 0
    history = []
    for k in range(1, max_iterations + 1):
        n_k = SEQUENTIAL_BATCH0 * 2 ** (k - 1)
        prog = _SampledProgram(scaled, settings.seed, solver)
        sol, rounds = prog.solve_active_set(n_k)
        if sol.status == "infeasible":
            raise Infeasible("sequential design batch is infeasible")
        if sol.status not in ("optimal", "inaccurate"):
            raise SolverFailure(f"sequential design solve failed: {sol.diagnostics}")
        delta_k = settings.delta / 2 ** k
        n_val = sample_size("loglog", RandomizedSettings(settings.epsilon, delta_k))
        vprog = _SampledProgram(scaled, val_seed, solver, shadow_of=prog)
        worst = vprog.max_violation_at(
            sol.values, range(val_used, val_used + n_val))
        val_used += n_val
        history.append({"iteration": k, "design_samples": n_k,
                        "validation_samples": n_val, "worst_violation": worst})
        if worst <= VIOLATION_TOL:
            extra = {
                "settings": settings.to_dict(),
                "iterations": k,
                "design_samples": n_k,
                "validation_samples": n_val,
                "history": history,
                "sampled_names": prog.sampled_names,
                "robust_names": prog.robust_names,
                "wall_time": time.perf_counter() - t0,
            }
            return _extract_controller(spec, sol, "sequential", extra, scale=scale)
    raise ValidationExhausted(
        f"no candidate passed validation within {max_iterations} iterations")
