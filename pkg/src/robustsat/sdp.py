"""Linear matrix inequality problems over an abstract semidefinite backend.

A problem is a set of matrix variables, a list of affine matrix inequalities
and a linear objective.  Each inequality is a constant plus terms of the form
``L @ f(V) @ R`` where ``f`` is the identity, the transpose, or a Kronecker
lift ``I_k (x) V``.  Problems are lowered to the standard conic form

    minimize    c'x
    subject to  svec(M_k(x)) in PSD cone,   k = 1..K

and handed to one of two interior-point backends: Clarabel (default) or
CVXOPT's ``conelp``.  Both meet the 1e-7 feasibility / duality-gap contract
on the problem sizes used here (a few thousand scalar decision variables).

Problem assembly is pure; each ``solve`` call creates an independent backend
instance, so solves may run concurrently.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SolverFailure, StructureMismatch

__all__ = [
    "SdpVariable",
    "Term",
    "LinMatIneq",
    "SdpProblem",
    "Solution",
    "solve",
    "export_problem",
    "default_solver",
]

_SQRT2 = np.sqrt(2.0)


class SdpVariable:
    """A matrix decision variable.

    kind is one of ``symmetric`` (dim), ``rectangular`` (rows, cols),
    ``skew`` (dim) or ``scalar``.  ``psd=True`` asks the problem to add the
    sign constraint V >= 0 at lowering time.
    """

    _counter = 0

    def __init__(self, name: str, kind: str, rows: int = 1, cols: int | None = None,
                 psd: bool = False):
        if kind not in ("symmetric", "rectangular", "skew", "scalar"):
            raise StructureMismatch(f"unknown variable kind {kind!r}")
        if kind == "scalar":
            rows = cols = 1
        if cols is None:
            cols = rows
        if kind in ("symmetric", "skew") and rows != cols:
            raise StructureMismatch(f"{kind} variable must be square")
        if rows < 1 or cols < 1:
            raise StructureMismatch("variable dims must be >= 1")
        self.name = name
        self.kind = kind
        self.rows = rows
        self.cols = cols
        self.psd = psd
        SdpVariable._counter += 1
        self.uid = SdpVariable._counter

    @property
    def n_params(self) -> int:
        n = self.rows
        if self.kind == "symmetric":
            return n * (n + 1) // 2
        if self.kind == "skew":
            return n * (n - 1) // 2
        if self.kind == "scalar":
            return 1
        return self.rows * self.cols

    def basis_stack(self) -> np.ndarray:
        """Stack of basis matrices, one per scalar parameter."""
        n, m = self.rows, self.cols
        out = np.zeros((self.n_params, n, m))
        k = 0
        if self.kind == "symmetric":
            for j in range(n):
                for i in range(j + 1):
                    out[k, i, j] = 1.0
                    out[k, j, i] = 1.0
                    k += 1
        elif self.kind == "skew":
            for j in range(n):
                for i in range(j):
                    out[k, i, j] = 1.0
                    out[k, j, i] = -1.0
                    k += 1
        elif self.kind == "scalar":
            out[0, 0, 0] = 1.0
        else:
            for j in range(m):
                for i in range(n):
                    out[k, i, j] = 1.0
                    k += 1
        return out

    def value_from_params(self, x: np.ndarray) -> np.ndarray:
        n, m = self.rows, self.cols
        if self.kind == "scalar":
            return float(x[0])
        v = np.zeros((n, m))
        k = 0
        if self.kind == "symmetric":
            for j in range(n):
                for i in range(j + 1):
                    v[i, j] = x[k]
                    v[j, i] = x[k]
                    k += 1
        elif self.kind == "skew":
            for j in range(n):
                for i in range(j):
                    v[i, j] = x[k]
                    v[j, i] = -x[k]
                    k += 1
        else:
            v = x.reshape((m, n)).T.copy()
        return v

    def __repr__(self):
        return f"SdpVariable({self.name!r}, {self.kind}, {self.rows}x{self.cols})"


@dataclass(frozen=True)
class Term:
    """One affine contribution ``left @ f(var) @ right`` to a matrix expression.

    ``op``: 'v' plain, 'vT' transpose, 'kron' for I_k (x) V, 'kronT' for
    I_k (x) V'.  ``kron_reps`` is k for the kron ops.
    """

    left: np.ndarray
    var: SdpVariable
    right: np.ndarray
    op: str = "v"
    kron_reps: int = 1

    def transposed(self) -> "Term":
        flip = {"v": "vT", "vT": "v", "kron": "kronT", "kronT": "kron"}
        return Term(np.asarray(self.right).T, self.var, np.asarray(self.left).T,
                    flip[self.op], self.kron_reps)

    def param_columns(self) -> np.ndarray:
        """(n_params, m, n) stack of contributions of each parameter."""
        basis = _basis_cache(self.var)
        if self.op in ("vT", "kronT"):
            basis = np.transpose(basis, (0, 2, 1))
        left = np.atleast_2d(np.asarray(self.left, dtype=float))
        right = np.atleast_2d(np.asarray(self.right, dtype=float))
        if self.op in ("kron", "kronT") and self.kron_reps > 1:
            k = self.kron_reps
            r = basis.shape[1]
            c = basis.shape[2]
            lr = left.reshape(left.shape[0], k, r)
            rr = right.reshape(k, c, right.shape[1])
            return np.einsum("msi,pij,sjn->pmn", lr, basis, rr, optimize=True)
        return np.einsum("mi,pij,jn->pmn", left, basis, right, optimize=True)

    def value(self, v: np.ndarray) -> np.ndarray:
        m = np.atleast_2d(np.asarray(v, dtype=float))
        if self.op in ("vT", "kronT"):
            m = m.T
        if self.op in ("kron", "kronT") and self.kron_reps > 1:
            m = np.kron(np.eye(self.kron_reps), m)
        return np.atleast_2d(self.left) @ m @ np.atleast_2d(self.right)


_BASIS_CACHE: dict[tuple, np.ndarray] = {}


def _basis_cache(var: SdpVariable) -> np.ndarray:
    key = (var.kind, var.rows, var.cols)
    got = _BASIS_CACHE.get(key)
    if got is None:
        got = var.basis_stack()
        _BASIS_CACHE[key] = got
    return got


class LinMatIneq:
    """Affine matrix inequality ``constant + sum(terms)  sense  0``."""

    def __init__(self, constant, terms: list[Term], sense: str = ">=", label: str = ""):
        if sense not in (">=", "<="):
            raise StructureMismatch(f"sense must be '>=' or '<=', got {sense!r}")
        c = np.atleast_2d(np.asarray(constant, dtype=float))
        if c.shape[0] != c.shape[1]:
            raise StructureMismatch("constraint constant must be square")
        self.constant = c
        self.terms = list(terms)
        self.sense = sense
        self.label = label

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    def value(self, values: dict) -> np.ndarray:
        """Numeric matrix at the given variable values (before sense)."""
        m = self.constant.copy()
        for t in self.terms:
            m = m + t.value(values[t.var.name])
        return m

    def residual(self, values: dict) -> float:
        """Most negative eigenvalue of the oriented matrix (>=0 means satisfied)."""
        m = self.value(values)
        if self.sense == "<=":
            m = -m
        m = 0.5 * (m + m.T)
        return float(np.linalg.eigvalsh(m).min())


class SdpProblem:
    """Matrix variables, affine LMI constraints and a linear objective."""

    def __init__(self):
        self.variables: list[SdpVariable] = []
        self.constraints: list[LinMatIneq] = []
        self._objective: list[tuple[SdpVariable, np.ndarray]] = []

    def add_variable(self, name: str, kind: str, rows: int = 1, cols: int | None = None,
                     psd: bool = False) -> SdpVariable:
        if any(v.name == name for v in self.variables):
            raise StructureMismatch(f"duplicate variable name {name!r}")
        v = SdpVariable(name, kind, rows, cols, psd)
        self.variables.append(v)
        return v

    def add_constraint(self, ineq: LinMatIneq) -> LinMatIneq:
        known = {v.uid for v in self.variables}
        for t in ineq.terms:
            if t.var.uid not in known:
                raise StructureMismatch(f"constraint uses undeclared variable {t.var.name!r}")
        self.constraints.append(ineq)
        return ineq

    def add_objective(self, var: SdpVariable, weight) -> None:
        """Add <weight, V> to the objective to be minimized."""
        if var.uid not in {v.uid for v in self.variables}:
            raise StructureMismatch(f"objective uses undeclared variable {var.name!r}")
        w = np.atleast_2d(np.asarray(weight, dtype=float))
        if w.shape != (var.rows, var.cols):
            if w.shape == (1, 1):
                w = np.full((var.rows, var.cols), w[0, 0]) * np.eye(var.rows, var.cols)
            else:
                raise StructureMismatch("objective weight shape mismatch")
        self._objective.append((var, w))

    # -- lowering ---------------------------------------------------------

    def param_layout(self) -> dict[str, tuple[int, int]]:
        """name -> (offset, n_params) in the stacked decision vector."""
        out = {}
        pos = 0
        for v in self.variables:
            out[v.name] = (pos, v.n_params)
            pos += v.n_params
        return out

    @property
    def n_params(self) -> int:
        return sum(v.n_params for v in self.variables)

    def objective_vector(self) -> np.ndarray:
        layout = self.param_layout()
        c = np.zeros(self.n_params)
        for var, w in self._objective:
            off, _ = layout[var.name]
            basis = _basis_cache(var)
            c[off:off + var.n_params] += np.einsum("pij,ij->p", basis, w)
        return c

    def lowered_blocks(self):
        """Yield (dim, constant, rows, cols, vals) per constraint in M(x) >= 0 form.

        rows/cols/vals are COO triplets of the map x -> full-vec(M(x) - C).
        """
        layout = self.param_layout()
        blocks = []
        cons = list(self.constraints)
        for v in self.variables:
            if v.psd:
                if v.kind != "symmetric":
                    raise StructureMismatch("psd flag only makes sense on symmetric variables")
                cons.append(LinMatIneq(np.zeros((v.rows, v.rows)),
                                       [Term(np.eye(v.rows), v, np.eye(v.rows))],
                                       ">=", label=f"{v.name} >= 0"))
        for con in cons:
            sign = 1.0 if con.sense == ">=" else -1.0
            d = con.dim
            const = sign * 0.5 * (con.constant + con.constant.T)
            cols_idx = []
            rows_idx = []
            vals = []
            acc: dict[int, np.ndarray] = {}
            for t in con.terms:
                off, _ = layout[t.var.name]
                stack = t.param_columns()
                if stack.shape[1] != d or stack.shape[2] != d:
                    raise StructureMismatch(
                        f"term for {t.var.name!r} yields {stack.shape[1:]} "
                        f"inside a {d}x{d} constraint ({con.label})"
                    )
                if off in acc:
                    acc[off] = acc[off] + sign * stack
                else:
                    acc[off] = sign * stack
            for off, stack in acc.items():
                npar = stack.shape[0]
                sym = 0.5 * (stack + np.transpose(stack, (0, 2, 1)))
                if np.max(np.abs(stack - sym)) > 1e-9 * max(1.0, np.max(np.abs(stack))):
                    raise StructureMismatch(
                        f"constraint {con.label!r} has a non-symmetric affine map"
                    )
                # Entry order of the flattened map is irrelevant downstream:
                # every per-parameter contribution is symmetric, so row-major
                # and column-major full-vecs coincide entrywise.
                flat = sym.reshape(npar, d * d)
                pnz, enz = np.nonzero(flat)
                rows_idx.append(enz)
                cols_idx.append(pnz + off)
                vals.append(flat[pnz, enz])
            rows_all = np.concatenate(rows_idx) if rows_idx else np.zeros(0, dtype=int)
            cols_all = np.concatenate(cols_idx) if cols_idx else np.zeros(0, dtype=int)
            vals_all = np.concatenate(vals) if vals else np.zeros(0)
            blocks.append((d, const, rows_all, cols_all, vals_all))
        return blocks


@dataclass
class Solution:
    """Backend result: status, variable values, objective and diagnostics."""

    status: str
    values: dict = field(default_factory=dict)
    objective: float = float("nan")
    solver: str = ""
    solve_time: float = 0.0
    iterations: int = 0
    diagnostics: str = ""

    def __getitem__(self, name: str):
        return self.values[name]

    def max_violation(self, problem: SdpProblem) -> float:
        """Most negative oriented residual over all constraints (0 if none)."""
        if not self.values:
            return float("inf")
        worst = 0.0
        for con in problem.constraints:
            worst = min(worst, con.residual(self.values))
        return -worst


def default_solver() -> str:
    env = os.environ.get("ROBUSTSAT_SOLVER")
    if env:
        return env.lower()
    return "clarabel"


def _prune(problem: SdpProblem):
    """Lower the problem and drop decision columns absent from every constraint.

    Parameters that appear in no constraint are fixed at zero (they cannot
    carry objective weight; that would make the problem unbounded).
    Returns (blocks, c_reduced, col_map, n_full).
    """
    blocks = problem.lowered_blocks()
    n_full = problem.n_params
    used = np.zeros(n_full, dtype=bool)
    for _, _, _, cls, _ in blocks:
        used[cls] = True
    c = problem.objective_vector()
    dangling = np.nonzero(~used & (c != 0.0))[0]
    if dangling.size:
        raise SolverFailure(
            "objective weights on parameters that appear in no constraint "
            "would make the problem unbounded"
        )
    col_map = -np.ones(n_full, dtype=int)
    col_map[used] = np.arange(int(used.sum()))
    reduced = []
    for d, const, rws, cls, vls in blocks:
        reduced.append((d, const, rws, col_map[cls], vls))
    return reduced, c[used], col_map, n_full


def _expand_params(problem: SdpProblem, x_red: np.ndarray, col_map: np.ndarray,
                   n_full: int) -> dict:
    x = np.zeros(n_full)
    x[col_map >= 0] = x_red
    values = {}
    layout = problem.param_layout()
    for v in problem.variables:
        off, npar = layout[v.name]
        values[v.name] = v.value_from_params(x[off:off + npar])
    return values


def solve(problem: SdpProblem, solver: str | None = None, verbose: bool = False,
          **options) -> Solution:
    """Solve the problem with the selected backend.

    On ``optimal`` all constraints hold to a scaled residual of about 1e-7;
    ``inaccurate`` results should be treated as suspect by callers.  When no
    backend is pinned (argument and ROBUSTSAT_SOLVER unset) a failure of the
    default backend falls through to the other one, which resolves the rare
    numerical-error exits on degenerate problems.
    """
    pinned = solver is not None or bool(os.environ.get("ROBUSTSAT_SOLVER"))
    name = (solver or default_solver()).lower()
    backends = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}
    if name not in backends:
        raise SolverFailure(f"unknown solver {name!r}; available: clarabel, cvxopt")
    other = "cvxopt" if name == "clarabel" else "clarabel"
    ladder = [(name, options)]
    if not pinned:
        ladder.append((other, options))
        # a last-chance rung with extra iterative refinement, which gets
        # cvxopt past occasional mid-run arithmetic breakdowns
        ladder.append(("cvxopt", {**options, "refinement": 2, "feastol": 1e-7}))
    trail = []
    for rung, opts in ladder:
        try:
            sol = backends[rung](problem, verbose, **opts)
        except SolverFailure as exc:
            if pinned:
                raise
            trail.append(f"{rung}: {exc}")
            continue
        if sol.status != "failure" or pinned:
            if trail:
                sol.diagnostics = "; ".join(trail + [f"{rung}: {sol.diagnostics}"])
            return sol
        trail.append(f"{rung}: {sol.diagnostics}")
    raise SolverFailure("all backends failed: " + "; ".join(trail))


def _triangle_indices(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row/col index and scale arrays mapping full-vec to svec (upper, col-major)."""
    rows = []
    cols = []
    scale = []
    for j in range(d):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
            scale.append(1.0 if i == j else _SQRT2)
    return np.asarray(rows), np.asarray(cols), np.asarray(scale)


def _solve_clarabel(problem: SdpProblem, verbose: bool, **options) -> Solution:
    import clarabel

    blocks, c, col_map, n_full = _prune(problem)
    nvar = len(c)
    cones = []
    a_rows = []
    a_cols = []
    a_vals = []
    b_parts = []
    row0 = 0
    for d, const, rws, cls, vls in blocks:
        ti, tj, tscale = _triangle_indices(d)
        tlen = len(ti)
        # map full-vec index (i + d*j) -> triangle slot, keep upper triangle only
        slot = -np.ones(d * d, dtype=int)
        slot[ti + d * tj] = np.arange(tlen)
        scale_full = np.zeros(d * d)
        scale_full[ti + d * tj] = tscale
        i_idx = rws % d
        j_idx = rws // d
        keep = i_idx <= j_idx
        if np.any(keep):
            rk = rws[keep]
            a_rows.append(slot[rk] + row0)
            a_cols.append(cls[keep])
            a_vals.append(-vls[keep] * scale_full[rk])
        b_parts.append(const[ti, tj] * tscale)
        cones.append(clarabel.PSDTriangleConeT(d))
        row0 += tlen
    nrows = row0
    if a_rows:
        A = sp.csc_matrix(
            (np.concatenate(a_vals), (np.concatenate(a_rows), np.concatenate(a_cols))),
            shape=(nrows, nvar),
        )
    else:
        A = sp.csc_matrix((nrows, nvar))
    b = np.concatenate(b_parts) if b_parts else np.zeros(0)
    P = sp.csc_matrix((nvar, nvar))
    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.tol_feas = options.get("tol_feas", 1e-8)
    settings.tol_gap_abs = options.get("tol_gap_abs", 1e-8)
    settings.tol_gap_rel = options.get("tol_gap_rel", 1e-8)
    settings.max_iter = options.get("max_iter", 200)
    t0 = time.perf_counter()
    try:
        sol = clarabel.DefaultSolver(P, c, A, b, cones, settings).solve()
    except BaseException as exc:  # the rust layer can panic on degenerate input
        raise SolverFailure(f"clarabel failed: {exc}") from exc
    dt = time.perf_counter() - t0
    status = str(sol.status)
    mapping = {
        "Solved": "optimal",
        "AlmostSolved": "inaccurate",
        "PrimalInfeasible": "infeasible",
        "AlmostPrimalInfeasible": "infeasible",
        "DualInfeasible": "failure",
        "AlmostDualInfeasible": "failure",
    }
    out_status = mapping.get(status, "failure")
    values = {}
    if out_status in ("optimal", "inaccurate"):
        values = _expand_params(problem, np.asarray(sol.x), col_map, n_full)
    return Solution(out_status, values, float(sol.obj_val), "clarabel", dt,
                    int(sol.iterations), diagnostics=status)


def _solve_cvxopt(problem: SdpProblem, verbose: bool, **options) -> Solution:
    from cvxopt import matrix as cvxmat
    from cvxopt import solvers as cvxsolvers
    from cvxopt import spmatrix

    blocks, c, col_map, n_full = _prune(problem)
    nvar = len(c)
    g_rows = []
    g_cols = []
    g_vals = []
    h_parts = []
    sdims = []
    row0 = 0
    for d, const, rws, cls, vls in blocks:
        g_rows.append(rws + row0)
        g_cols.append(cls)
        g_vals.append(-vls)
        h_parts.append(const.reshape(d * d, order="F"))
        sdims.append(d)
        row0 += d * d
    G = spmatrix(
        np.concatenate(g_vals) if g_vals else [],
        np.concatenate(g_rows).tolist() if g_rows else [],
        np.concatenate(g_cols).tolist() if g_cols else [],
        (row0, nvar),
    )
    h = cvxmat(np.concatenate(h_parts) if h_parts else np.zeros(0))
    opts = {
        "show_progress": verbose,
        "abstol": options.get("abstol", 1e-7),
        "reltol": options.get("reltol", 1e-7),
        "feastol": options.get("feastol", 1e-8),
        "maxiters": options.get("max_iter", 100),
        "refinement": options.get("refinement", 1),
    }
    t0 = time.perf_counter()
    try:
        # the LDL KKT solver tolerates the rank-degenerate problems that the
        # default Cholesky-based one rejects
        res = cvxsolvers.conelp(cvxmat(c), G, h, dims={"l": 0, "q": [], "s": sdims},
                                options=opts, kktsolver="ldl")
    except (ArithmeticError, ValueError, ZeroDivisionError) as exc:
        raise SolverFailure(f"cvxopt failed: {exc}") from exc
    dt = time.perf_counter() - t0
    mapping = {
        "optimal": "optimal",
        "primal infeasible": "infeasible",
        "dual infeasible": "failure",
        "unknown": "inaccurate",
    }
    out_status = mapping.get(res["status"], "failure")
    values = {}
    objective = float("nan")
    if res["x"] is not None and out_status in ("optimal", "inaccurate"):
        x = np.asarray(res["x"]).ravel()
        values = _expand_params(problem, x, col_map, n_full)
        objective = float(c @ x)
    return Solution(out_status, values, objective, "cvxopt", dt,
                    int(res.get("iterations", 0)), diagnostics=res["status"])


def export_problem(problem: SdpProblem, path: str) -> None:
    """Write the problem as documented sparse triplets for external debugging.

    Format (one record per line, 0-based indices)::

        nvars N / block K D        -- declarations
        c  j v                     -- objective entry
        C  k i j v                 -- constant of block k (M_k(x) >= 0 form)
        B  k j i1 j1 v             -- coefficient of x_j in block k
    """
    lines = [f"nvars {problem.n_params}"]
    blocks = problem.lowered_blocks()
    for k, (d, _, _, _, _) in enumerate(blocks):
        lines.append(f"block {k} {d}")
    c = problem.objective_vector()
    for j in np.nonzero(c)[0]:
        lines.append(f"c {j} {c[j]:.17g}")
    for k, (d, const, rws, cls, vls) in enumerate(blocks):
        ii, jj = np.nonzero(const)
        for i, j in zip(ii, jj):
            lines.append(f"C {k} {i} {j} {const[i, j]:.17g}")
        for r, cc, v in zip(rws, cls, vls):
            lines.append(f"B {k} {cc} {r % d} {r // d} {v:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
