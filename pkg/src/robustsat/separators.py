"""Quadratic separators (multipliers) for structured uncertainty channels.

A separator here is a matrix multiplier ``Pi`` certifying

    [z; w]' Pi [z; w] >= 0     for every admissible pair  w = Delta z,

which is the ingredient that turns a Lyapunov inequality on the nominal
channel into a robust one.  Three families are provided:

* classical DG scalings for norm-bounded repeated scalars: one ``D > 0``
  (symmetric) and one skew ``G`` per scalar name, spread over every channel
  row that the name occupies;
* the generalized DG scaling for a symmetric matrix uncertainty repeated as
  ``Delta (x) I_2`` and constrained by a quadratic set ``(X, Y, Z)``, built
  from a 2x2 ``D > 0`` and a 2x2 skew ``G``;
* vertex separators for interval scalars: a full multiplier constrained by
  one LMI per extreme point of the box, plus concavity of the quadratic
  form (``Pi22 <= 0``) so vertex validity extends to the hull.

Every admissible channel matrix produced by this package is symmetric
(diagonal scalar patterns and ``Delta (x) I_2`` with symmetric ``Delta``),
so the same separator serves the primal pairing ``w = Delta z`` used in
analysis and the transposed pairing used in state-feedback synthesis.

The sign convention of the returned test matrices follows
``theta = [[-D, G], [G', D]]`` with ``[I Delta] theta [I; Delta'] <= 0``;
the multiplier above is the corresponding ``Pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingFit, TooManyVertices, UnsupportedBlock
from .lft import ScalarRepeated, SymmetricSet, UncertaintyStructure
from .sampling import vertices as enumerate_vertices
from .sdp import LinMatIneq, SdpProblem, Term

__all__ = [
    "Separator",
    "dg_separator",
    "symmetric_dg_separator",
    "vertex_separator",
    "make_separator",
    "dg_theta",
    "symmetric_dg_theta",
]

#: Floor applied to D >= floor*I so that "D positive definite" is strict.
D_FLOOR = 1e-9

#: Guard on 2^N constraints in the vertex separator.
MAX_VERTEX_SEPARATOR_NAMES = 16


def _selector(total: int, idx: np.ndarray) -> np.ndarray:
    q = np.zeros((total, len(idx)))
    q[idx, np.arange(len(idx))] = 1.0
    return q


@dataclass
class Separator:
    """Multiplier pieces plus the side constraints its variables must satisfy."""

    structure: UncertaintyStructure
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    # lists of (L, var, R, op, kron_reps) describing Pi11, Pi12, Pi22
    p11: list = field(default_factory=list)
    p12: list = field(default_factory=list)
    p22: list = field(default_factory=list)

    def emit(self, s1: np.ndarray, s2: np.ndarray) -> list[Term]:
        """Terms of ``S' Pi S`` for the stacked channel map S = [s1; s2].

        ``s1`` maps the outer test vector to z, ``s2`` to w.
        """
        out: list[Term] = []
        for left, var, right, op, k in self.p11:
            out.append(Term(s1.T @ left, var, right @ s1, op, k))
        for left, var, right, op, k in self.p22:
            out.append(Term(s2.T @ left, var, right @ s2, op, k))
        for left, var, right, op, k in self.p12:
            t = Term(s1.T @ left, var, right @ s2, op, k)
            out.append(t)
            out.append(t.transposed())
        return out

    def pi_matrix(self, values: dict) -> np.ndarray:
        """Numeric multiplier [[Pi11, Pi12], [Pi12', Pi22]] at solved values."""
        q = self.structure.dim
        pi = np.zeros((2 * q, 2 * q))
        for left, var, right, op, k in self.p11:
            pi[:q, :q] += Term(left, var, right, op, k).value(values[var.name])
        for left, var, right, op, k in self.p22:
            pi[q:, q:] += Term(left, var, right, op, k).value(values[var.name])
        for left, var, right, op, k in self.p12:
            blk = Term(left, var, right, op, k).value(values[var.name])
            pi[:q, q:] += blk
            pi[q:, :q] += blk.T
        return pi

    def merge(self, other: "Separator") -> "Separator":
        return Separator(
            self.structure,
            self.variables + other.variables,
            self.constraints + other.constraints,
            self.p11 + other.p11,
            self.p12 + other.p12,
            self.p22 + other.p22,
        )


_SEP_COUNT = [0]


def _fresh(tag: str) -> str:
    _SEP_COUNT[0] += 1
    return f"{tag}_{_SEP_COUNT[0]}"


def dg_separator(problem: SdpProblem, structure: UncertaintyStructure,
                 names: list[str] | None = None) -> Separator:
    """Classical DG scalings for the scalar names of a structure.

    For a name occupying r channel rows (over all its diagonal blocks) the
    multiplier carries ``D`` symmetric positive definite of size r and ``G``
    skew of size r.  Scalar bounds must be symmetric, ``|delta| <= b``; the
    certified form is then ``(b^2 - delta^2) D >= 0``.
    """
    q = structure.dim
    sep = Separator(structure)
    for name in (names if names is not None else structure.names):
        blk = structure.block_of(name)
        if not isinstance(blk, ScalarRepeated):
            continue
        lo, hi = blk.bound.lo, blk.bound.hi
        if abs(lo + hi) > 1e-12 * max(1.0, abs(hi)):
            raise UnsupportedBlock(
                f"DG scaling needs a symmetric bound for {name!r}, got [{lo}, {hi}]"
            )
        occ = structure.occupancy(name)
        r = len(occ)
        sel = _selector(q, occ)
        d = problem.add_variable(_fresh(f"D_{name}"), "symmetric", r)
        sep.variables.append(d)
        con = LinMatIneq(-D_FLOOR * np.eye(r), [Term(np.eye(r), d, np.eye(r))],
                         ">=", label=f"{d.name} > 0")
        problem.add_constraint(con)
        sep.constraints.append(con)
        sep.p11.append((hi * hi * sel, d, sel.T, "v", 1))
        sep.p22.append((-sel, d, sel.T, "v", 1))
        if r > 1:
            g = problem.add_variable(_fresh(f"G_{name}"), "skew", r)
            sep.variables.append(g)
            sep.p12.append((sel, g, sel.T, "v", 1))
    return sep


def symmetric_dg_separator(problem: SdpProblem, structure: UncertaintyStructure,
                           name: str) -> Separator:
    """Generalized DG scaling for a quadratically constrained symmetric block.

    The block must enter the channel as ``Delta (x) I_2``.  With the set
    matrices (X, Y, Z) the multiplier is the negative of

        theta = [[X (x) D, Y (x) D + I (x) G], [Y (x) D - I (x) G, Z (x) D]]

    whose validity follows from the G-terms cancelling against a symmetric
    Delta, leaving D (x) (set membership form).
    """
    blk = structure.block_of(name)
    if not isinstance(blk, SymmetricSet):
        raise MissingFit(f"{name!r} is not a symmetric-set block")
    if blk.kron_reps != 2:
        raise UnsupportedBlock("the generalized DG scaling is built for Delta (x) I_2")
    q = structure.dim
    occ = structure.occupancy(name)
    sel = _selector(q, occ)
    n = blk.dim
    sep = Separator(structure)
    d = problem.add_variable(_fresh(f"D_{name}"), "symmetric", 2)
    g = problem.add_variable(_fresh(f"G_{name}"), "skew", 2)
    sep.variables += [d, g]
    con = LinMatIneq(-D_FLOOR * np.eye(2), [Term(np.eye(2), d, np.eye(2))],
                     ">=", label=f"{d.name} > 0")
    problem.add_constraint(con)
    sep.constraints.append(con)
    eye2 = np.eye(2)
    sep.p11.append((-sel @ np.kron(blk.x, eye2), d, sel.T, "kron", n))
    sep.p12.append((-sel @ np.kron(blk.y, eye2), d, sel.T, "kron", n))
    sep.p12.append((-sel, g, sel.T, "kron", n))
    sep.p22.append((-sel @ np.kron(blk.z, eye2), d, sel.T, "kron", n))
    return sep


def vertex_separator(problem: SdpProblem, structure: UncertaintyStructure,
                     names: list[str] | None = None,
                     max_names: int = MAX_VERTEX_SEPARATOR_NAMES) -> Separator:
    """Full-block separator for interval scalars with one LMI per vertex.

    The multiplier blocks are free symmetric/rectangular matrices over the
    scalar rows; ``Pi22 <= 0`` makes the channel quadratic form concave in
    Delta, so the 2^N vertex inequalities extend to the whole box.  Less
    conservative than DG scalings, at the price of 2^N constraints.
    """
    chosen = [n for n in (names if names is not None else structure.names)
              if isinstance(structure.block_of(n), ScalarRepeated)]
    if not chosen:
        raise UnsupportedBlock("vertex separator needs at least one scalar name")
    if len(chosen) > max_names:
        raise TooManyVertices(
            f"{len(chosen)} interval scalars would need 2^{len(chosen)} vertex LMIs"
        )
    q = structure.dim
    rows = np.concatenate([structure.occupancy(n) for n in chosen])
    rows = np.sort(rows)
    r = len(rows)
    sel = _selector(q, rows)
    sub_blocks = []
    for blk, off in structure.offsets():
        if blk.name in chosen:
            sub_blocks.append(blk)
    sub = UncertaintyStructure(sub_blocks)
    p11 = problem.add_variable(_fresh("Pi11"), "symmetric", r)
    p12 = problem.add_variable(_fresh("Pi12"), "rectangular", r, r)
    p22 = problem.add_variable(_fresh("Pi22"), "symmetric", r)
    sep = Separator(structure, variables=[p11, p12, p22])
    eye = np.eye(r)
    concave = LinMatIneq(np.zeros((r, r)), [Term(eye, p22, eye)], "<=",
                         label=f"{p22.name} <= 0")
    problem.add_constraint(concave)
    sep.constraints.append(concave)
    # sub-blocks keep declaration order, so sub.expand() already lays the
    # kept rows out in ascending global order, matching `rows`.
    for k, vert in enumerate(enumerate_vertices(sub)):
        dv = vert.expand()
        con = LinMatIneq(
            np.zeros((r, r)),
            [
                Term(eye, p11, eye),
                Term(eye, p12, dv),
                Term(dv, p12, eye, "vT"),
                Term(dv, p22, dv),
            ],
            ">=",
            label=f"vertex {k}",
        )
        problem.add_constraint(con)
        sep.constraints.append(con)
    sep.p11.append((sel, p11, sel.T, "v", 1))
    sep.p12.append((sel, p12, sel.T, "v", 1))
    sep.p22.append((sel, p22, sel.T, "v", 1))
    return sep


def make_separator(problem: SdpProblem, structure: UncertaintyStructure,
                   scalar_kind: str = "dg") -> Separator:
    """Build the combined multiplier for a mixed structure.

    Scalar blocks are covered either by DG scalings (``scalar_kind='dg'``)
    or a joint vertex separator (``'vertex'``); every symmetric-set block
    gets its own generalized DG scaling.
    """
    scalar_names = [n for n in structure.names
                    if isinstance(structure.block_of(n), ScalarRepeated)]
    sym_names = [n for n in structure.names
                 if isinstance(structure.block_of(n), SymmetricSet)]
    sep = Separator(structure)
    if scalar_names:
        if scalar_kind == "dg":
            sep = sep.merge(dg_separator(problem, structure, scalar_names))
        elif scalar_kind == "vertex":
            sep = sep.merge(vertex_separator(problem, structure, scalar_names))
        else:
            raise UnsupportedBlock(f"unknown scalar separator kind {scalar_kind!r}")
    for name in sym_names:
        sep = sep.merge(symmetric_dg_separator(problem, structure, name))
    return sep


def dg_theta(d: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Numeric test matrix [[-D, G], [G', D]] of the classical DG scaling."""
    d = np.atleast_2d(d)
    g = np.atleast_2d(g)
    return np.block([[-d, g], [g.T, d]])


def symmetric_dg_theta(x: np.ndarray, y: np.ndarray, z: np.ndarray,
                       d: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Numeric generalized DG test matrix for a symmetric-set block."""
    i_g = np.kron(np.eye(x.shape[0]), g)
    return np.block([
        [np.kron(x, d), np.kron(y, d) + i_g],
        [np.kron(y, d) - i_g, np.kron(z, d)],
    ])
