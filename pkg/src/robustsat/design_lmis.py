"""Robust synthesis and analysis LMIs for uncertain state-space plants.

Synthesis inequalities are written in the dual (state-feedback) variables
``P = P' > 0`` and ``Y`` with the gain recovered as ``K = Y P^-1``; the
uncertainty channel is absorbed by a quadratic separator acting on the
transposed pairing, which coincides with the primal one because every
admissible channel matrix here is symmetric.  Analysis inequalities use the
primal Lyapunov variable directly.

Performance encodings (levels, not squared levels):

* H-infinity: bounded-real inequality with level ``gamma``;
* impulse-to-peak: covariance injection ``B_w B_w' <= g P`` and output peak
  ``C_cl P C_cl' <= g I`` certify a peak of at most ``g`` for an impulse on
  each disturbance column (equivalently the matching initial condition);
* half-plane pole regions ``Re s < off`` / ``Re s > off``.

Every strict inequality carries an explicit margin ``1e-8 * scale`` on the
right-hand side.
"""

from __future__ import annotations

import numpy as np

from .errors import StructureMismatch
from .sdp import LinMatIneq, SdpProblem, Term
from .separators import Separator
from .uss import UncertainStateSpace

__all__ = [
    "HalfPlane",
    "lmi_margin",
    "assemble_sf_hinf",
    "assemble_sf_i2p",
    "assemble_sf_dstability",
    "assemble_an_hinf",
    "assemble_an_i2p",
    "assemble_an_dstability",
]

MARGIN_REL = 1e-8


class HalfPlane:
    """Pole region ``Re s < offset`` (angle 0) or ``Re s > offset`` (angle pi)."""

    def __init__(self, offset: float, angle: float = 0.0):
        if not (abs(angle) < 1e-9 or abs(angle - np.pi) < 1e-9):
            raise StructureMismatch("only half-planes with angle 0 or pi are supported")
        self.offset = float(offset)
        self.flipped = abs(angle - np.pi) < 1e-9

    def __repr__(self):
        op = ">" if self.flipped else "<"
        return f"HalfPlane(Re s {op} {self.offset})"


def lmi_margin(*mats) -> float:
    scale = 1.0
    for m in mats:
        if m is not None and np.size(m):
            scale = max(scale, float(np.max(np.abs(m))))
    return MARGIN_REL * scale


def _sel(total: int, start: int, size: int) -> np.ndarray:
    e = np.zeros((total, size))
    e[np.arange(start, start + size), np.arange(size)] = 1.0
    return e


def _sym_pair(left, var, right, op="v") -> list[Term]:
    t = Term(left, var, right, op)
    return [t, t.transposed()]


def _lyap_terms(plant: UncertainStateSpace, p, y, e_x) -> list[Term]:
    """Terms of {A P + B_u Y}^S embedded at the x-block."""
    terms = _sym_pair(e_x @ plant.a, p, e_x.T)
    if plant.m:
        terms += _sym_pair(e_x @ plant.b_u, y, e_x.T)
    return terms


def _channel_rows_synth(plant: UncertainStateSpace, p, y, e_x, e_wt) -> list[Term]:
    """Terms of the (channel, x) coupling C_K P = C_d P + D_du Y, symmetrized."""
    terms = _sym_pair(e_wt @ plant.c_delta, p, e_x.T)
    if plant.m:
        terms += _sym_pair(e_wt @ plant.d_du, y, e_x.T)
    return terms


def assemble_sf_hinf(problem: SdpProblem, plant: UncertainStateSpace, p, y, gamma,
                     separator_factory=None, label: str = "hinf") -> LinMatIneq:
    """Robust state-feedback H-infinity synthesis inequality at level gamma."""
    n, q, nw, nz = plant.n, plant.q, plant.nw, plant.nz
    if nw == 0 or nz == 0:
        raise StructureMismatch("H-infinity synthesis needs a w -> z channel")
    total = n + q + nz + nw
    e_x = _sel(total, 0, n)
    e_wt = _sel(total, n, q)
    e_wp = _sel(total, n + q, nz)
    e_s = _sel(total, n + q + nz, nw)
    const = np.zeros((total, total))
    blk = e_x @ plant.b_w @ e_s.T
    const += blk + blk.T
    blk = e_wt @ plant.d_dw @ e_s.T
    const += blk + blk.T
    blk = e_wp @ plant.d_zw @ e_s.T
    const += blk + blk.T
    terms = _lyap_terms(plant, p, y, e_x)
    terms += _channel_rows_synth(plant, p, y, e_x, e_wt)
    terms += _sym_pair(e_wp @ plant.c_z, p, e_x.T)
    if plant.m:
        terms += _sym_pair(e_wp @ plant.d_zu, y, e_x.T)
    terms.append(Term(-e_wp, gamma, e_wp.T, "kron", nz))
    terms.append(Term(-e_s, gamma, e_s.T, "kron", nw))
    if q:
        s1 = np.zeros((q, total))
        s1[:, :n] = plant.b_delta.T
        s1[:, n:n + q] = plant.d_dd.T
        s1[:, n + q:n + q + nz] = plant.d_zd.T
        s2 = e_wt.T
        sep: Separator = separator_factory(plant.structure)
        terms += sep.emit(s1, s2)
    margin = lmi_margin(plant.a, plant.b_w, plant.c_z)
    con = LinMatIneq(const + margin * np.eye(total), terms, "<=", label=label)
    problem.add_constraint(con)
    return con


def assemble_sf_i2p(problem: SdpProblem, plant: UncertainStateSpace, p, y, t,
                    separator_factory=None, include_decay: bool = True,
                    label: str = "i2p") -> list[LinMatIneq]:
    """Robust impulse-to-peak synthesis inequalities; ``t`` is the squared peak.

    Covariance injection ``P >= B_w B_w'`` pins the Lyapunov scale (each
    impulse starts inside the unit invariant ellipsoid of P) and the output
    condition bounds ``C_cl P C_cl' <= t I``; the certified peak is sqrt(t).
    """
    n, q, nw, nz = plant.n, plant.q, plant.nw, plant.nz
    if nw == 0 or nz == 0:
        raise StructureMismatch("impulse-to-peak synthesis needs a w -> z channel")
    if np.any(plant.d_zd) or np.any(plant.d_zw):
        raise StructureMismatch(
            "impulse-to-peak assumes no feedthrough into z (D_zd = D_zw = 0)"
        )
    out = []
    cov = LinMatIneq(-plant.b_w @ plant.b_w.T, [Term(np.eye(n), p, np.eye(n))],
                     ">=", label=f"{label} cov")
    problem.add_constraint(cov)
    out.append(cov)
    # output peak: [[P, (C_z P + D_zu Y)'], [C_z P + D_zu Y, t I]] >= 0
    tot = n + nz
    e1, e2 = _sel(tot, 0, n), _sel(tot, n, nz)
    terms = [Term(e1, p, e1.T), Term(e2, t, e2.T, "kron", nz)]
    terms += _sym_pair(e2 @ plant.c_z, p, e1.T)
    if plant.m:
        terms += _sym_pair(e2 @ plant.d_zu, y, e1.T)
    peak = LinMatIneq(np.zeros((tot, tot)), terms, ">=", label=f"{label} peak")
    problem.add_constraint(peak)
    out.append(peak)
    if include_decay:
        out.append(assemble_sf_dstability(problem, plant, p, y, HalfPlane(0.0),
                                          separator_factory, label=f"{label} decay"))
    return out


def assemble_sf_dstability(problem: SdpProblem, plant: UncertainStateSpace, p, y,
                           region: HalfPlane, separator_factory=None,
                           label: str = "dstab") -> LinMatIneq:
    """Robust half-plane pole-placement synthesis inequality."""
    n, q = plant.n, plant.q
    sgn = -1.0 if region.flipped else 1.0
    total = n + q
    e_x = _sel(total, 0, n)
    e_wt = _sel(total, n, q)
    terms = []
    for t in _lyap_terms(plant, p, y, e_x):
        terms.append(Term(sgn * np.asarray(t.left), t.var, t.right, t.op, t.kron_reps))
    terms.append(Term(-2.0 * sgn * region.offset * e_x, p, e_x.T))
    if q:
        terms += _channel_rows_synth(plant, p, y, e_x, e_wt)
        s1 = np.zeros((q, total))
        s1[:, :n] = sgn * plant.b_delta.T
        s1[:, n:] = plant.d_dd.T
        sep: Separator = separator_factory(plant.structure)
        terms += sep.emit(s1, e_wt.T)
    margin = lmi_margin(plant.a)
    con = LinMatIneq(margin * np.eye(total), terms, "<=", label=label)
    problem.add_constraint(con)
    return con


# ---------------------------------------------------------------------------
# Analysis (closed loop, primal Lyapunov variable)


def assemble_an_hinf(problem: SdpProblem, clsys: UncertainStateSpace, p, gamma,
                     separator_factory=None, label: str = "an hinf") -> LinMatIneq:
    """Robust H-infinity analysis upper-bound inequality for a closed loop."""
    n, q, nw, nz = clsys.n, clsys.q, clsys.nw, clsys.nz
    if nw == 0 or nz == 0:
        raise StructureMismatch("H-infinity analysis needs a w -> z channel")
    total = n + q + nw + nz
    e_x = _sel(total, 0, n)
    e_wd = _sel(total, n, q)
    e_w = _sel(total, n + q, nw)
    e_s = _sel(total, n + q + nw, nz)
    const = np.zeros((total, total))
    for left, mat in ((e_x, clsys.c_z.T), (e_wd, clsys.d_zd.T), (e_w, clsys.d_zw.T)):
        blk = left @ mat @ e_s.T
        const += blk + blk.T
    terms = _sym_pair(e_x @ clsys.a.T, p, e_x.T)
    terms += _sym_pair(e_x, p, clsys.b_delta @ e_wd.T)
    terms += _sym_pair(e_x, p, clsys.b_w @ e_w.T)
    terms.append(Term(-e_w, gamma, e_w.T, "kron", nw))
    terms.append(Term(-e_s, gamma, e_s.T, "kron", nz))
    if q:
        s1 = np.zeros((q, total))
        s1[:, :n] = clsys.c_delta
        s1[:, n:n + q] = clsys.d_dd
        s1[:, n + q:n + q + nw] = clsys.d_dw
        sep: Separator = separator_factory(clsys.structure)
        terms += sep.emit(s1, e_wd.T)
    margin = lmi_margin(clsys.a, clsys.b_w, clsys.c_z)
    con = LinMatIneq(const + margin * np.eye(total), terms, "<=", label=label)
    problem.add_constraint(con)
    return con


def assemble_an_i2p(problem: SdpProblem, clsys: UncertainStateSpace, p, t,
                    separator_factory=None, label: str = "an i2p") -> list[LinMatIneq]:
    """Robust impulse-to-peak analysis inequalities; ``t`` is the squared peak.

    Primal form: every impulse column starts inside the unit level set of
    ``V = x' P x`` (``B_w' P B_w <= I``) and the output condition
    ``C_z' C_z <= t P`` bounds the squared peak by ``t``.
    """
    n, nw, nz = clsys.n, clsys.nw, clsys.nz
    if nw == 0 or nz == 0:
        raise StructureMismatch("impulse-to-peak analysis needs a w -> z channel")
    if np.any(clsys.d_zd) or np.any(clsys.d_zw):
        raise StructureMismatch(
            "impulse-to-peak assumes no feedthrough into z (D_zd = D_zw = 0)"
        )
    out = [assemble_an_dstability(problem, clsys, p, HalfPlane(0.0),
                                  separator_factory, label=f"{label} decay")]
    cov = LinMatIneq(np.eye(nw), [Term(-clsys.b_w.T, p, clsys.b_w)],
                     ">=", label=f"{label} cov")
    problem.add_constraint(cov)
    out.append(cov)
    tot = n + nz
    e1, e2 = _sel(tot, 0, n), _sel(tot, n, nz)
    blk = e1 @ clsys.c_z.T @ e2.T
    peak = LinMatIneq(blk + blk.T,
                      [Term(e1, p, e1.T), Term(e2, t, e2.T, "kron", nz)],
                      ">=", label=f"{label} peak")
    problem.add_constraint(peak)
    out.append(peak)
    return out


def assemble_an_dstability(problem: SdpProblem, clsys: UncertainStateSpace, p,
                           region: HalfPlane, separator_factory=None,
                           label: str = "an dstab") -> LinMatIneq:
    """Robust half-plane pole-location analysis inequality for a closed loop."""
    n, q = clsys.n, clsys.q
    sgn = -1.0 if region.flipped else 1.0
    total = n + q
    e_x = _sel(total, 0, n)
    e_wd = _sel(total, n, q)
    terms = _sym_pair(sgn * e_x @ clsys.a.T, p, e_x.T)
    terms.append(Term(-2.0 * sgn * region.offset * e_x, p, e_x.T))
    if q:
        terms += _sym_pair(sgn * e_x, p, clsys.b_delta @ e_wd.T)
        s1 = np.zeros((q, total))
        s1[:, :n] = clsys.c_delta
        s1[:, n:] = clsys.d_dd
        sep: Separator = separator_factory(clsys.structure)
        terms += sep.emit(s1, e_wd.T)
    margin = lmi_margin(clsys.a)
    con = LinMatIneq(margin * np.eye(total), terms, "<=", label=label)
    problem.add_constraint(con)
    return con
