"""State-space systems in feedback with a structured uncertainty channel.

The model is::

    dx/dt = A x  + B_d w_d + B_u u + B_w w
    z_d   = C_d x + D_dd w_d + D_du u + D_dw w
    z     = C_z x + D_zd w_d + D_zu u + D_zw w
    y     = C_y x + D_yd w_d + D_yu u

closed by ``w_d = Delta z_d`` with ``Delta`` described by an
:class:`~robustsat.lft.UncertaintyStructure`.  ``w -> z`` is the performance
channel, ``u`` the control input, ``y`` the measurement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IllPosed, StructureMismatch
from .lft import (
    DeltaSample,
    UncertaintyStructure,
    structure_from_json,
    structure_to_json,
)

__all__ = ["UncertainStateSpace", "SampledSystem"]


def _mat(value, rows: int, cols: int) -> np.ndarray:
    if value is None:
        return np.zeros((rows, cols))
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.shape == (0, 0) or m.size == 0:
        return np.zeros((rows, cols))
    if m.shape != (rows, cols):
        raise StructureMismatch(f"expected {rows}x{cols}, got {m.shape}")
    return m


@dataclass
class SampledSystem:
    """A plain linear system obtained by closing the uncertainty channel."""

    a: np.ndarray
    b_u: np.ndarray
    b_w: np.ndarray
    c_z: np.ndarray
    d_zu: np.ndarray
    d_zw: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def closed_loop(self, gain: np.ndarray) -> "SampledSystem":
        k = np.atleast_2d(gain)
        return SampledSystem(
            self.a + self.b_u @ k,
            np.zeros((self.n, 0)),
            self.b_w,
            self.c_z + self.d_zu @ k,
            np.zeros((self.c_z.shape[0], 0)),
            self.d_zw,
        )


class UncertainStateSpace:
    def __init__(self, a, b_delta=None, b_u=None, b_w=None, c_delta=None, c_z=None,
                 c_y=None, d_dd=None, d_du=None, d_dw=None, d_zd=None, d_zu=None,
                 d_zw=None, d_yd=None, d_yu=None,
                 structure: UncertaintyStructure | None = None,
                 state_names: list[str] | None = None,
                 input_names: list[str] | None = None,
                 output_names: list[str] | None = None):
        self.a = np.atleast_2d(np.asarray(a, dtype=float))
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise StructureMismatch("A must be square")
        self.structure = structure if structure is not None else UncertaintyStructure()
        q = self.structure.dim
        m = 0 if b_u is None else np.atleast_2d(np.asarray(b_u, float)).shape[1]
        nw = 0 if b_w is None else np.atleast_2d(np.asarray(b_w, float)).shape[1]
        nz = 0 if c_z is None else np.atleast_2d(np.asarray(c_z, float)).shape[0]
        ny = n if c_y is None else np.atleast_2d(np.asarray(c_y, float)).shape[0]
        self.b_delta = _mat(b_delta, n, q)
        self.b_u = _mat(b_u, n, m)
        self.b_w = _mat(b_w, n, nw)
        self.c_delta = _mat(c_delta, q, n)
        self.c_z = _mat(c_z, nz, n)
        self.c_y = np.eye(n) if c_y is None else _mat(c_y, ny, n)
        self.d_dd = _mat(d_dd, q, q)
        self.d_du = _mat(d_du, q, m)
        self.d_dw = _mat(d_dw, q, nw)
        self.d_zd = _mat(d_zd, nz, q)
        self.d_zu = _mat(d_zu, nz, m)
        self.d_zw = _mat(d_zw, nz, nw)
        self.d_yd = _mat(d_yd, ny, q)
        self.d_yu = _mat(d_yu, ny, m)
        self.state_names = list(state_names) if state_names else [f"x{i}" for i in range(n)]
        self.input_names = list(input_names) if input_names else [f"u{i}" for i in range(m)]
        self.output_names = list(output_names) if output_names else [f"z{i}" for i in range(nz)]
        if len(self.state_names) != n:
            raise StructureMismatch("state_names length mismatch")

    # -- dimensions --------------------------------------------------------

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def q(self) -> int:
        return self.structure.dim

    @property
    def m(self) -> int:
        return self.b_u.shape[1]

    @property
    def nw(self) -> int:
        return self.b_w.shape[1]

    @property
    def nz(self) -> int:
        return self.c_z.shape[0]

    def __repr__(self):
        return (f"UncertainStateSpace(n={self.n}, delta={self.q}, m={self.m}, "
                f"w={self.nw}, z={self.nz})")

    # -- channel closure ---------------------------------------------------

    def _closing_gain(self, sample: DeltaSample, rows: np.ndarray) -> np.ndarray:
        """W = Delta_s (I - D_ss Delta_s)^-1 on the selected channel rows."""
        delta = sample.expand()[np.ix_(rows, rows)]
        d_ss = self.d_dd[np.ix_(rows, rows)]
        closing = np.eye(len(rows)) - d_ss @ delta
        sv = np.linalg.svd(closing, compute_uv=False)
        if sv.size and sv.min() <= 1e-12 * sv.max():
            raise IllPosed("uncertainty channel closure is singular at this sample")
        return delta @ np.linalg.inv(closing)

    def close_delta(self, sample: DeltaSample) -> SampledSystem:
        """Close the whole channel at a sample, yielding a plain system."""
        if self.q == 0:
            return SampledSystem(self.a.copy(), self.b_u.copy(), self.b_w.copy(),
                                 self.c_z.copy(), self.d_zu.copy(), self.d_zw.copy())
        w = self._closing_gain(sample, np.arange(self.q))
        bw_ = self.b_delta @ w
        return SampledSystem(
            self.a + bw_ @ self.c_delta,
            self.b_u + bw_ @ self.d_du,
            self.b_w + bw_ @ self.d_dw,
            self.c_z + self.d_zd @ w @ self.c_delta,
            self.d_zu + self.d_zd @ w @ self.d_du,
            self.d_zw + self.d_zd @ w @ self.d_dw,
        )

    def close_partial(self, sample: DeltaSample, names: list[str]) -> "UncertainStateSpace":
        """Close only the named blocks, keeping the rest of the channel open."""
        keep_blocks = [b for b in self.structure.blocks if b.name not in names]
        close_rows = np.sort(np.concatenate(
            [self.structure.occupancy(n) for n in names])) if names else np.zeros(0, int)
        keep_rows = np.setdiff1d(np.arange(self.q), close_rows)
        if len(close_rows) == 0:
            return self
        w = self._closing_gain(sample, close_rows)
        bs = self.b_delta[:, close_rows] @ w
        cs = self.c_delta[close_rows, :]
        d_rs = self.d_dd[np.ix_(keep_rows, close_rows)] @ w
        d_zs = self.d_zd[:, close_rows] @ w
        d_sr = self.d_dd[np.ix_(close_rows, keep_rows)]
        d_su = self.d_du[close_rows, :]
        d_sw = self.d_dw[close_rows, :]
        return UncertainStateSpace(
            a=self.a + bs @ cs,
            b_delta=self.b_delta[:, keep_rows] + bs @ d_sr,
            b_u=self.b_u + bs @ d_su,
            b_w=self.b_w + bs @ d_sw,
            c_delta=self.c_delta[keep_rows, :] + d_rs @ cs,
            c_z=self.c_z + d_zs @ cs,
            c_y=self.c_y,
            d_dd=self.d_dd[np.ix_(keep_rows, keep_rows)] + d_rs @ d_sr,
            d_du=self.d_du[keep_rows, :] + d_rs @ d_su,
            d_dw=self.d_dw[keep_rows, :] + d_rs @ d_sw,
            d_zd=self.d_zd[:, keep_rows] + d_zs @ d_sr,
            d_zu=self.d_zu + d_zs @ d_su,
            d_zw=self.d_zw + d_zs @ d_sw,
            structure=UncertaintyStructure(keep_blocks),
            state_names=self.state_names,
            input_names=self.input_names,
            output_names=self.output_names,
        )

    def rescaled(self, scale: np.ndarray) -> "UncertainStateSpace":
        """Diagonal state re-scaling x' = diag(1/scale) x.

        Transfer levels, pole locations and uncertainty structure are
        unchanged; a gain K' designed on the scaled system maps back as
        K = K' diag(1/scale).
        """
        t = np.asarray(scale, dtype=float)
        if t.shape != (self.n,) or np.any(t <= 0):
            raise StructureMismatch("scale must be a positive vector of state length")
        ti = 1.0 / t
        return UncertainStateSpace(
            a=self.a * np.outer(ti, t),
            b_delta=self.b_delta * ti[:, None],
            b_u=self.b_u * ti[:, None],
            b_w=self.b_w * ti[:, None],
            c_delta=self.c_delta * t[None, :],
            c_z=self.c_z * t[None, :],
            c_y=self.c_y * t[None, :],
            d_dd=self.d_dd, d_du=self.d_du, d_dw=self.d_dw,
            d_zd=self.d_zd, d_zu=self.d_zu, d_zw=self.d_zw,
            d_yd=self.d_yd, d_yu=self.d_yu,
            structure=self.structure,
            state_names=self.state_names,
            input_names=self.input_names,
            output_names=self.output_names,
        )

    def with_feedback(self, gain: np.ndarray) -> "UncertainStateSpace":
        """Substitute u = K x; the uncertainty channel is preserved."""
        k = np.atleast_2d(np.asarray(gain, dtype=float))
        if k.shape != (self.m, self.n):
            raise StructureMismatch(f"gain must be {self.m}x{self.n}, got {k.shape}")
        return UncertainStateSpace(
            a=self.a + self.b_u @ k,
            b_delta=self.b_delta,
            b_w=self.b_w,
            c_delta=self.c_delta + self.d_du @ k,
            c_z=self.c_z + self.d_zu @ k,
            c_y=self.c_y + self.d_yu @ k,
            d_dd=self.d_dd,
            d_dw=self.d_dw,
            d_zd=self.d_zd,
            d_zw=self.d_zw,
            d_yd=self.d_yd,
            structure=self.structure,
            state_names=self.state_names,
            output_names=self.output_names,
        )

    # -- serialization -----------------------------------------------------

    _FIELDS = ("a", "b_delta", "b_u", "b_w", "c_delta", "c_z", "c_y", "d_dd",
               "d_du", "d_dw", "d_zd", "d_zu", "d_zw", "d_yd", "d_yu")

    def to_json(self, meta: dict | None = None) -> str:
        doc = {name: getattr(self, name).tolist() for name in self._FIELDS}
        doc["structure"] = structure_to_json(self.structure)
        doc["state_names"] = self.state_names
        doc["input_names"] = self.input_names
        doc["output_names"] = self.output_names
        if meta is not None:
            doc["meta"] = meta
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "UncertainStateSpace":
        doc = json.loads(text)
        kwargs = {name: np.asarray(doc[name], dtype=float) for name in cls._FIELDS}
        return cls(structure=structure_from_json(doc["structure"]),
                   state_names=doc.get("state_names"),
                   input_names=doc.get("input_names"),
                   output_names=doc.get("output_names"),
                   **kwargs)
