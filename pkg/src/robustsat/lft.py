"""Star-product algebra over matrices with structured uncertainty channels.

A linear-fractional transformation (LFT) is stored as four coefficient
blocks ``(m_d, m_c, m_b, m_a)`` and evaluates, for an uncertainty matrix
``Delta`` closing the upper channel, to::

    M(Delta) = m_a + m_b @ Delta @ inv(I - m_d @ Delta) @ m_c

``Delta`` is block-diagonal and described by an :class:`UncertaintyStructure`:
an ordered list of scalar-repeated blocks (norm-bounded or interval scalars,
each repeated over an identity) and symmetric matrix blocks constrained by a
convex quadratic set and repeated through a Kronecker product.

All matrices are dense, real and immutable after construction.  Operations
are pure functions, so every object in this module is safe to share between
worker processes or threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    DegenerateInterval,
    IllPosed,
    StructureMismatch,
    UnsupportedBlock,
)

__all__ = [
    "NormBounded",
    "Interval",
    "ScalarRepeated",
    "SymmetricSet",
    "UncertaintyStructure",
    "DeltaSample",
    "Lft",
    "star_eval",
    "diag_concat",
    "star_compose",
    "lft_affine",
    "constant_lft",
    "normalize_interval",
    "lft_to_json",
    "lft_from_json",
]

#: Max-abs tolerance below which two LFTs are considered structurally equal.
STRUCTURAL_EQ_TOL = 1e-12

#: Reciprocal condition number below which I - M_d*Delta counts as singular.
WELLPOSED_RCOND = 1e-12

#: Tolerance on quadratic-set membership for symmetric uncertainty values.
MEMBERSHIP_TOL = 1e-9


def _as_matrix(a, rows=None, cols=None) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if rows is not None and m.shape == (0, 0):
        m = np.zeros((rows, cols))
    return m


def _freeze(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=float, copy=True)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class NormBounded:
    """Scalar bound |delta| <= 1."""

    @property
    def lo(self) -> float:
        return -1.0

    @property
    def hi(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Interval:
    """Scalar bound delta in [lo, hi] with lo < hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DegenerateInterval(f"interval [{self.lo}, {self.hi}] has lo >= hi")


Bound = Union[NormBounded, Interval]


@dataclass(frozen=True)
class ScalarRepeated:
    """One scalar uncertainty repeated over an identity block.

    The same ``name`` may appear in several blocks of a structure; all of
    them share a single scalar value.  ``reps`` is the identity size of this
    block only.
    """

    name: str
    reps: int
    bound: Bound = field(default_factory=NormBounded)

    def __post_init__(self):
        if self.reps < 1:
            raise StructureMismatch(f"block {self.name!r} has reps {self.reps} < 1")

    @property
    def dim(self) -> int:
        return self.reps


@dataclass(frozen=True)
class SymmetricSet:
    """A symmetric matrix uncertainty constrained by a quadratic set.

    Membership of a symmetric ``Delta`` means::

        [I  Delta] [[X, Y], [Y, Z]] [I; Delta]  =  X + Y@Delta + Delta@Y + Delta@Z@Delta  <=  0

    with ``Z >= I``.  The block enters the channel as ``Delta (x) I_k`` with
    ``k = kron_reps``.
    """

    name: str
    dim: int
    kron_reps: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for attr in ("x", "y", "z"):
            m = _freeze(_as_matrix(getattr(self, attr)))
            if m.shape != (self.dim, self.dim):
                raise StructureMismatch(
                    f"set matrix {attr} of {self.name!r} must be {self.dim}x{self.dim}"
                )
            if not np.allclose(m, m.T, atol=1e-12):
                raise StructureMismatch(f"set matrix {attr} of {self.name!r} not symmetric")
            object.__setattr__(self, attr, m)
        if np.linalg.eigvalsh(self.z).min() < 1.0 - 1e-9:
            raise StructureMismatch(f"set matrix Z of {self.name!r} violates Z >= I")

    @property
    def block_dim(self) -> int:
        return self.dim * self.kron_reps

    @property
    def center(self) -> np.ndarray:
        """Center of the quadratic set, -Y @ inv(Z)."""
        return -np.linalg.solve(self.z.T, self.y.T).T

    def membership_residual(self, delta: np.ndarray) -> float:
        """Largest eigenvalue of the set quadratic form at ``delta`` (<= 0 inside)."""
        q = self.x + self.y @ delta + delta @ self.y + delta @ self.z @ delta
        return float(np.linalg.eigvalsh(q).max())


Block = Union[ScalarRepeated, SymmetricSet]


class UncertaintyStructure:
    """Ordered block description of a block-diagonal uncertainty channel."""

    def __init__(self, blocks: Iterable[Block] = ()):
        self.blocks = tuple(blocks)
        for blk in self.blocks:
            if not isinstance(blk, (ScalarRepeated, SymmetricSet)):
                raise UnsupportedBlock(f"unknown block type {type(blk).__name__}")
        # Consistency of duplicated names: same kind and same bound/set data.
        seen: dict[str, Block] = {}
        for blk in self.blocks:
            prev = seen.get(blk.name)
            if prev is None:
                seen[blk.name] = blk
            elif type(prev) is not type(blk) or (
                isinstance(blk, ScalarRepeated) and prev.bound != blk.bound
            ):
                raise StructureMismatch(f"blocks named {blk.name!r} disagree")

    @property
    def dim(self) -> int:
        return sum(b.dim if isinstance(b, ScalarRepeated) else b.block_dim for b in self.blocks)

    @property
    def names(self) -> tuple[str, ...]:
        """Distinct uncertainty names in order of first appearance."""
        out: list[str] = []
        for b in self.blocks:
            if b.name not in out:
                out.append(b.name)
        return tuple(out)

    def block_of(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def occurrence_count(self, name: str) -> int:
        """Number of diagonal blocks carrying ``name``."""
        return sum(1 for b in self.blocks if b.name == name)

    def total_reps(self, name: str) -> int:
        """Total channel rows occupied by ``name``."""
        return sum(
            (b.dim if isinstance(b, ScalarRepeated) else b.block_dim)
            for b in self.blocks
            if b.name == name
        )

    def offsets(self) -> list[tuple[Block, int]]:
        """(block, channel offset) pairs in declaration order."""
        out = []
        pos = 0
        for b in self.blocks:
            out.append((b, pos))
            pos += b.dim if isinstance(b, ScalarRepeated) else b.block_dim
        return out

    def occupancy(self, name: str) -> np.ndarray:
        """Channel row indices occupied by ``name``, in channel order."""
        idx: list[int] = []
        for b, off in self.offsets():
            if b.name == name:
                d = b.dim if isinstance(b, ScalarRepeated) else b.block_dim
                idx.extend(range(off, off + d))
        return np.asarray(idx, dtype=int)

    @property
    def is_scalar_only(self) -> bool:
        return all(isinstance(b, ScalarRepeated) for b in self.blocks)

    def concat(self, other: "UncertaintyStructure") -> "UncertaintyStructure":
        return UncertaintyStructure(self.blocks + other.blocks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, UncertaintyStructure):
            return NotImplemented
        if len(self.blocks) != len(other.blocks):
            return False
        for a, b in zip(self.blocks, other.blocks):
            if type(a) is not type(b) or a.name != b.name:
                return False
            if isinstance(a, ScalarRepeated):
                if a.reps != b.reps or a.bound != b.bound:
                    return False
            else:
                if a.dim != b.dim or a.kron_reps != b.kron_reps:
                    return False
                for attr in ("x", "y", "z"):
                    if not np.allclose(getattr(a, attr), getattr(b, attr), atol=1e-12):
                        return False
        return True

    def __repr__(self) -> str:
        parts = []
        for b in self.blocks:
            if isinstance(b, ScalarRepeated):
                parts.append(f"{b.name}*I{b.reps}")
            else:
                parts.append(f"{b.name}({b.dim}x{b.dim})(x)I{b.kron_reps}")
        return "UncertaintyStructure(" + ", ".join(parts) + ")"


class DeltaSample:
    """Numeric values for every named uncertainty of a structure.

    Scalar names map to floats, symmetric-set names to symmetric matrices.
    ``expand()`` produces the full block-diagonal channel matrix with every
    repetition applied.
    """

    def __init__(self, structure: UncertaintyStructure, values: Mapping[str, object],
                 check: bool = True):
        self.structure = structure
        vals: dict[str, object] = {}
        for name in structure.names:
            if name not in values:
                raise StructureMismatch(f"sample missing value for {name!r}")
            blk = structure.block_of(name)
            if isinstance(blk, ScalarRepeated):
                v = float(values[name])
                if check:
                    lo, hi = blk.bound.lo, blk.bound.hi
                    if not (lo - MEMBERSHIP_TOL <= v <= hi + MEMBERSHIP_TOL):
                        raise StructureMismatch(
                            f"value {v} for {name!r} outside [{lo}, {hi}]"
                        )
                vals[name] = v
            else:
                m = _freeze(_as_matrix(values[name]))
                if m.shape != (blk.dim, blk.dim) or not np.allclose(m, m.T, atol=1e-12):
                    raise StructureMismatch(f"value for {name!r} must be symmetric {blk.dim}x{blk.dim}")
                if check and blk.membership_residual(m) > MEMBERSHIP_TOL:
                    raise StructureMismatch(f"value for {name!r} outside its quadratic set")
                vals[name] = m
        self.values = vals

    def __getitem__(self, name: str):
        return self.values[name]

    def expand(self) -> np.ndarray:
        """Full block-diagonal Delta with repetitions applied."""
        n = self.structure.dim
        out = np.zeros((n, n))
        for blk, off in self.structure.offsets():
            if isinstance(blk, ScalarRepeated):
                d = blk.reps
                out[off:off + d, off:off + d] = self.values[blk.name] * np.eye(d)
            else:
                d = blk.block_dim
                out[off:off + d, off:off + d] = np.kron(self.values[blk.name],
                                                        np.eye(blk.kron_reps))
        return out

    @classmethod
    def zero(cls, structure: UncertaintyStructure) -> "DeltaSample":
        """The nominal sample: zero scalars and set centers clipped to zero.

        Scalar blocks always admit 0 only if their bound contains it; for a
        nominal evaluation of interval blocks not containing 0 the midpoint
        is used instead.
        """
        vals: dict[str, object] = {}
        for name in structure.names:
            blk = structure.block_of(name)
            if isinstance(blk, ScalarRepeated):
                lo, hi = blk.bound.lo, blk.bound.hi
                vals[name] = 0.0 if lo <= 0.0 <= hi else 0.5 * (lo + hi)
            else:
                vals[name] = np.zeros((blk.dim, blk.dim))
        return cls(structure, vals, check=False)


class Lft:
    """Linear-fractional representation ``m_a + m_b Delta (I - m_d Delta)^-1 m_c``."""

    def __init__(self, m_d, m_c, m_b, m_a, structure: UncertaintyStructure):
        na = _as_matrix(m_a)
        q = structure.dim
        nd = _as_matrix(m_d, q, q)
        nc = _as_matrix(m_c, q, na.shape[1])
        nb = _as_matrix(m_b, na.shape[0], q)
        if q == 0:
            nd = nd.reshape(0, 0)
            nc = nc.reshape(0, na.shape[1])
            nb = nb.reshape(na.shape[0], 0)
        if nd.shape[0] != nd.shape[1]:
            raise StructureMismatch(f"m_d must be square, got {nd.shape}")
        if nd.shape[0] != q:
            raise StructureMismatch(
                f"structure declares channel dim {q} but m_d is {nd.shape[0]}x{nd.shape[1]}"
            )
        if nc.shape[0] != nd.shape[0]:
            raise StructureMismatch("rows(m_c) must equal rows(m_d)")
        if nb.shape[1] != nd.shape[1]:
            raise StructureMismatch("cols(m_b) must equal cols(m_d)")
        if nb.shape[0] != na.shape[0]:
            raise StructureMismatch("rows(m_b) must equal rows(m_a)")
        if nc.shape[1] != na.shape[1]:
            raise StructureMismatch("cols(m_c) must equal cols(m_a)")
        self.m_d = _freeze(nd)
        self.m_c = _freeze(nc)
        self.m_b = _freeze(nb)
        self.m_a = _freeze(na)
        self.structure = structure

    @property
    def shape(self) -> tuple[int, int]:
        return self.m_a.shape

    @property
    def delta_dim(self) -> int:
        return self.structure.dim

    def __call__(self, sample: DeltaSample) -> np.ndarray:
        return star_eval(self, sample)

    def nominal(self) -> np.ndarray:
        return self.m_a.copy()

    def structurally_equal(self, other: "Lft", tol: float = STRUCTURAL_EQ_TOL) -> bool:
        if self.structure != other.structure:
            return False
        for attr in ("m_a", "m_b", "m_c", "m_d"):
            a, b = getattr(self, attr), getattr(other, attr)
            if a.shape != b.shape:
                return False
            if a.size and np.max(np.abs(a - b)) >= tol:
                return False
        return True

    def __repr__(self) -> str:
        r, c = self.shape
        return f"Lft({r}x{c}, delta_dim={self.delta_dim})"


def star_eval(lft: Lft, sample: DeltaSample) -> np.ndarray:
    """Evaluate an LFT at a sample of its uncertainty.

    Raises
    ------
    StructureMismatch
        If the sample was built for a different structure.
    IllPosed
        If ``I - m_d @ Delta`` has reciprocal condition number below 1e-12.
    """
    if sample.structure != lft.structure:
        raise StructureMismatch("sample structure does not match LFT structure")
    if lft.delta_dim == 0:
        return lft.m_a.copy()
    delta = sample.expand()
    closing = np.eye(lft.delta_dim) - lft.m_d @ delta
    sv = np.linalg.svd(closing, compute_uv=False)
    if sv.min() <= WELLPOSED_RCOND * sv.max():
        raise IllPosed(
            f"I - m_d*Delta is singular to working precision (rcond ~ {sv.min() / sv.max():.2e})"
        )
    return lft.m_a + lft.m_b @ delta @ np.linalg.solve(closing, lft.m_c)


def wellposedness_margin(lft: Lft, sample: DeltaSample) -> float:
    """Reciprocal condition number of ``I - m_d @ Delta`` at the sample."""
    if lft.delta_dim == 0:
        return 1.0
    closing = np.eye(lft.delta_dim) - lft.m_d @ sample.expand()
    sv = np.linalg.svd(closing, compute_uv=False)
    return float(sv.min() / sv.max())


def constant_lft(matrix) -> Lft:
    """An uncertainty-free LFT wrapping a constant matrix."""
    m = _as_matrix(matrix)
    return Lft(np.zeros((0, 0)), np.zeros((0, m.shape[1])), np.zeros((m.shape[0], 0)), m,
               UncertaintyStructure())


def _blkdiag(mats: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for m in mats:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def diag_concat(lfts: Sequence[Lft]) -> Lft:
    """Block-diagonal composition of LFTs; channels are concatenated in order."""
    if not lfts:
        raise StructureMismatch("diag_concat needs at least one LFT")
    if len(lfts) == 1:
        return lfts[0]
    structure = lfts[0].structure
    for f in lfts[1:]:
        structure = structure.concat(f.structure)
    return Lft(
        _blkdiag([f.m_d for f in lfts]),
        _blkdiag([f.m_c for f in lfts]),
        _blkdiag([f.m_b for f in lfts]),
        _blkdiag([f.m_a for f in lfts]),
        structure,
    )


def star_compose(outer: Lft, inner: Lft) -> Lft:
    """Matrix product ``outer @ inner`` of two LFTs as a single LFT.

    The channel of the result is the concatenation (outer first, inner
    second), which reproduces the minimal repetition pattern used when a
    factored product shares uncertainties between the factors.
    """
    if outer.shape[1] != inner.shape[0]:
        raise StructureMismatch(
            f"cannot multiply {outer.shape} LFT by {inner.shape} LFT"
        )
    qf, qg = outer.delta_dim, inner.delta_dim
    m_d = np.zeros((qf + qg, qf + qg))
    m_d[:qf, :qf] = outer.m_d
    m_d[:qf, qf:] = outer.m_c @ inner.m_b
    m_d[qf:, qf:] = inner.m_d
    m_c = np.vstack([outer.m_c @ inner.m_a, inner.m_c])
    m_b = np.hstack([outer.m_b, outer.m_a @ inner.m_b])
    m_a = outer.m_a @ inner.m_a
    return Lft(m_d, m_c, m_b, m_a, outer.structure.concat(inner.structure))


def lft_affine(left, lft: Lft, right, offset=None) -> Lft:
    """Constant congruence ``left @ lft @ right + offset`` as an LFT."""
    lm = _as_matrix(left)
    rm = _as_matrix(right)
    if lm.shape[1] != lft.shape[0] or rm.shape[0] != lft.shape[1]:
        raise StructureMismatch("affine map dimensions do not fit the LFT")
    m_a = lm @ lft.m_a @ rm
    if offset is not None:
        off = _as_matrix(offset)
        if off.shape != m_a.shape:
            raise StructureMismatch("offset shape does not match mapped LFT")
        m_a = m_a + off
    return Lft(lft.m_d, lft.m_c @ rm, lm @ lft.m_b, m_a, lft.structure)


def normalize_interval(lo: float, hi: float) -> tuple[float, float]:
    """Center/radius of an interval: value(delta) = center + radius*delta, |delta|<=1."""
    if not lo < hi:
        raise DegenerateInterval(f"interval [{lo}, {hi}] has lo >= hi")
    return 0.5 * (hi + lo), 0.5 * (hi - lo)


# ---------------------------------------------------------------------------
# JSON serialization.  Floats are emitted by Python's shortest round-trip
# repr, which preserves IEEE-754 doubles exactly (17 significant digits
# suffice and are never exceeded).  Matrices are row-major nested lists.

def _block_to_json(blk: Block) -> dict:
    if isinstance(blk, ScalarRepeated):
        bound = (
            {"type": "norm"}
            if isinstance(blk.bound, NormBounded)
            else {"type": "interval", "lo": blk.bound.lo, "hi": blk.bound.hi}
        )
        return {"kind": "scalar", "name": blk.name, "reps": blk.reps, "bound": bound}
    return {
        "kind": "symmetric",
        "name": blk.name,
        "dim": blk.dim,
        "kron_reps": blk.kron_reps,
        "x": blk.x.tolist(),
        "y": blk.y.tolist(),
        "z": blk.z.tolist(),
    }


def _block_from_json(d: dict) -> Block:
    if d["kind"] == "scalar":
        b = d["bound"]
        bound = NormBounded() if b["type"] == "norm" else Interval(b["lo"], b["hi"])
        return ScalarRepeated(d["name"], d["reps"], bound)
    if d["kind"] == "symmetric":
        return SymmetricSet(d["name"], d["dim"], d["kron_reps"], d["x"], d["y"], d["z"])
    raise UnsupportedBlock(f"unknown block kind {d.get('kind')!r}")


def structure_to_json(structure: UncertaintyStructure) -> list:
    return [_block_to_json(b) for b in structure.blocks]


def structure_from_json(data: list) -> UncertaintyStructure:
    return UncertaintyStructure([_block_from_json(d) for d in data])


def lft_to_json(lft: Lft) -> str:
    doc = {
        "ma": lft.m_a.tolist(),
        "mb": lft.m_b.tolist(),
        "mc": lft.m_c.tolist(),
        "md": lft.m_d.tolist(),
        "structure": structure_to_json(lft.structure),
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def lft_from_json(text: str) -> Lft:
    doc = json.loads(text)
    structure = structure_from_json(doc["structure"])
    return Lft(doc["md"], doc["mc"], doc["mb"], doc["ma"], structure)
