"""Random sampling, vertex enumeration and sample-size bounds for uncertainty sets.

Randomness is produced by numpy's Philox generator, a 64-bit counter-based
PRNG whose output is fully determined by ``(key, counter)`` and identical on
every platform.  Sample ``k`` of a run seeded with ``seed`` is always drawn
from ``Philox(key=seed, counter offset k)``, so parallel workers pulling
disjoint index ranges reproduce exactly the serial stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RejectionStall, StructureMismatch, TooManyVertices, UnsupportedBlock
from .lft import DeltaSample, Interval, NormBounded, ScalarRepeated, SymmetricSet, UncertaintyStructure

__all__ = [
    "RandomizedSettings",
    "rng_for_sample",
    "sample",
    "sample_at",
    "sample_stream",
    "vertices",
    "sample_size",
]

#: Give up on rejection sampling after this many consecutive rejections.
REJECTION_LIMIT = 10 ** 6

#: Guard on 2^N vertex enumeration.
MAX_VERTEX_NAMES = 20


@dataclass(frozen=True)
class RandomizedSettings:
    """Accuracy/confidence pair plus seed and method for randomized routines."""

    epsilon: float
    delta: float
    seed: int = 0
    method: str = "montecarlo"

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0,1), got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0,1), got {self.delta}")
        if self.method not in ("scenario", "sequential", "montecarlo"):
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
            "method": self.method,
        }


def rng_for_sample(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` of the stream keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed),
                                                counter=[0, 0, 0, np.uint64(index)]))


def _draw_symmetric(blk: SymmetricSet, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample a member of a quadratic set from its bounding box.

    The box is centered at the set center and sized from the outer ellipsoid
    radius sqrt(lmax(R)/lmin(Z)) with R = center'Z center + ... the residual
    matrix of the set; every member satisfies |entry - center entry| <= rho.
    """
    center = blk.center
    # R bounds (Delta - center) Z (Delta - center); its top eigenvalue caps the
    # spectral (hence entrywise) deviation from the center.
    residual = center @ blk.z @ center - blk.x - center @ blk.y - blk.y @ center
    lam_r = max(np.linalg.eigvalsh(residual).max(), 0.0)
    lam_z = np.linalg.eigvalsh(blk.z).min()
    rho = math.sqrt(lam_r / lam_z) if lam_r > 0 else 0.0
    if rho == 0.0:
        return center
    n = blk.dim
    iu = np.triu_indices(n)
    for _ in range(REJECTION_LIMIT):
        m = np.zeros((n, n))
        m[iu] = rng.uniform(-rho, rho, size=len(iu[0]))
        m = m + m.T - np.diag(np.diag(m))
        cand = center + m
        if blk.membership_residual(cand) <= 0.0:
            return cand
    raise RejectionStall(
        f"no accepted draw for {blk.name!r} after {REJECTION_LIMIT} rejections"
    )


def sample(structure: UncertaintyStructure, rng: np.random.Generator) -> DeltaSample:
    """Draw one sample: scalars uniform on their range, symmetric sets by rejection."""
    values: dict[str, object] = {}
    for name in structure.names:
        blk = structure.block_of(name)
        if isinstance(blk, ScalarRepeated):
            values[name] = float(rng.uniform(blk.bound.lo, blk.bound.hi))
        else:
            values[name] = _draw_symmetric(blk, rng)
    return DeltaSample(structure, values, check=False)


def sample_at(structure: UncertaintyStructure, seed: int, index: int) -> DeltaSample:
    """Sample ``index`` of the deterministic stream keyed by ``seed``."""
    return sample(structure, rng_for_sample(seed, index))


def sample_stream(structure: UncertaintyStructure, seed: int, n: int) -> list[DeltaSample]:
    return [sample_at(structure, seed, k) for k in range(n)]


def vertices(structure: UncertaintyStructure) -> list[DeltaSample]:
    """All extreme combinations of the scalar bounds, in binary-counting order.

    Name ``i`` (in declaration order) toggles with period ``2^(N-1-i)``:
    vertex 0 has every scalar at its lower endpoint, the last vertex has every
    scalar at its upper endpoint.
    """
    for blk in structure.blocks:
        if not isinstance(blk, ScalarRepeated):
            raise UnsupportedBlock("vertices() supports scalar blocks only")
    names = structure.names
    n = len(names)
    if n > MAX_VERTEX_NAMES:
        raise TooManyVertices(f"{n} scalar uncertainties would give 2^{n} vertices")
    out = []
    for code in range(2 ** n):
        values = {}
        for i, name in enumerate(names):
            bound = structure.block_of(name).bound
            hi_bit = (code >> (n - 1 - i)) & 1
            values[name] = bound.hi if hi_bit else bound.lo
        out.append(DeltaSample(structure, values, check=False))
    return out


def sample_size(kind: str, settings: RandomizedSettings, d: int | None = None) -> int:
    """Sample count for the named probabilistic bound.

    ``chernoff``  : N = ceil( ln(2/delta) / (2 eps^2) )        (probability estimation)
    ``loglog``    : N = ceil( ln(1/delta) / ln(1/(1-eps)) )    (worst-case estimation)
    ``scenario``  : N = ceil( (2/eps) (ln(1/delta) + d) )      (scenario design, d decision vars)
    """
    eps, delta = settings.epsilon, settings.delta
    if kind == "chernoff":
        return math.ceil(math.log(2.0 / delta) / (2.0 * eps * eps))
    if kind == "loglog":
        return math.ceil(math.log(1.0 / delta) / math.log(1.0 / (1.0 - eps)))
    if kind == "scenario":
        if d is None or d < 1:
            raise StructureMismatch("scenario bound needs the decision-variable count d >= 1")
        return math.ceil((2.0 / eps) * (math.log(1.0 / delta) + d))
    raise ValueError(f"unknown sample-size kind {kind!r}")
