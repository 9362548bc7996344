"""Linear level sketches over dynamic item streams.

A sketch is an exact cardinality counter s plus a (num_levels x c_squared)
matrix B of signed 64-bit counters.  An update (i, v) adds v to
B[k, h_k(i)] where k = lsb(h(i)), so every item lands in exactly one level
row and deeper rows keep geometrically fewer items: row k holds an item
with probability 2^-(k+1), and the tail of rows >= k holds it with
probability exactly 2^-k.  Updates commute, so insert/delete streams in
any order produce the sketch of the net set, and two sketches built with
the same SketchRandomness merge by entrywise addition or subtraction.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigMismatchError, CounterOverflowError, ItemRangeError
from .hashing import SketchRandomness
from .similarity import RationalSimilarity

_INT64_MAX = np.iinfo(np.int64).max
# merge precheck bound: values this large cannot arise from counting real
# streams, and refusing them keeps entrywise addition overflow-free
_MERGE_GUARD = 1 << 62

_WIRE_VERSION = 1
_HEADER = struct.Struct("<BQQQq")  # version, d, c_squared, num_levels, s


@dataclass(frozen=True)
class SketchConfig:
    """Sizing knobs for a sketch family.

    c_squared is the bucket-row width (power of two); epsilon, delta and r1
    are the accuracy, failure probability, and similarity threshold the
    family is sized for.  They do not change sketch contents, only which
    levels downstream consumers probe.
    """

    d: int
    c_squared: int = 256
    epsilon: float = 0.5
    delta: float = 0.1
    r1: float = 0.5

    def __post_init__(self) -> None:
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError(f"universe size d must be a positive integer, got {self.d!r}")
        if (
            not isinstance(self.c_squared, int)
            or self.c_squared < 2
            or self.c_squared & (self.c_squared - 1)
        ):
            raise ValueError(f"c_squared must be a power of two >= 2, got {self.c_squared!r}")
        for name in ("epsilon", "delta", "r1"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")

    def randomness(self, master_seed: int) -> SketchRandomness:
        return SketchRandomness(self.d, self.c_squared, master_seed)


class LevelSketch:
    """One set's sketch: cardinality counter plus level/bucket counter matrix.

    Instances are cheap to copy and merge; mutation happens only through
    update/update_many.  A sketch is bound to the SketchRandomness it was
    built with, and only sketches sharing equal randomness may be compared
    or merged.  Not safe for concurrent mutation.
    """

    __slots__ = ("randomness", "_buckets", "_cardinality")

    def __init__(self, randomness: SketchRandomness) -> None:
        self.randomness = randomness
        self._buckets = np.zeros((randomness.num_levels, randomness.c_squared), dtype=np.int64)
        self._cardinality = 0

    @property
    def buckets(self) -> np.ndarray:
        """The live counter matrix; treat as read-only."""
        return self._buckets

    @property
    def cardinality(self) -> int:
        """Net number of insertions minus deletions."""
        return self._cardinality

    @property
    def d(self) -> int:
        return self.randomness.d

    @property
    def c_squared(self) -> int:
        return self.randomness.c_squared

    def copy(self) -> "LevelSketch":
        out = LevelSketch.__new__(LevelSketch)
        out.randomness = self.randomness
        out._buckets = self._buckets.copy()
        out._cardinality = self._cardinality
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LevelSketch):
            return NotImplemented
        return (
            self.randomness == other.randomness
            and self._cardinality == other._cardinality
            and np.array_equal(self._buckets, other._buckets)
        )

    def __hash__(self) -> None:  # type: ignore[override]
        raise TypeError("LevelSketch is mutable and unhashable")

    def update(self, item: int, value: int) -> None:
        """Apply one signed update: value +1 inserts item, -1 deletes it."""
        if value not in (1, -1):
            raise ValueError(f"update value must be +1 or -1, got {value!r}")
        if not (0 <= item < self.randomness.d):
            raise ItemRangeError(f"item {item} outside universe [0, {self.randomness.d})")
        k = self.randomness.level_of(item)
        self._buckets[k, self.randomness.bucket_of(k, item)] += value
        self._cardinality += value

    def update_many(self, items: Iterable[int], values: int | np.ndarray = 1) -> None:
        """Apply a batch of signed updates in one vectorized pass.

        values is a scalar +1/-1 applied to every item, or an array of
        +1/-1 aligned with items.  Equivalent to calling update in a loop.
        """
        arr = np.asarray(items, dtype=np.int64)
        if arr.size == 0:
            return
        if arr.min() < 0 or arr.max() >= self.randomness.d:
            raise ItemRangeError(f"items outside universe [0, {self.randomness.d})")
        vals = np.broadcast_to(np.asarray(values, dtype=np.int64), arr.shape)
        if not np.isin(vals, (1, -1)).all():
            raise ValueError("update values must be +1 or -1")
        rnd = self.randomness
        keys = arr.astype(np.uint64)
        ks = rnd.levels_of(keys)
        flat = np.empty(arr.shape, dtype=np.int64)
        for k in np.unique(ks):
            mask = ks == k
            flat[mask] = int(k) * rnd.c_squared + rnd.buckets_of(int(k), keys[mask]).astype(np.int64)
        counts = np.bincount(flat, weights=vals.astype(np.float64), minlength=self._buckets.size)
        self._buckets += counts.astype(np.int64).reshape(self._buckets.shape)
        self._cardinality += int(vals.sum())


def merge(a: LevelSketch, b: LevelSketch, sign: int = 1) -> LevelSketch:
    """Entrywise a + sign*b; sign -1 yields the difference sketch.

    Both sketches must share equal SketchRandomness (hence d and
    c_squared).  The result is a fresh sketch; inputs are untouched.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    if a.randomness != b.randomness:
        raise ConfigMismatchError("cannot merge sketches built with different randomness")
    peak = int(np.abs(a.buckets).max(initial=0)) + int(np.abs(b.buckets).max(initial=0))
    if peak >= _MERGE_GUARD:
        raise CounterOverflowError("merge would risk 64-bit counter overflow")
    out = LevelSketch.__new__(LevelSketch)
    out.randomness = a.randomness
    out._buckets = a.buckets + sign * b.buckets
    out._cardinality = a.cardinality + sign * b.cardinality
    return out


def _pattern_counts(
    rows_a: np.ndarray, rows_b: np.ndarray
) -> tuple[int, int]:
    na = rows_a != 0
    nb = rows_b != 0
    inter = int(np.count_nonzero(na & nb))
    sym = int(np.count_nonzero(na ^ nb))
    return inter, sym


def _similarity_on_counts(
    params: RationalSimilarity, inter: int, sym: int, universe: float
) -> float:
    comp = max(universe - inter - sym, 0.0)
    num = params.x * inter + params.y * comp + params.z * sym
    den = params.x * inter + params.y * comp + params.z_prime * sym
    if den <= 0.0:
        return 1.0
    return num / den


def similarity_at_level(
    a: LevelSketch, b: LevelSketch, level: int, params: RationalSimilarity
) -> float:
    """Similarity of the two bucket patterns in row `level`.

    Treats nonzero buckets as sampled items and substitutes d * 2^-(level+1)
    (the expected row population) for the universe size in the
    complement term.  Result is always in [0, 1].
    """
    if a.randomness != b.randomness:
        raise ConfigMismatchError("sketches must share randomness")
    if not (0 <= level < a.randomness.num_levels):
        raise ValueError(f"level {level} outside [0, {a.randomness.num_levels})")
    inter, sym = _pattern_counts(a.buckets[level], b.buckets[level])
    universe = a.randomness.d * 2.0 ** -(level + 1)
    return _similarity_on_counts(params, inter, sym, universe)


def similarity_from_level(
    a: LevelSketch, b: LevelSketch, level: int, params: RationalSimilarity
) -> float:
    """Similarity over the tail of rows >= level, compared jointly.

    The tail retains each item with probability exactly 2^-level, so the
    universe substitute is d * 2^-level; level 0 therefore compares the
    complete (collision-compressed) sets with no subsampling at all.
    """
    if a.randomness != b.randomness:
        raise ConfigMismatchError("sketches must share randomness")
    if not (0 <= level < a.randomness.num_levels):
        raise ValueError(f"level {level} outside [0, {a.randomness.num_levels})")
    inter, sym = _pattern_counts(a.buckets[level:], b.buckets[level:])
    universe = a.randomness.d * 2.0 ** -level
    return _similarity_on_counts(params, inter, sym, universe)


_KNOWN_LEVEL_RULES: tuple[tuple[tuple[float, float, float, float], str], ...] = (
    ((1.0, 0.0, 0.0, 1.0), "jaccard"),
    ((1.0, 1.0, 0.0, 1.0), "hamming"),
    ((1.0, 0.0, 0.0, 2.0), "anderberg"),
    ((1.0, 1.0, 0.0, 2.0), "rogers_tanimoto"),
)


def _matches_scaled(params: RationalSimilarity, ref: tuple[float, float, float, float]) -> bool:
    ours = (params.x, params.y, params.z, params.z_prime)
    hi = max(ours)
    if hi == 0.0:
        return False
    scale = hi / max(ref)
    return all(math.isclose(o, scale * r, rel_tol=1e-9, abs_tol=1e-12) for o, r in zip(ours, ref))


def sample_level(
    params: RationalSimilarity,
    epsilon: float,
    delta: float,
    r: float,
    size_hint: int,
) -> int:
    """Deepest level whose sample still concentrates to a (1 +/- epsilon) estimate.

    Returns floor(log2(arg)) clamped to [0, ceil(log2 d)], where arg is the
    similarity-specific budget: eps^2*delta*r*|A| for Jaccard,
    eps^2*delta*r*d/2 for Hamming, the same over 3 for Anderberg and
    Rogers-Tanimoto respectively.  size_hint supplies |A| for the
    cardinality-driven rules; parameterizations outside the four named
    families fall back to the conservative general bound
    (eps/5)^2*delta*r*size_hint / max(x+y, z'+y, z+y) with size_hint read
    as a stand-in for the pair's denominator.

    The returned value counts levels in units of halvings of the universe;
    to probe a bucket row keep the tail semantics of similarity_from_level,
    or subtract one (see lsb_sampling_level) for single-row reads, whose
    retention probability at row k is 2^-(k+1).
    """
    for name in ("epsilon", "delta", "r"):
        v = {"epsilon": epsilon, "delta": delta, "r": r}[name]
        if not (0.0 < v < 1.0):
            raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
    if size_hint < 1:
        raise ValueError(f"size_hint must be positive, got {size_hint!r}")
    budget = epsilon * epsilon * delta * r
    if _matches_scaled(params, _KNOWN_LEVEL_RULES[0][0]):
        arg = budget * size_hint
    elif _matches_scaled(params, _KNOWN_LEVEL_RULES[1][0]):
        arg = budget * params.d / 2.0
    elif _matches_scaled(params, _KNOWN_LEVEL_RULES[2][0]):
        arg = budget * size_hint / 3.0
    elif _matches_scaled(params, _KNOWN_LEVEL_RULES[3][0]):
        arg = budget * params.d / 3.0
    else:
        top = max(
            params.x + params.y, params.z_prime + params.y, params.z + params.y
        )
        if top == 0.0:
            raise ValueError("all-zero similarity weights admit no sampling level")
        arg = (epsilon / 5.0) ** 2 * delta * r * size_hint / top
    max_level = math.ceil(math.log2(params.d)) if params.d > 1 else 0
    if arg < 1.0:
        return 0
    return min(int(math.floor(math.log2(arg))), max_level)


def lsb_sampling_level(level: int, max_level: int) -> int:
    """Convert a sample_level value to a single-row index.

    Row k retains items with probability 2^-(k+1), one halving deeper than
    the tail at k, so single-row consumers read row (level - 1), clamped
    to the valid range.
    """
    return max(0, min(level - 1, max_level))


def l0_estimate(sketch: LevelSketch) -> float:
    """Estimate the number of items with nonzero net count.

    Scans for the shallowest level k whose tail rows all have at most
    c^2/2 nonzero buckets, inverts the balls-in-bins occupancy of each tail
    row via ln(1 - nz/c^2) / ln(1 - 1/c^2), sums the corrected counts, and
    scales by 2^k (the tail retention probability is exactly 2^-k).
    Returns 0.0 for the all-zero sketch.  On difference sketches opposite
    counts may cancel inside one bucket; that residual bias shrinks with
    c^2 and is accepted.
    """
    nz = np.count_nonzero(sketch.buckets, axis=1)
    if not nz.any():
        return 0.0
    c2 = sketch.c_squared
    suffix_max = np.maximum.accumulate(nz[::-1])[::-1]
    eligible = np.flatnonzero(suffix_max <= c2 / 2)
    if eligible.size:
        k = int(eligible[0])
    else:
        k = int(len(nz) - 1)  # every tail saturates; use the deepest row
    rows = np.minimum(nz[k:], c2 - 1)  # keep the log argument positive
    corrected = np.log1p(-rows / c2).sum() / math.log1p(-1.0 / c2)
    return float(2.0**k * corrected)


def sketch_to_bytes(sketch: LevelSketch) -> bytes:
    """Serialize to the length-prefixed wire layout.

    Layout, little-endian: u64 payload length, then the payload of
    u8 version, u64 d, u64 c_squared, u64 num_levels, i64 cardinality,
    followed by num_levels * c_squared row-major i64 counters.
    """
    rnd = sketch.randomness
    payload = _HEADER.pack(
        _WIRE_VERSION, rnd.d, rnd.c_squared, rnd.num_levels, sketch.cardinality
    ) + np.ascontiguousarray(sketch.buckets, dtype="<i8").tobytes()
    return struct.pack("<Q", len(payload)) + payload


def sketch_from_bytes(data: bytes, randomness: SketchRandomness) -> LevelSketch:
    """Inverse of sketch_to_bytes; validates the header against randomness."""
    if len(data) < 8:
        raise ValueError("truncated sketch: missing length prefix")
    (length,) = struct.unpack_from("<Q", data, 0)
    payload = data[8 : 8 + length]
    if len(payload) != length:
        raise ValueError("truncated sketch: payload shorter than prefix")
    if length < _HEADER.size:
        raise ValueError("truncated sketch: payload shorter than header")
    version, d, c2, num_levels, cardinality = _HEADER.unpack_from(payload, 0)
    if version != _WIRE_VERSION:
        raise ValueError(f"unsupported sketch version {version}")
    if (d, c2, num_levels) != (randomness.d, randomness.c_squared, randomness.num_levels):
        raise ConfigMismatchError(
            "serialized sketch shape does not match the supplied randomness"
        )
    body = payload[_HEADER.size :]
    expected = num_levels * c2 * 8
    if len(body) != expected:
        raise ValueError(f"counter block is {len(body)} bytes, expected {expected}")
    out = LevelSketch.__new__(LevelSketch)
    out.randomness = randomness
    out._buckets = (
        np.frombuffer(body, dtype="<i8").astype(np.int64).reshape(num_levels, c2)
    )
    out._cardinality = int(cardinality)
    return out
