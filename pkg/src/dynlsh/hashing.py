"""Multiply-shift hashing, level assignment, and min-wise signatures.

Every random choice in a sketch family is derived from one 64-bit master
seed through numpy SeedSequence spawn keys, so identical seeds reproduce
identical sketches bit for bit across runs and processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

WORD_BITS = 64
_MASK64 = (1 << 64) - 1

# spawn-key tags for the seed derivation tree
_TAG_LEVEL = 0
_TAG_BUCKET = 1
_TAG_MINHASH = 2
_TAG_CHILD = 3


@dataclass(frozen=True)
class HashSpec:
    """One multiply-shift function: key -> ((a*key + b) mod 2^64) >> (64 - output_bits).

    The multiplier a must be odd; output_bits selects how many of the
    well-mixed high bits survive, so the output range is [0, 2^output_bits).
    """

    a: int
    b: int
    output_bits: int

    def __post_init__(self) -> None:
        if not (0 < self.a <= _MASK64) or self.a % 2 == 0:
            raise ValueError(f"multiplier a must be odd and fit in 64 bits, got {self.a!r}")
        if not (0 <= self.b <= _MASK64):
            raise ValueError(f"offset b must fit in 64 bits, got {self.b!r}")
        if not (1 <= self.output_bits <= WORD_BITS):
            raise ValueError(f"output_bits must lie in [1, {WORD_BITS}], got {self.output_bits!r}")


def hash_key(spec: HashSpec, key: int) -> int:
    """Evaluate spec on one key."""
    return ((spec.a * key + spec.b) & _MASK64) >> (WORD_BITS - spec.output_bits)


def hash_array(spec: HashSpec, keys: np.ndarray) -> np.ndarray:
    """Evaluate spec on a uint64 array; wraps modulo 2^64 like hash_key."""
    keys = np.asarray(keys, dtype=np.uint64)
    out = keys * np.uint64(spec.a) + np.uint64(spec.b)
    return out >> np.uint64(WORD_BITS - spec.output_bits)


def mix64(values: np.ndarray) -> np.ndarray:
    """Fixed avalanche bijection on uint64 (the splitmix64 finalizer).

    Post-composing a bijection leaves the joint distribution of any two
    distinct hash values unchanged, so collision probabilities survive
    exactly; what changes is that arithmetic structure in the input, such
    as a fixed stride, no longer shows up as arithmetic structure in the
    output bits.
    """
    z = np.asarray(values, dtype=np.uint64).copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def mixed_hash_array(spec: HashSpec, keys: np.ndarray) -> np.ndarray:
    """Like hash_array, but the affine product is mixed before the shift.

    Plain multiply-shift sends an arithmetic progression of keys to an
    arithmetic progression of products, and the high bits of a progression
    can collapse onto a handful of values when its step sits near a simple
    rational multiple of 2^64.  Mixing first makes the surviving high bits
    insensitive to such input structure.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    out = mix64(keys * np.uint64(spec.a) + np.uint64(spec.b))
    return out >> np.uint64(WORD_BITS - spec.output_bits)


def lsb(value: int, width: int = WORD_BITS) -> int:
    """Index of the least significant set bit; width for value == 0.

    With width equal to a hash function's output_bits this assigns the
    all-zero output to the deepest level instead of leaving it undefined.
    """
    if value == 0:
        return width
    return (value & -value).bit_length() - 1


def lsb_array(values: np.ndarray, width: int) -> np.ndarray:
    """Vectorized lsb over a uint64 array."""
    v = np.asarray(values, dtype=np.uint64)
    iso = v & (np.zeros_like(v) - v)  # isolates lowest set bit (two's complement)
    out = np.full(v.shape, width, dtype=np.int64)
    nz = iso != 0
    # isolated bits are exact powers of two, so float64 log2 is exact
    out[nz] = np.log2(iso[nz].astype(np.float64)).astype(np.int64)
    return out


def minhash_signature(buckets: np.ndarray, spec: HashSpec) -> int | None:
    """Position of the hash-minimal nonzero bucket; None for an all-zero row.

    Only the zero/nonzero pattern matters, so the signature is invariant
    under scaling counters by any positive integer.
    """
    positions = np.flatnonzero(np.asarray(buckets))
    if positions.size == 0:
        return None
    values = hash_array(spec, positions.astype(np.uint64))
    return int(positions[int(np.argmin(values))])


def minhash_positions(positions: np.ndarray, specs: Sequence[HashSpec]) -> np.ndarray:
    """minhash over the same position set under many specs at once.

    Returns an int64 array of minimizing positions, one per spec; all -1
    when the position set is empty.  Ties break toward the lowest position,
    matching minhash_signature.
    """
    n = len(specs)
    pos = np.asarray(positions, dtype=np.uint64)
    if pos.size == 0:
        return np.full(n, -1, dtype=np.int64)
    a = np.fromiter((s.a for s in specs), dtype=np.uint64, count=n)
    b = np.fromiter((s.b for s in specs), dtype=np.uint64, count=n)
    shifts = {s.output_bits for s in specs}
    if len(shifts) != 1:
        raise ValueError("all specs must share output_bits")
    shift = np.uint64(WORD_BITS - shifts.pop())
    values = (a[:, None] * pos[None, :] + b[:, None]) >> shift
    return pos[np.argmin(values, axis=1)].astype(np.int64)


def random_hash_spec(rng: np.random.Generator, output_bits: int) -> HashSpec:
    """Draw a fresh spec; the multiplier is forced odd."""
    a = int.from_bytes(rng.bytes(8), "little") | 1
    b = int.from_bytes(rng.bytes(8), "little")
    return HashSpec(a, b, output_bits)


def _derived_rng(master_seed: int, spawn_key: tuple[int, ...]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=spawn_key))


class SketchRandomness:
    """All hash functions for one sketch family over universe [0, d).

    Holds the level-assignment function h : [d] -> [2^ceil(log2 d)], one
    bucket function per level h_k : [d] -> [c^2], and lazily derived
    min-hash seeds per (level, repetition, band) triple.  Instances are
    immutable after construction and safe to share across threads; two
    instances compare equal iff they were built from the same
    (d, c_squared, master_seed) and therefore hash identically.
    """

    __slots__ = (
        "d",
        "c_squared",
        "master_seed",
        "max_level",
        "num_levels",
        "bucket_bits",
        "level_spec",
        "bucket_specs",
        "_minhash_cache",
    )

    def __init__(self, d: int, c_squared: int, master_seed: int) -> None:
        if not isinstance(d, int) or d < 1:
            raise ValueError(f"universe size d must be a positive integer, got {d!r}")
        if not isinstance(c_squared, int) or c_squared < 2 or c_squared & (c_squared - 1):
            raise ValueError(f"c_squared must be a power of two >= 2, got {c_squared!r}")
        if not (0 <= master_seed <= _MASK64):
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed!r}")
        self.d = d
        self.c_squared = c_squared
        self.master_seed = master_seed
        self.max_level = math.ceil(math.log2(d)) if d > 1 else 0
        self.num_levels = self.max_level + 1
        self.bucket_bits = c_squared.bit_length() - 1
        rng = _derived_rng(master_seed, (_TAG_LEVEL,))
        # The level function keeps the full product width: for odd a the
        # map key -> (a*key + b) mod 2^j is a bijection on the low j bits,
        # so lsb(hash) is exactly geometric for keys uniform over a
        # power-of-two range.  Taking only the top bits instead leaves the
        # output's low bits poorly mixed whenever a has many leading
        # zeros, which hollows out entire levels.
        self.level_spec = random_hash_spec(rng, WORD_BITS)
        rng = _derived_rng(master_seed, (_TAG_BUCKET,))
        self.bucket_specs = tuple(
            random_hash_spec(rng, self.bucket_bits) for _ in range(self.num_levels)
        )
        self._minhash_cache: dict[tuple[int, int, int], HashSpec] = {}

    def __repr__(self) -> str:
        return (
            f"SketchRandomness(d={self.d}, c_squared={self.c_squared}, "
            f"master_seed={self.master_seed})"
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SketchRandomness):
            return NotImplemented
        return (
            self.d == other.d
            and self.c_squared == other.c_squared
            and self.master_seed == other.master_seed
        )

    def __hash__(self) -> int:
        return hash((self.d, self.c_squared, self.master_seed))

    def levels_of(self, items: np.ndarray) -> np.ndarray:
        """Level index per item: lsb of the level hash, zero hash -> deepest.

        Only the low max_level bits ever decide an unclamped level, so the
        split across levels 0..max_level-1 is exactly 1/2, 1/4, ... for
        keys uniform over a power-of-two universe, with the remaining
        2^-max_level mass clamped onto the deepest level.  Keys whose ids
        share a common power-of-two stride collapse onto few levels;
        scramble such ids before sketching.
        """
        h = hash_array(self.level_spec, items)
        k = lsb_array(h, WORD_BITS)
        return np.minimum(k, self.max_level)

    def level_of(self, item: int) -> int:
        return int(self.levels_of(np.asarray([item], dtype=np.uint64))[0])

    def buckets_of(self, level: int, items: np.ndarray) -> np.ndarray:
        """Bucket index per item for one level's row.

        Items reaching a level agree on the low bits of the level hash,
        which makes them an arithmetic progression with power-of-two
        stride; the bucket hash therefore mixes its affine product before
        taking the high bits, otherwise resonant multipliers would crowd
        whole rows into a few buckets.
        """
        return mixed_hash_array(self.bucket_specs[level], items)

    def bucket_of(self, level: int, item: int) -> int:
        return int(self.buckets_of(level, np.asarray([item], dtype=np.uint64))[0])

    def minhash_spec(self, level: int, repetition: int, band: int) -> HashSpec:
        """Signature seed for one (level, repetition, band) slot, cached.

        Derivation depends only on the triple, never on how many slots a
        caller enumerates, so growing the repetition count keeps all
        previously issued seeds.
        """
        key = (level, repetition, band)
        spec = self._minhash_cache.get(key)
        if spec is None:
            rng = _derived_rng(self.master_seed, (_TAG_MINHASH, level, repetition, band))
            spec = random_hash_spec(rng, WORD_BITS)
            self._minhash_cache[key] = spec
        return spec

    def spawn(self, index: int) -> "SketchRandomness":
        """Independent child randomness for repetition `index`."""
        seed = int(
            np.random.SeedSequence(
                self.master_seed, spawn_key=(_TAG_CHILD, index)
            ).generate_state(1, np.uint64)[0]
        )
        return SketchRandomness(self.d, self.c_squared, seed)
