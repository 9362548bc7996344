"""LSH candidate search over level sketches.

Each set is inserted at the sketch levels admissible for its exact
cardinality s: levels k in [log2(r1^2*p*s), log2(p*s)] drawn from a grid
spaced by log2(1/r1), where p = (eps/5)^2 * r1 * delta.  At each admissible
level the index takes min-hash signatures of the nonzero bucket pattern,
concatenates r of them per repetition (AND), and keeps l independent
repetitions (OR).  Pairs sharing a signature in any table become
candidates with probability 1 - (1 - s^r)^l for per-signature match
probability s; a verification pass can then re-check candidates against a
distance estimate.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .distance import DistanceEstimator
from .errors import ConfigMismatchError
from .hashing import SketchRandomness, minhash_positions, random_hash_spec
from .sketch import LevelSketch

DEFAULT_PAIR_CAP = 10_000

SetId = int | str


@dataclass(frozen=True)
class LshConfig:
    """Thresholds and banding shape for an index.

    r1 is the similarity users want to retrieve, r2 < r1 the similarity
    they want to reject; epsilon and delta are the sampling accuracy and
    failure-probability knobs that size the admissible-level window via
    p = (epsilon/5)^2 * r1 * delta (override with sampling_p).  bands_r
    signatures are concatenated per repetition and repetitions_l tables
    are kept.
    """

    r1: float
    r2: float
    epsilon: float = 0.5
    delta: float = 0.1
    bands_r: int = 1
    repetitions_l: int = 1
    verify_threshold: float | None = None
    sampling_p: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.r2 < self.r1 < 1.0):
            raise ValueError(
                f"need 0 < r2 < r1 < 1, got r1={self.r1!r} r2={self.r2!r}"
            )
        for name in ("epsilon", "delta"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
        for name in ("bands_r", "repetitions_l"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.sampling_p is not None and not (0.0 < self.sampling_p < 1.0):
            raise ValueError(f"sampling_p must lie in (0, 1), got {self.sampling_p!r}")

    @property
    def p(self) -> float:
        """Effective sampling budget used by the level window."""
        if self.sampling_p is not None:
            return self.sampling_p
        return (self.epsilon / 5.0) ** 2 * self.r1 * self.delta


@dataclass(frozen=True)
class CandidatePair:
    """An unordered candidate pair, canonicalized so id_a < id_b.

    level and repetition record the first table in scan order where the
    two sets shared a signature; verified_distance is filled by verify().
    """

    id_a: SetId
    id_b: SetId
    level: int
    repetition: int
    verified_distance: float | None = None


def amplification_probability(s: float, r: int, l: int) -> float:
    """Candidate probability 1 - (1 - s^r)^l of (r, l) banding."""
    return 1.0 - (1.0 - s**r) ** l


def level_grid(r1: float, d: int) -> tuple[int, ...]:
    """Levels {floor(m * log2(1/r1)) : m = 0, 1, ...} within [0, ceil(log2 d)].

    Steps of less than one level collapse to step one after flooring and
    deduplication, so the grid always starts at 0 and never skips more
    than log2(1/r1) levels.
    """
    if not (0.0 < r1 < 1.0):
        raise ValueError(f"r1 must lie in (0, 1), got {r1!r}")
    max_level = math.ceil(math.log2(d)) if d > 1 else 0
    step = math.log2(1.0 / r1)
    if step < 1.0:
        return tuple(range(max_level + 1))
    out: list[int] = []
    m = 0
    while True:
        k = math.floor(m * step)
        if k > max_level:
            break
        if not out or out[-1] != k:
            out.append(k)
        m += 1
    return tuple(out)


def candidate_levels(cardinality: int, cfg: LshConfig, grid: Sequence[int]) -> tuple[int, ...]:
    """Grid levels admissible for a set of the given exact cardinality.

    The window is [floor(log2(r1^2*p*s)), floor(log2(p*s))]; windows that
    fall entirely below level 0 clamp to {0}, and an empty set (s = 0) is
    admissible nowhere.
    """
    if cardinality < 0:
        raise ValueError(f"cardinality must be non-negative, got {cardinality!r}")
    if cardinality == 0:
        return ()
    ps = cfg.p * cardinality
    lo = math.floor(math.log2(cfg.r1 * cfg.r1 * ps)) if cfg.r1 * cfg.r1 * ps > 0 else 0
    hi = math.floor(math.log2(ps))
    lo, hi = max(lo, 0), max(hi, 0)
    return tuple(k for k in grid if lo <= k <= hi)


def _banded_signatures(
    sketch: LevelSketch, level: int, cfg: LshConfig, randomness: SketchRandomness
) -> list[tuple[int, ...]] | None:
    """One signature tuple per repetition, or None when the row is empty."""
    positions = np.flatnonzero(sketch.buckets[level])
    if positions.size == 0:
        return None  # every min-hash would be the empty sentinel
    specs = [
        randomness.minhash_spec(level, t, q)
        for t in range(cfg.repetitions_l)
        for q in range(cfg.bands_r)
    ]
    sigs = minhash_positions(positions, specs).reshape(cfg.repetitions_l, cfg.bands_r)
    return [tuple(int(v) for v in row) for row in sigs]


class LshIndex:
    """Signature tables over inserted sketches.

    Tables are keyed by (level, repetition); each maps a signature tuple to
    the ids inserted under it.  Re-inserting an existing id replaces its
    postings.  Single-writer: concurrent inserts are not supported, reads
    may proceed in parallel once building is done.
    """

    def __init__(
        self,
        cfg: LshConfig,
        randomness: SketchRandomness,
        pair_cap: int = DEFAULT_PAIR_CAP,
    ) -> None:
        if pair_cap < 1:
            raise ValueError(f"pair_cap must be positive, got {pair_cap!r}")
        self.cfg = cfg
        self.randomness = randomness
        self.pair_cap = pair_cap
        self.grid = level_grid(cfg.r1, randomness.d)
        self._tables: dict[tuple[int, int], dict[tuple[int, ...], list[SetId]]] = {}
        self._postings: dict[SetId, list[tuple[int, int, tuple[int, ...]]]] = {}
        self._sketches: dict[SetId, LevelSketch] = {}

    def __len__(self) -> int:
        return len(self._sketches)

    def __contains__(self, set_id: SetId) -> bool:
        return set_id in self._sketches

    def insert(self, set_id: SetId, sketch: LevelSketch) -> None:
        """Index a sketch under set_id, replacing any previous postings."""
        if sketch.randomness != self.randomness:
            raise ConfigMismatchError("sketch randomness does not match the index")
        if set_id in self._postings:
            self._remove(set_id)
        postings: list[tuple[int, int, tuple[int, ...]]] = []
        for level in candidate_levels(sketch.cardinality, self.cfg, self.grid):
            sigs = _banded_signatures(sketch, level, self.cfg, self.randomness)
            if sigs is None:
                continue
            for repetition, sig in enumerate(sigs):
                table = self._tables.setdefault((level, repetition), {})
                table.setdefault(sig, []).append(set_id)
                postings.append((level, repetition, sig))
        self._postings[set_id] = postings
        self._sketches[set_id] = sketch

    def _remove(self, set_id: SetId) -> None:
        for level, repetition, sig in self._postings.pop(set_id, ()):
            table = self._tables.get((level, repetition))
            if table is None:
                continue
            ids = table.get(sig)
            if ids is None:
                continue
            ids.remove(set_id)
            if not ids:
                del table[sig]
        self._sketches.pop(set_id, None)

    def candidates(self) -> list[CandidatePair]:
        """All distinct pairs sharing a signature in some table.

        Deterministic for a fixed master seed and content: tables are
        scanned in (level, repetition) order and buckets in signature
        order, and each pair is reported once, tagged with its first
        colliding table.  Buckets whose pair expansion exceeds pair_cap
        contribute only the first pair_cap pairs and raise a warning.
        """
        seen: set[tuple[SetId, SetId]] = set()
        out: list[CandidatePair] = []
        for level, repetition in sorted(self._tables):
            table = self._tables[(level, repetition)]
            for sig in sorted(table):
                ids = table[sig]
                if len(ids) < 2:
                    continue
                members = sorted(ids)
                total = len(members) * (len(members) - 1) // 2
                if total > self.pair_cap:
                    warnings.warn(
                        f"bucket at level {level} repetition {repetition} expands to "
                        f"{total} pairs; emitting the first {self.pair_cap}",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                emitted = 0
                for i in range(len(members)):
                    if emitted >= self.pair_cap:
                        break
                    for j in range(i + 1, len(members)):
                        if emitted >= self.pair_cap:
                            break
                        emitted += 1
                        key = (members[i], members[j])
                        if key in seen:
                            continue
                        seen.add(key)
                        out.append(CandidatePair(key[0], key[1], level, repetition))
        return out

    def verify(
        self,
        pairs: Iterable[CandidatePair],
        estimator: DistanceEstimator,
        threshold: float,
    ) -> list[CandidatePair]:
        """Keep pairs whose estimated distance is at most threshold.

        Each surviving pair carries its estimate in verified_distance.
        The estimator must be built on this index's randomness.
        """
        kept: list[CandidatePair] = []
        for pair in pairs:
            a = self._sketches.get(pair.id_a)
            b = self._sketches.get(pair.id_b)
            if a is None or b is None:
                raise KeyError(f"pair references unindexed ids {pair.id_a!r}, {pair.id_b!r}")
            dist = estimator.estimate_distance(a, b)
            if dist <= threshold:
                kept.append(replace(pair, verified_distance=dist))
        return kept


def sensitivity_report(
    sketches: Mapping[SetId, LevelSketch],
    exact_similarities: Mapping[tuple[SetId, SetId], float],
    cfg: LshConfig,
    randomness: SketchRandomness,
) -> tuple[float, float]:
    """Empirical (p_high, p_low) of single-signature collisions.

    Builds a throwaway index at r = l = 1 and measures the fraction of
    labeled pairs that came out candidates, separately for pairs with
    similarity >= r1 (p_high) and <= r2 (p_low).  Sections with no labeled
    pairs report nan.  The internal index is sized so candidate
    enumeration never truncates; the frequencies are exact for the corpus.
    """
    single = replace(cfg, bands_r=1, repetitions_l=1)
    n = len(sketches)
    index = LshIndex(single, randomness, pair_cap=max(1, n * (n - 1) // 2))
    for set_id, sketch in sketches.items():
        index.insert(set_id, sketch)
    hits = {
        (p.id_a, p.id_b) if p.id_a < p.id_b else (p.id_b, p.id_a)
        for p in index.candidates()
    }
    high_total = high_hit = low_total = low_hit = 0
    for pair, sim in exact_similarities.items():
        key = pair if pair[0] < pair[1] else (pair[1], pair[0])
        if sim >= cfg.r1:
            high_total += 1
            high_hit += key in hits
        elif sim <= cfg.r2:
            low_total += 1
            low_hit += key in hits
    p_high = high_hit / high_total if high_total else float("nan")
    p_low = low_hit / low_total if low_total else float("nan")
    return p_high, p_low


def minhash_pair_collides(
    a_items: np.ndarray,
    b_items: np.ndarray,
    r: int,
    l: int,
    master_seed: int,
) -> bool:
    """Uncompressed (r, l)-banded min-hash over raw item sets.

    The level-free baseline: signatures are taken directly over item ids,
    so the collision probability per signature is the pairs' exact Jaccard
    similarity (up to the hash family's mixing).  Useful for calibrating
    the banding curve without sketch effects.
    """
    rng = np.random.default_rng(np.random.SeedSequence(master_seed))
    a_items = np.asarray(a_items, dtype=np.uint64)
    b_items = np.asarray(b_items, dtype=np.uint64)
    union = np.union1d(a_items, b_items)
    specs = [random_hash_spec(rng, 64) for _ in range(r * l)]
    sig_a = minhash_positions(np.intersect1d(union, a_items), specs).reshape(l, r)
    sig_b = minhash_positions(np.intersect1d(union, b_items), specs).reshape(l, r)
    return bool(np.any(np.all(sig_a == sig_b, axis=1)))


def write_candidates_csv(pairs: Iterable[CandidatePair], out: IO[str]) -> None:
    """Emit the stable candidate schema: id_a,id_b,level,repetition,verified_distance."""
    writer = csv.writer(out)
    writer.writerow(["id_a", "id_b", "level", "repetition", "verified_distance"])
    for p in pairs:
        writer.writerow(
            [
                p.id_a,
                p.id_b,
                p.level,
                p.repetition,
                "" if p.verified_distance is None else f"{p.verified_distance:.6f}",
            ]
        )
