"""Synthetic corpora, update-stream files, and benchmark reports.

The generator builds sparse random sets with a configurable density range
and plants high-similarity partner rows by copying a source row and
flipping bits at rates solved from the target similarity.  Corpora are
serialized as plain-text update streams (one signed coordinate update per
line) so the ingestion path exercises the same deletion machinery as live
use.  Three report families sit on top: absolute similarity deviation for
labeled pairs, empirical banding S-curves against the closed form, and
wall-clock comparison of sketch-based versus exact all-pairs similarity.

All randomness flows from explicit integer seeds; nothing here consults
OS entropy.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse

from .errors import GenerationError, StreamDataError, StreamParseError
from .hashing import SketchRandomness, minhash_positions
from .lsh import amplification_probability
from .sketch import LevelSketch, similarity_from_level
from .similarity import jaccard

# Default planted-similarity intervals, cycled across planted pairs.
DEFAULT_PLANTED_RANGES: tuple[tuple[float, float], ...] = (
    (0.35, 0.45),
    (0.45, 0.55),
    (0.55, 0.65),
    (0.65, 0.75),
    (0.75, 0.85),
    (0.85, 0.95),
)

# Similarity histogram (bin_low, bin_high, weight) for --distribution mode:
# a heavily bimodal shape with a large mass of mid-similarity pairs and a
# long high-similarity shoulder, matching near-duplicate corpora seen in
# malware-style deduplication workloads.
SIMILARITY_HISTOGRAM: tuple[tuple[float, float, int], ...] = (
    (0.10, 0.15, 995),
    (0.15, 0.20, 33864),
    (0.20, 0.25, 364496),
    (0.25, 0.30, 206572),
    (0.30, 0.35, 233303),
    (0.35, 0.40, 576286),
    (0.40, 0.45, 861799),
    (0.45, 0.50, 593181),
    (0.50, 0.55, 549257),
    (0.55, 0.60, 144769),
    (0.60, 0.65, 33093),
    (0.65, 0.70, 27777),
    (0.70, 0.75, 42181),
    (0.75, 0.80, 23185),
)

DEFAULT_GRID: tuple[tuple[int, float], ...] = (
    (128, 0.05),
    (256, 0.025),
    (512, 0.01),
    (1024, 0.005),
)

# spawn_key tags for deriving independent generators from one seed;
# disjoint from the tags used for sketch hash functions.
_TAG_GENERATE = 10
_TAG_CHURN = 11
_TAG_DEVIATION = 12
_TAG_SCURVE = 13
_TAG_TIMING = 14
_TAG_LOW_PAIRS = 15


@dataclass(frozen=True)
class PlantedPair:
    """A labeled pair: two row ids, the target interval, and the realized value."""

    id_a: int
    id_b: int
    target_low: float
    target_high: float
    exact_similarity: float


@dataclass
class GeneratedCorpus:
    """In-memory output of the generator: item sets plus the pair manifest."""

    d: int
    rows: list[np.ndarray]
    manifest: list[PlantedPair]

    @property
    def n(self) -> int:
        return len(self.rows)


@dataclass
class BenchCorpus:
    """Result of ingesting a stream: sketches plus the recovered exact sets."""

    randomness: SketchRandomness
    sketches: list[LevelSketch]
    sets: list[np.ndarray]

    @property
    def n(self) -> int:
        return len(self.sketches)

    @property
    def d(self) -> int:
        return self.randomness.d


def _rng(master_seed: int, *spawn_key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=spawn_key))


def _child_seed(master_seed: int, *spawn_key: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=spawn_key)
    return int(seq.generate_state(1, np.uint64)[0])


def _sample_distinct(
    rng: np.random.Generator, d: int, count: int, exclude: np.ndarray | None = None
) -> np.ndarray:
    """Draw `count` distinct item ids from [0, d), avoiding `exclude`.

    Uses batched rejection with first-occurrence dedup so the result is
    unbiased; cheap compared to permuting [0, d) when count << d.
    """
    n_excluded = 0 if exclude is None else exclude.size
    if count > d - n_excluded:
        raise GenerationError(
            f"cannot draw {count} distinct items from a universe of {d} "
            f"with {n_excluded} excluded"
        )
    if count == 0:
        return np.empty(0, dtype=np.int64)
    pool = np.empty(0, dtype=np.int64)
    while pool.size < count:
        need = count - pool.size
        draw = rng.integers(0, d, size=need + need // 4 + 16, dtype=np.int64)
        _, first = np.unique(draw, return_index=True)
        draw = draw[np.sort(first)]  # deduped, original order preserved
        if exclude is not None and exclude.size:
            draw = draw[~np.isin(draw, exclude)]
        if pool.size:
            draw = draw[~np.isin(draw, pool)]
        pool = np.concatenate([pool, draw])
    return pool[:count]


def flip_probabilities(target: float, m: int, d: int) -> tuple[float, float]:
    """Per-item delete and insert probabilities hitting `target` Jaccard.

    Deleting members with probability p_del = (1-s)/(1+s) and inserting
    each non-member with probability m*p_del/(d-m) gives a partner row
    whose expected similarity to the source is s.  At d=10^4 and m=500
    targeting 0.5 this comes out to the familiar (1/3, 1/57).
    """
    if not (0.0 < target < 1.0):
        raise GenerationError(f"target similarity must lie in (0, 1), got {target!r}")
    if not (0 < m < d):
        raise GenerationError(f"source size {m} must lie strictly between 0 and d={d}")
    p_del = (1.0 - target) / (1.0 + target)
    p_add = m * p_del / (d - m)
    if p_add > 1.0:
        raise GenerationError(
            f"target {target} infeasible at size {m} in universe {d}: "
            f"required insert probability {p_add:.3f} exceeds 1"
        )
    return p_del, p_add


def planted_partner(
    rng: np.random.Generator,
    base: np.ndarray,
    d: int,
    interval: tuple[float, float],
    max_attempts: int = 32,
) -> tuple[np.ndarray, float]:
    """A partner row for `base` with Jaccard similarity inside `interval`.

    Flips bits at the rates from flip_probabilities targeting the interval
    midpoint, resampling up to max_attempts times until the realized
    similarity lands inside; the last attempt is kept either way and the
    realized value is returned alongside the row.
    """
    lo, hi = interval
    if not (0.0 < lo < hi < 1.0):
        raise GenerationError(f"interval must satisfy 0 < low < high < 1, got {interval!r}")
    m = int(base.size)
    p_del, p_add = flip_probabilities((lo + hi) / 2.0, m, d)
    keep = base
    adds = np.empty(0, dtype=np.int64)
    realized = 1.0
    for _ in range(max_attempts):
        keep = base[rng.random(m) >= p_del]
        n_add = int(rng.binomial(d - m, p_add))
        adds = _sample_distinct(rng, d, n_add, exclude=base)
        # adds are disjoint from base and keep is a subset of it, so the
        # union of the pair is exactly base plus the additions.
        realized = keep.size / (m + n_add) if m + n_add else 1.0
        if lo <= realized <= hi:
            break
    return np.union1d(keep, adds), realized


def generate(
    rows: int,
    cols: int,
    density_range: tuple[float, float] = (0.01, 0.05),
    planted_ranges: Sequence[tuple[float, float]] = DEFAULT_PLANTED_RANGES,
    every: int = 100,
    seed: int = 0,
) -> GeneratedCorpus:
    """Random sparse corpus with one planted partner per `every` base rows.

    Each base row's size is a uniform draw from density_range times cols.
    For base rows 0, every, 2*every, ... a partner row is appended at the
    end of the corpus, cycling through planted_ranges; the manifest records
    each pair's realized exact Jaccard similarity.
    """
    if rows < 1 or cols < 1:
        raise GenerationError(f"need positive corpus shape, got rows={rows} cols={cols}")
    lo, hi = density_range
    if not (0.0 < lo <= hi <= 1.0):
        raise GenerationError(f"density range must satisfy 0 < low <= high <= 1, got {density_range!r}")
    if every < 1:
        raise GenerationError(f"every must be positive, got {every!r}")
    rng = _rng(seed, _TAG_GENERATE)
    out: list[np.ndarray] = []
    for _ in range(rows):
        m = int(round(rng.uniform(lo, hi) * cols))
        m = min(max(m, 1), cols)
        out.append(_sample_distinct(rng, cols, m))
    manifest: list[PlantedPair] = []
    if planted_ranges:
        for t in range(rows // every):
            src = t * every
            interval = tuple(planted_ranges[t % len(planted_ranges)])
            partner, realized = planted_partner(rng, out[src], cols, interval)
            manifest.append(PlantedPair(src, rows + t, interval[0], interval[1], realized))
            out.append(partner)
    return GeneratedCorpus(cols, out, manifest)


def generate_distribution(
    pairs: int,
    cols: int,
    density_range: tuple[float, float] = (0.01, 0.05),
    seed: int = 0,
    histogram: Sequence[tuple[float, float, int]] = SIMILARITY_HISTOGRAM,
) -> GeneratedCorpus:
    """Corpus of planted pairs whose targets follow a similarity histogram.

    Draws each pair's target interval from `histogram` proportionally to
    its weight, then plants the pair like generate() does.  Base rows get
    ids [0, pairs) and partners [pairs, 2*pairs).
    """
    if pairs < 1:
        raise GenerationError(f"need at least one pair, got {pairs!r}")
    if not histogram:
        raise GenerationError("histogram must be non-empty")
    rng = _rng(seed, _TAG_GENERATE, 1)
    weights = np.array([w for _, _, w in histogram], dtype=np.float64)
    if (weights < 0).any() or weights.sum() <= 0:
        raise GenerationError("histogram weights must be non-negative and not all zero")
    weights /= weights.sum()
    lo, hi = density_range
    if not (0.0 < lo <= hi <= 1.0):
        raise GenerationError(f"density range must satisfy 0 < low <= high <= 1, got {density_range!r}")
    bases: list[np.ndarray] = []
    partners: list[np.ndarray] = []
    manifest: list[PlantedPair] = []
    for t in range(pairs):
        m = int(round(rng.uniform(lo, hi) * cols))
        m = min(max(m, 1), cols)
        base = _sample_distinct(rng, cols, m)
        which = int(rng.choice(len(weights), p=weights))
        b_lo, b_hi, _ = histogram[which]
        partner, realized = planted_partner(rng, base, cols, (b_lo, b_hi))
        bases.append(base)
        partners.append(partner)
        manifest.append(PlantedPair(t, pairs + t, b_lo, b_hi, realized))
    return GeneratedCorpus(cols, bases + partners, manifest)


def write_stream(
    corpus: GeneratedCorpus,
    out: str | os.PathLike | IO[str],
    churn: float = 0.0,
    seed: int = 0,
) -> int:
    """Serialize a corpus as an update stream; returns the update count.

    The format is a header line `n d` followed by one `j i v` update per
    line with v in {+1, -1}.  With churn > 0, each row additionally gets
    round(churn * size) noise updates that cancel out: half are inserts of
    non-members later deleted, half delete a member and re-insert it.  Net
    row contents are identical to the churn-free stream.
    """
    if churn < 0:
        raise GenerationError(f"churn must be non-negative, got {churn!r}")
    if hasattr(out, "write"):
        return _write_stream(corpus, out, churn, seed)  # type: ignore[arg-type]
    with open(out, "w", encoding="ascii") as fh:
        return _write_stream(corpus, fh, churn, seed)


def _write_stream(corpus: GeneratedCorpus, fh: IO[str], churn: float, seed: int) -> int:
    rng = _rng(seed, _TAG_CHURN) if churn > 0 else None
    fh.write(f"{corpus.n} {corpus.d}\n")
    total = 0
    for j, items in enumerate(corpus.rows):
        lines = [f"{j} {i} 1" for i in items]
        if rng is not None and items.size:
            extra = int(round(churn * items.size))
            bounce = rng.choice(items, size=min(extra // 2, items.size), replace=False)
            cancel = _sample_distinct(rng, corpus.d, extra - extra // 2, exclude=items)
            lines += [f"{j} {i} 1" for i in cancel]
            lines += [f"{j} {i} -1" for i in bounce]
            lines += [f"{j} {i} 1" for i in bounce]
            lines += [f"{j} {i} -1" for i in cancel]
        if lines:
            fh.write("\n".join(lines) + "\n")
        total += len(lines)
    return total


def write_manifest(manifest: Iterable[PlantedPair], out: str | os.PathLike | IO[str]) -> None:
    """CSV manifest: id_a,id_b,target_low,target_high,exact_similarity."""
    if hasattr(out, "write"):
        _write_manifest(manifest, out)  # type: ignore[arg-type]
        return
    with open(out, "w", encoding="ascii", newline="") as fh:
        _write_manifest(manifest, fh)


def _write_manifest(manifest: Iterable[PlantedPair], fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(["id_a", "id_b", "target_low", "target_high", "exact_similarity"])
    for p in manifest:
        writer.writerow(
            [p.id_a, p.id_b, f"{p.target_low:.6f}", f"{p.target_high:.6f}", f"{p.exact_similarity:.6f}"]
        )


def read_manifest(source: str | os.PathLike | IO[str]) -> list[PlantedPair]:
    """Parse a manifest written by write_manifest."""
    if hasattr(source, "read"):
        return _read_manifest(source)  # type: ignore[arg-type]
    with open(source, "r", encoding="ascii", newline="") as fh:
        return _read_manifest(fh)


def _read_manifest(fh: IO[str]) -> list[PlantedPair]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != ["id_a", "id_b", "target_low", "target_high", "exact_similarity"]:
        raise StreamParseError(f"unexpected manifest header: {header!r}", 1)
    out = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            out.append(
                PlantedPair(int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4]))
            )
        except (ValueError, IndexError) as exc:
            raise StreamParseError(f"bad manifest row {row!r}: {exc}", line_no) from exc
    return out


def ingest(
    source: str | os.PathLike | IO[str], c_squared: int, master_seed: int
) -> BenchCorpus:
    """Replay an update stream into one sketch per row.

    All sketches share one SketchRandomness built from (d, c_squared,
    master_seed).  Malformed lines raise StreamParseError with their line
    number; a row whose net count for some item is outside {0, 1} after
    full replay raises StreamDataError.  Exact net sets are retained.
    """
    if hasattr(source, "read"):
        return _ingest(source, c_squared, master_seed)  # type: ignore[arg-type]
    with open(source, "r", encoding="ascii") as fh:
        return _ingest(fh, c_squared, master_seed)


def _ingest(fh: IO[str], c_squared: int, master_seed: int) -> BenchCorpus:
    header = fh.readline()
    parts = header.split()
    if len(parts) != 2:
        raise StreamParseError(f"expected header 'n d', got {header.rstrip()!r}", 1)
    try:
        n, d = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise StreamParseError(f"non-integer header {header.rstrip()!r}", 1) from exc
    if n < 0 or d < 1:
        raise StreamParseError(f"header requires n >= 0 and d >= 1, got n={n} d={d}", 1)
    items: list[list[int]] = [[] for _ in range(n)]
    values: list[list[int]] = [[] for _ in range(n)]
    for line_no, line in enumerate(fh, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise StreamParseError(f"expected 'j i v', got {line.rstrip()!r}", line_no)
        try:
            j, i, v = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise StreamParseError(f"non-integer update {line.rstrip()!r}", line_no) from exc
        if not 0 <= j < n:
            raise StreamParseError(f"row {j} outside [0, {n})", line_no)
        if not 0 <= i < d:
            raise StreamParseError(f"item {i} outside [0, {d})", line_no)
        if v not in (1, -1):
            raise StreamParseError(f"value must be +1 or -1, got {v}", line_no)
        items[j].append(i)
        values[j].append(v)
    randomness = SketchRandomness(d, c_squared, master_seed)
    sketches: list[LevelSketch] = []
    sets: list[np.ndarray] = []
    for j in range(n):
        sketch = LevelSketch(randomness)
        if items[j]:
            arr_i = np.asarray(items[j], dtype=np.int64)
            arr_v = np.asarray(values[j], dtype=np.int64)
            sketch.update_many(arr_i, arr_v)
            uniq, inverse = np.unique(arr_i, return_inverse=True)
            net = np.bincount(inverse, weights=arr_v).astype(np.int64)
            bad = np.flatnonzero((net != 0) & (net != 1))
            if bad.size:
                raise StreamDataError(
                    f"row {j}: item {int(uniq[bad[0]])} has net count {int(net[bad[0]])}"
                )
            sets.append(uniq[net == 1])
        else:
            sets.append(np.empty(0, dtype=np.int64))
        sketches.append(sketch)
    return BenchCorpus(randomness, sketches, sets)


def alpha_level(alpha: float, max_level: int) -> int:
    """Sketch level whose tail sampling rate is closest to `alpha` from below.

    Level k retains items with probability 2^-k, so alpha maps to
    ceil(log2(1/alpha)) - 1, clamped to the valid range; the -1 keeps the
    realized rate at or above the requested one.  alpha=1 maps to level 0,
    which applies no subsampling at all.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if max_level < 0:
        raise ValueError(f"max_level must be non-negative, got {max_level!r}")
    k = math.ceil(math.log2(1.0 / alpha)) - 1
    return min(max(k, 0), max_level)


def _exact_jaccard(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.intersect1d(a, b, assume_unique=True).size
    union = a.size + b.size - inter
    return inter / union if union else 1.0


@dataclass(frozen=True)
class DeviationRow:
    """One (c_squared, alpha) cell of a deviation report."""

    c_squared: int
    alpha: float
    level: int
    trials: int
    n_high: int
    n_low: int
    mean_dev_high: float
    mean_dev_low: float
    mean_dev_total: float
    build_seconds: float
    query_seconds: float


def deviation_report(
    sets: Sequence[np.ndarray],
    manifest: Sequence[PlantedPair],
    d: int,
    grid: Sequence[tuple[int, float]] = DEFAULT_GRID,
    *,
    trials: int = 10,
    split: float = 0.2,
    low_sample: int = 2000,
    master_seed: int = 0,
) -> list[DeviationRow]:
    """Mean absolute similarity deviation per parameter combination.

    Every manifest pair is estimated with fresh sketch randomness in each
    trial, at the level derived from alpha, and |estimate - exact| is
    averaged separately for pairs with exact similarity >= split (high)
    and < split (low).  Since planted manifests rarely contain low pairs,
    up to low_sample random distinct row pairs are added to the evaluation
    with their exact similarities computed from the sets.
    """
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials!r}")
    max_level = math.ceil(math.log2(d)) if d > 1 else 0
    params = jaccard(d)
    pairs: list[tuple[int, int, float]] = [
        (p.id_a, p.id_b, p.exact_similarity) for p in manifest
    ]
    taken = {(min(p.id_a, p.id_b), max(p.id_a, p.id_b)) for p in manifest}
    if low_sample > 0 and len(sets) >= 2:
        rng = _rng(master_seed, _TAG_LOW_PAIRS)
        limit = len(sets) * (len(sets) - 1) // 2
        want = min(low_sample, limit - len(taken))
        while want > 0:
            draw = rng.integers(0, len(sets), size=(want * 2 + 8, 2))
            for a, b in draw:
                if a == b:
                    continue
                key = (int(min(a, b)), int(max(a, b)))
                if key in taken:
                    continue
                taken.add(key)
                pairs.append((key[0], key[1], _exact_jaccard(sets[key[0]], sets[key[1]])))
                want -= 1
                if want == 0:
                    break
    needed = sorted({idx for a, b, _ in pairs for idx in (a, b)})
    rows: list[DeviationRow] = []
    for ci, (c_squared, alpha) in enumerate(grid):
        level = alpha_level(alpha, max_level)
        build_s = query_s = 0.0
        sum_high = sum_low = 0.0
        hits_high = hits_low = 0
        for t in range(trials):
            randomness = SketchRandomness(d, c_squared, _child_seed(master_seed, _TAG_DEVIATION, ci, t))
            t0 = time.perf_counter()
            sketches: dict[int, LevelSketch] = {}
            for idx in needed:
                sk = LevelSketch(randomness)
                if sets[idx].size:
                    sk.update_many(sets[idx], 1)
                sketches[idx] = sk
            build_s += time.perf_counter() - t0
            t0 = time.perf_counter()
            for a, b, exact in pairs:
                estimate = similarity_from_level(sketches[a], sketches[b], level, params)
                dev = abs(estimate - exact)
                if exact >= split:
                    sum_high += dev
                    hits_high += 1
                else:
                    sum_low += dev
                    hits_low += 1
            query_s += time.perf_counter() - t0
        total = hits_high + hits_low
        rows.append(
            DeviationRow(
                c_squared=c_squared,
                alpha=alpha,
                level=level,
                trials=trials,
                n_high=hits_high // trials,
                n_low=hits_low // trials,
                mean_dev_high=sum_high / hits_high if hits_high else float("nan"),
                mean_dev_low=sum_low / hits_low if hits_low else float("nan"),
                mean_dev_total=(sum_high + sum_low) / total if total else float("nan"),
                build_seconds=build_s,
                query_seconds=query_s,
            )
        )
    return rows


@dataclass(frozen=True)
class ScurveRow:
    """Empirical vs theoretical candidate probability for one similarity bin."""

    r: int
    l: int
    alpha: float
    c_squared: int
    level: int
    bin_low: float
    bin_high: float
    n_pairs: int
    empirical_probability: float
    theoretical_probability: float


def scurve_report(
    sets: Sequence[np.ndarray],
    manifest: Sequence[PlantedPair],
    d: int,
    grid: Sequence[tuple[int, int, float, int]],
    *,
    trials: int = 5,
    bin_width: float = 0.05,
    master_seed: int = 0,
) -> list[ScurveRow]:
    """Empirical banding curve over the manifest's similarity spread.

    For each (r, l, alpha, c_squared) grid point, every manifest pair is
    tested for a banded min-hash collision at the alpha-derived level,
    with fresh randomness per trial; pairs pool into bins of their exact
    similarity, and each bin's empirical frequency is reported next to
    1-(1-s^r)^l at the bin center.  Pairs whose row at the level is empty
    never collide.  n_pairs counts pair-trial evaluations.
    """
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials!r}")
    if not (0.0 < bin_width <= 1.0):
        raise ValueError(f"bin_width must lie in (0, 1], got {bin_width!r}")
    max_level = math.ceil(math.log2(d)) if d > 1 else 0
    n_bins = math.ceil(1.0 / bin_width)
    out: list[ScurveRow] = []
    for gi, (r, l, alpha, c_squared) in enumerate(grid):
        if r < 1 or l < 1:
            raise ValueError(f"banding shape must be positive, got r={r} l={l}")
        level = alpha_level(alpha, max_level)
        hits = np.zeros(n_bins, dtype=np.int64)
        totals = np.zeros(n_bins, dtype=np.int64)
        for t in range(trials):
            randomness = SketchRandomness(
                d, c_squared, _child_seed(master_seed, _TAG_SCURVE, gi, t)
            )
            specs = [
                randomness.minhash_spec(level, rep, band)
                for rep in range(l)
                for band in range(r)
            ]
            signatures: dict[int, np.ndarray | None] = {}

            def signature_of(idx: int) -> np.ndarray | None:
                if idx not in signatures:
                    sk = LevelSketch(randomness)
                    if sets[idx].size:
                        sk.update_many(sets[idx], 1)
                    positions = np.flatnonzero(sk.buckets[level])
                    if positions.size:
                        signatures[idx] = minhash_positions(positions, specs).reshape(l, r)
                    else:
                        signatures[idx] = None
                return signatures[idx]

            for p in manifest:
                sig_a = signature_of(p.id_a)
                sig_b = signature_of(p.id_b)
                collide = (
                    sig_a is not None
                    and sig_b is not None
                    and bool(np.any(np.all(sig_a == sig_b, axis=1)))
                )
                idx = min(int(p.exact_similarity / bin_width), n_bins - 1)
                totals[idx] += 1
                hits[idx] += collide
        for idx in np.flatnonzero(totals):
            low = idx * bin_width
            out.append(
                ScurveRow(
                    r=r,
                    l=l,
                    alpha=alpha,
                    c_squared=c_squared,
                    level=level,
                    bin_low=low,
                    bin_high=low + bin_width,
                    n_pairs=int(totals[idx]),
                    empirical_probability=float(hits[idx] / totals[idx]),
                    theoretical_probability=amplification_probability(
                        low + bin_width / 2.0, r, l
                    ),
                )
            )
    return out


@dataclass(frozen=True)
class TimingRow:
    """Wall-clock comparison of sketch vs exact all-pairs similarity."""

    c_squared: int
    alpha: float
    level: int
    n: int
    d: int
    sketch_build_seconds: float
    sketch_query_seconds: float
    exact_query_seconds: float
    speedup_ratio: float | None


def _pairwise_from_intersections(inter: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    union = sizes[:, None] + sizes[None, :] - inter
    sims = np.ones_like(inter, dtype=np.float64)
    np.divide(inter, union, out=sims, where=union > 0)
    return sims


def timing_report(
    sets: Sequence[np.ndarray],
    d: int,
    c_squared: int,
    alpha: float,
    master_seed: int = 0,
) -> TimingRow:
    """Time all-pairs Jaccard on single-level sketch rows vs exact sets.

    The sketch path reduces every set to its nonzero bucket pattern at the
    alpha-derived level (a c_squared-wide binary vector, independent of d)
    and computes all pairwise intersections with one dense matmul; the
    exact path does the same through a sparse n-by-d matrix product.
    Set construction and sketch building are excluded from query times.
    The ratio is exact over sketch time, or None when fewer than two sets.
    """
    n = len(sets)
    max_level = math.ceil(math.log2(d)) if d > 1 else 0
    level = alpha_level(alpha, max_level)
    randomness = SketchRandomness(d, c_squared, _child_seed(master_seed, _TAG_TIMING))
    t0 = time.perf_counter()
    patterns = np.zeros((n, c_squared), dtype=np.float32)
    for j, items in enumerate(sets):
        sk = LevelSketch(randomness)
        if items.size:
            sk.update_many(items, 1)
        patterns[j] = sk.buckets[level] != 0
    build_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    inter = patterns @ patterns.T
    sketch_sims = _pairwise_from_intersections(inter.astype(np.float64), patterns.sum(axis=1))
    sketch_s = time.perf_counter() - t0

    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([s.size for s in sets])
    indices = np.concatenate([s for s in sets]) if n else np.empty(0, dtype=np.int64)
    data = np.ones(indices.size, dtype=np.float32)
    matrix = scipy.sparse.csr_matrix((data, indices, indptr), shape=(n, d))
    sizes = np.asarray([s.size for s in sets], dtype=np.float64)
    t0 = time.perf_counter()
    exact_inter = (matrix @ matrix.T).toarray().astype(np.float64)
    exact_sims = _pairwise_from_intersections(exact_inter, sizes)
    exact_s = time.perf_counter() - t0
    del sketch_sims, exact_sims

    ratio = exact_s / sketch_s if n >= 2 and sketch_s > 0 else None
    return TimingRow(
        c_squared=c_squared,
        alpha=alpha,
        level=level,
        n=n,
        d=d,
        sketch_build_seconds=build_s,
        sketch_query_seconds=sketch_s,
        exact_query_seconds=exact_s,
        speedup_ratio=ratio,
    )


def _format_cell(value: object) -> str:
    if value is None:
        return "na"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_report(
    out: str | os.PathLike | IO[str],
    params: Mapping[str, object],
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
) -> None:
    """Shared CSV shape: one '# key=value ...' echo line, header, data rows."""
    if hasattr(out, "write"):
        fh = out
        close = False
    else:
        fh = open(out, "w", encoding="ascii", newline="")
        close = True
    try:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in params.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
    finally:
        if close:
            fh.close()


def write_deviation_csv(
    rows: Sequence[DeviationRow], out: str | os.PathLike | IO[str], params: Mapping[str, object]
) -> None:
    _write_report(
        out,
        params,
        [
            "c_squared",
            "alpha",
            "level",
            "trials",
            "n_high",
            "n_low",
            "mean_dev_high",
            "mean_dev_low",
            "mean_dev_total",
            "build_seconds",
            "query_seconds",
        ],
        (
            [
                r.c_squared,
                r.alpha,
                r.level,
                r.trials,
                r.n_high,
                r.n_low,
                r.mean_dev_high,
                r.mean_dev_low,
                r.mean_dev_total,
                r.build_seconds,
                r.query_seconds,
            ]
            for r in rows
        ),
    )


def write_scurve_csv(
    rows: Sequence[ScurveRow], out: str | os.PathLike | IO[str], params: Mapping[str, object]
) -> None:
    _write_report(
        out,
        params,
        [
            "r",
            "l",
            "alpha",
            "c_squared",
            "level",
            "bin_low",
            "bin_high",
            "n_pairs",
            "empirical_probability",
            "theoretical_probability",
        ],
        (
            [
                row.r,
                row.l,
                row.alpha,
                row.c_squared,
                row.level,
                row.bin_low,
                row.bin_high,
                row.n_pairs,
                row.empirical_probability,
                row.theoretical_probability,
            ]
            for row in rows
        ),
    )


def write_timing_csv(
    rows: Sequence[TimingRow], out: str | os.PathLike | IO[str], params: Mapping[str, object]
) -> None:
    _write_report(
        out,
        params,
        [
            "c_squared",
            "alpha",
            "level",
            "n",
            "d",
            "sketch_build_seconds",
            "sketch_query_seconds",
            "exact_query_seconds",
            "speedup_ratio",
        ],
        (
            [
                r.c_squared,
                r.alpha,
                r.level,
                r.n,
                r.d,
                r.sketch_build_seconds,
                r.sketch_query_seconds,
                r.exact_query_seconds,
                r.speedup_ratio,
            ]
            for r in rows
        ),
    )
