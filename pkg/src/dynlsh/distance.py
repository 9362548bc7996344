"""Distance estimation from pairs of level sketches.

The rational distance 1 - S decomposes into a weighted sum of set sizes
that are all recoverable from linear sketches: |A ^ B| is the number of
nonzero entries of the difference sketch, |A | B| of the sum sketch, and
exact cardinalities ride along in the sketches themselves.  For weights
with x >= y,

    denominator = y*d + (x - y)*|A | B| + (z' - x)*|A ^ B|

and for x < y the complement sets take over:

    denominator = (y - x)*|~A | ~B| + x*d + (z' - y)*|A ^ B|

(complement symmetric differences coincide with the original ones).  The
distance is (z' - z)*|A ^ B| / denominator.  Estimates sharpen by taking
the median over independently randomized sketch repetitions.
"""

from __future__ import annotations

import statistics
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigMismatchError
from .hashing import SketchRandomness
from .similarity import (
    RationalSimilarity,
    RootSimilarity,
    is_metric,
    is_root_lshable,
)
from .sketch import LevelSketch, l0_estimate, merge


def median_amplify(shot: Callable[[int], float], repetitions: int) -> float:
    """Median of shot(0), ..., shot(repetitions - 1); repetitions must be odd.

    With an odd count the median is always one of the observed values, so a
    per-shot success probability above 1/2 amplifies exponentially.
    """
    if repetitions < 1 or repetitions % 2 == 0:
        raise ValueError(f"repetitions must be a positive odd integer, got {repetitions!r}")
    return statistics.median(shot(i) for i in range(repetitions))


class DistanceEstimator:
    """Estimates rational (or root) distances between sketched sets.

    Construct with the similarity weights and either one SketchRandomness
    or a sequence of them; the sequence length is the repetition count
    (odd, for median amplification) and each slot must be an independently
    seeded randomness over the same (d, c_squared).  Estimate calls then
    accept a single LevelSketch per side when repetitions == 1, or a
    sequence of sketches aligned with the randomness slots.

    For weights with x < y the complement-set route needs the sketch of the
    full universe; it is built once per randomness slot on first use and
    cached.  Raw estimates are returned unclamped; only the additive
    similarity path clamps (below at 0) for reporting.
    """

    def __init__(
        self,
        params: RationalSimilarity | RootSimilarity,
        randomness: SketchRandomness | Sequence[SketchRandomness],
    ) -> None:
        self.params = params
        base = params.base if isinstance(params, RootSimilarity) else params
        if isinstance(randomness, SketchRandomness):
            randomness = (randomness,)
        slots = tuple(randomness)
        if not slots or len(slots) % 2 == 0:
            raise ValueError(
                f"need an odd number of randomness slots, got {len(slots)}"
            )
        for r in slots:
            if (r.d, r.c_squared) != (slots[0].d, slots[0].c_squared):
                raise ConfigMismatchError("all randomness slots must share d and c_squared")
            if r.d != base.d:
                raise ConfigMismatchError(
                    f"randomness universe {r.d} does not match params.d {base.d}"
                )
        self.randomness = slots
        self._all_ones: list[LevelSketch | None] = [None] * len(slots)

    @property
    def repetitions(self) -> int:
        return len(self.randomness)

    def _base(self) -> RationalSimilarity:
        p = self.params
        return p.base if isinstance(p, RootSimilarity) else p

    def _slots(self, side: LevelSketch | Sequence[LevelSketch]) -> tuple[LevelSketch, ...]:
        if isinstance(side, LevelSketch):
            side = (side,)
        sketches = tuple(side)
        if len(sketches) != self.repetitions:
            raise ConfigMismatchError(
                f"expected {self.repetitions} sketches, got {len(sketches)}"
            )
        for sk, rnd in zip(sketches, self.randomness):
            if sk.randomness != rnd:
                raise ConfigMismatchError("sketch randomness does not match estimator slot")
        return sketches

    def _ones(self, index: int) -> LevelSketch:
        ones = self._all_ones[index]
        if ones is None:
            ones = LevelSketch(self.randomness[index])
            ones.update_many(np.arange(ones.d, dtype=np.int64), 1)
            self._all_ones[index] = ones
        return ones

    def _distance_once(self, a: LevelSketch, b: LevelSketch, index: int) -> float:
        # normalize weights by z' so scaled parameterizations reuse the
        # exact same float operations
        p = self._base()
        if p.z_prime == 0.0:
            return 0.0  # then x = y = z = 0: similarity is identically 1
        x, y, z = p.x / p.z_prime, p.y / p.z_prime, p.z / p.z_prime
        sym = l0_estimate(merge(a, b, -1))
        if x >= y:
            union = l0_estimate(merge(a, b, 1))
            denom = y * p.d + (x - y) * union + (1.0 - x) * sym
        else:
            ones = self._ones(index)
            comp_union = l0_estimate(
                merge(merge(ones, a, -1), merge(ones, b, -1), 1)
            )
            denom = (y - x) * comp_union + x * p.d + (1.0 - y) * sym
        if denom <= 0.0:
            return 0.0  # vanishing denominator means similarity 1
        return (1.0 - z) * sym / denom

    def _distance_median(
        self,
        a: LevelSketch | Sequence[LevelSketch],
        b: LevelSketch | Sequence[LevelSketch],
    ) -> float:
        sa = self._slots(a)
        sb = self._slots(b)
        return median_amplify(
            lambda i: self._distance_once(sa[i], sb[i], i), self.repetitions
        )

    def estimate_distance(
        self,
        a: LevelSketch | Sequence[LevelSketch],
        b: LevelSketch | Sequence[LevelSketch],
    ) -> float:
        """Estimate 1 - S(A, B); requires metric weights (z' >= max(x, y, z)).

        Identical sketches give exactly 0.0: the difference sketch is
        all-zero, so the symmetric-difference estimate is exactly zero.
        """
        p = self._base()
        if isinstance(self.params, RootSimilarity):
            raise ValueError("use estimate_root_distance for root similarities")
        if not is_metric(p):
            raise ValueError(
                "weights are not metric (need z' >= max(x, y, z)); "
                "the additive similarity path remains available at the "
                "caller's own risk"
            )
        return self._distance_median(a, b)

    def estimate_root_distance(
        self,
        a: LevelSketch | Sequence[LevelSketch],
        b: LevelSketch | Sequence[LevelSketch],
    ) -> float:
        """Estimate (1 - S(A, B))^alpha for a root similarity.

        The denominator uses the intersection form
        y*d + (x - z')*|A & B| + (z' - y)*|A | B| with |A & B| recovered
        from the exact cardinalities as |A| + |B| - est(|A | B|).
        """
        if not isinstance(self.params, RootSimilarity):
            raise ValueError("estimate_root_distance needs RootSimilarity params")
        if not is_root_lshable(self.params):
            raise ValueError(
                "root similarity is not LSH-able (need z' >= ((alpha+1)/2)*max(x, y))"
            )
        alpha = self.params.alpha
        p = self._base()
        sa = self._slots(a)
        sb = self._slots(b)

        def shot(i: int) -> float:
            if p.z_prime == 0.0:
                return 0.0
            x, y, z = p.x / p.z_prime, p.y / p.z_prime, p.z / p.z_prime
            sym = l0_estimate(merge(sa[i], sb[i], -1))
            union = l0_estimate(merge(sa[i], sb[i], 1))
            inter = sa[i].cardinality + sb[i].cardinality - union
            denom = y * p.d + (x - 1.0) * inter + (1.0 - y) * union
            if denom <= 0.0:
                return 0.0
            base = (1.0 - z) * sym / denom
            return max(base, 0.0) ** alpha  # noise below 0 would break the root

        return median_amplify(shot, self.repetitions)

    def estimate_similarity_additive(
        self,
        a: LevelSketch | Sequence[LevelSketch],
        b: LevelSketch | Sequence[LevelSketch],
    ) -> float:
        """1 - estimate_distance, clamped below at 0 for reporting.

        Unlike estimate_distance this does not insist on metric weights:
        the decomposition stays computable (additively approximable) for
        weights like Sorensen-Dice, just without the metric guarantee.
        """
        if isinstance(self.params, RootSimilarity):
            raise ValueError("additive similarity applies to rational params only")
        return max(0.0, 1.0 - self._distance_median(a, b))
