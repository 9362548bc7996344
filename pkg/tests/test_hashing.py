"""Hash family behavior: multiply-shift values, level split, min-hash law."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dynlsh import (
    HashSpec,
    SketchRandomness,
    hash_array,
    hash_key,
    lsb,
    lsb_array,
    minhash_positions,
    minhash_signature,
    mix64,
    mixed_hash_array,
    random_hash_spec,
)


class TestHashSpec:
    def test_identity_spec_is_identity(self):
        spec = HashSpec(a=1, b=0, output_bits=64)
        assert hash_key(spec, 5) == 5
        assert hash_key(spec, 2**63) == 2**63

    def test_array_matches_scalar(self):
        rng = np.random.default_rng(72004)
        spec = random_hash_spec(rng, 17)
        keys = rng.integers(0, 2**63, size=500, dtype=np.uint64)
        values = hash_array(spec, keys)
        assert values.dtype == np.uint64
        for k, v in zip(keys[:50], values[:50]):
            assert hash_key(spec, int(k)) == int(v)

    def test_output_range(self):
        rng = np.random.default_rng(72005)
        spec = random_hash_spec(rng, 8)
        keys = rng.integers(0, 2**63, size=10_000, dtype=np.uint64)
        assert hash_array(spec, keys).max() < 256
        assert mixed_hash_array(spec, keys).max() < 256

    def test_even_multiplier_rejected(self):
        with pytest.raises(ValueError):
            HashSpec(a=2, b=0, output_bits=10)

    def test_output_bits_bounds(self):
        with pytest.raises(ValueError):
            HashSpec(a=1, b=0, output_bits=0)
        with pytest.raises(ValueError):
            HashSpec(a=1, b=0, output_bits=65)

    def test_offset_bounds(self):
        with pytest.raises(ValueError):
            HashSpec(a=1, b=2**64, output_bits=10)

    def test_random_spec_deterministic_per_seed(self):
        s1 = random_hash_spec(np.random.default_rng(9), 16)
        s2 = random_hash_spec(np.random.default_rng(9), 16)
        assert s1 == s2
        assert s1.a % 2 == 1


class TestCollisionLaw:
    def test_pairwise_collision_rate_near_uniform(self):
        """Random distinct key pairs collide at about 2^-bits.

        40 fresh specs, 10^5 pairs each; both the raw multiply-shift and
        the mixed variant must sit within 3e-4 of 1/1024.
        """
        for fn in (hash_array, mixed_hash_array):
            rng = np.random.default_rng(72001)
            collisions = 0
            total = 0
            for _ in range(40):
                spec = random_hash_spec(rng, 10)
                keys = rng.integers(0, 2**63, size=(100_000, 2), dtype=np.uint64)
                keys = keys[keys[:, 0] != keys[:, 1]]
                h = fn(spec, keys.ravel()).reshape(-1, 2)
                collisions += int((h[:, 0] == h[:, 1]).sum())
                total += len(h)
            assert abs(collisions / total - 2**-10) < 3e-4


class TestMix:
    def test_zero_is_a_fixed_point(self):
        assert mix64(np.zeros(1, dtype=np.uint64))[0] == 0

    def test_bijective_on_large_sample(self):
        rng = np.random.default_rng(72006)
        keys = np.unique(rng.integers(0, 2**63, size=10**6, dtype=np.uint64))
        assert len(np.unique(mix64(keys))) == len(keys)

    def test_strided_keys_collapse_without_mixing(self):
        """Regression: an arithmetic progression of keys whose product step
        sits near 2^64/3 crowds the plain top bits into a handful of
        buckets, while the mixed variant stays near uniform occupancy.
        """
        a = 0x9E3779B97F4A7C15
        stride = (round(2**64 / 3) * pow(a, -1, 2**64)) % 2**64
        spec = HashSpec(a, 12345, 10)
        keys = np.arange(4096, dtype=np.uint64) * np.uint64(stride) + np.uint64(77)
        assert len(np.unique(hash_array(spec, keys))) <= 8
        occupied = len(np.unique(mixed_hash_array(spec, keys)))
        # 1024 * (1 - (1 - 1/1024)^4096) is about 1005
        assert occupied > 900


class TestLsb:
    def test_known_values(self):
        assert lsb(1) == 0
        assert lsb(4) == 2
        assert lsb(6) == 1
        assert lsb(0, 12) == 12
        assert lsb(0) == 64

    def test_array_matches_scalar(self):
        rng = np.random.default_rng(72007)
        values = rng.integers(0, 2**63, size=2000, dtype=np.uint64)
        values[:5] = [0, 1, 2, 2**62, 2**63 - 1]
        out = lsb_array(values, 64)
        for v, o in zip(values, out):
            assert lsb(int(v), 64) == int(o)

    def test_geometric_split_over_uniform_keys(self):
        rng = np.random.default_rng(72008)
        values = rng.integers(0, 2**64, size=10**6, dtype=np.uint64)
        out = lsb_array(values, 64)
        for k in range(9):
            frac = float((out == k).mean())
            assert abs(frac - 2.0 ** -(k + 1)) <= 0.1 * 2.0 ** -(k + 1)


class TestMinhash:
    def test_all_zero_row_has_no_signature(self):
        spec = HashSpec(a=1, b=0, output_bits=64)
        assert minhash_signature(np.zeros(16, dtype=np.int64), spec) is None

    def test_single_nonzero_bucket_wins_under_every_seed(self):
        rng = np.random.default_rng(72009)
        row = np.zeros(64, dtype=np.int64)
        row[37] = -2  # sign and magnitude must not matter
        for _ in range(100):
            assert minhash_signature(row, random_hash_spec(rng, 64)) == 37

    def test_signature_depends_only_on_support(self):
        rng = np.random.default_rng(72010)
        spec = random_hash_spec(rng, 64)
        row_a = np.zeros(128, dtype=np.int64)
        row_b = np.zeros(128, dtype=np.int64)
        support = rng.choice(128, size=20, replace=False)
        row_a[support] = 1
        row_b[support] = rng.choice([-3, 2, 9], size=20)
        assert minhash_signature(row_a, spec) == minhash_signature(row_b, spec)

    def test_positions_agree_with_signature(self):
        rng = np.random.default_rng(72011)
        row = np.zeros(256, dtype=np.int64)
        row[rng.choice(256, size=31, replace=False)] = 1
        specs = [random_hash_spec(rng, 64) for _ in range(25)]
        batch = minhash_positions(np.flatnonzero(row), specs)
        singles = [minhash_signature(row, s) for s in specs]
        assert_array_equal(batch, np.asarray(singles))

    def test_positions_empty_input_yields_sentinels(self):
        specs = [HashSpec(a=3, b=1, output_bits=64)]
        assert_array_equal(
            minhash_positions(np.empty(0, dtype=np.int64), specs),
            np.asarray([-1]),
        )

    def test_positions_require_uniform_output_bits(self):
        specs = [HashSpec(a=3, b=0, output_bits=64), HashSpec(a=5, b=0, output_bits=32)]
        with pytest.raises(ValueError):
            minhash_positions(np.asarray([1, 2]), specs)

    def test_collision_law_matches_pattern_jaccard(self):
        """Empirical signature-collision frequency tracks |P&Q|/|P|Q|.

        One fixed pair of 24 element patterns sharing half their support,
        10^4 independent seeds; the frequency must land within 0.03 of the
        exact value 1/3.
        """
        rng = np.random.default_rng(72003)
        p = np.zeros(256, dtype=np.int64)
        q = np.zeros(256, dtype=np.int64)
        pa = rng.choice(256, size=24, replace=False)
        rest = np.setdiff1d(np.arange(256), pa)
        qa = np.concatenate([pa[:12], rng.choice(rest, size=12, replace=False)])
        p[pa] = 1
        q[qa] = 1
        exact = len(np.intersect1d(pa, qa)) / len(np.union1d(pa, qa))
        hits = 0
        for _ in range(10**4):
            spec = random_hash_spec(rng, 64)
            hits += minhash_signature(p, spec) == minhash_signature(q, spec)
        assert_allclose(exact, 1 / 3, rtol=1e-12)
        assert abs(hits / 10**4 - exact) <= 0.03


class TestSketchRandomness:
    def test_equality_follows_construction_parameters(self):
        r1 = SketchRandomness(1024, 256, 5)
        r2 = SketchRandomness(1024, 256, 5)
        r3 = SketchRandomness(1024, 256, 6)
        assert r1 == r2
        assert hash(r1) == hash(r2)
        assert r1 != r3
        assert r1 != SketchRandomness(2048, 256, 5)

    def test_identical_seeds_produce_identical_specs(self):
        r1 = SketchRandomness(1024, 256, 5)
        r2 = SketchRandomness(1024, 256, 5)
        assert r1.level_spec == r2.level_spec
        assert r1.bucket_specs == r2.bucket_specs

    def test_shape_fields(self):
        rnd = SketchRandomness(1000, 256, 0)
        assert rnd.max_level == 10
        assert rnd.num_levels == 11
        assert rnd.bucket_bits == 8
        assert len(rnd.bucket_specs) == 11
        assert all(s.output_bits == 8 for s in rnd.bucket_specs)
        assert rnd.level_spec.output_bits == 64

    def test_validation(self):
        with pytest.raises(ValueError):
            SketchRandomness(0, 256, 0)
        with pytest.raises(ValueError):
            SketchRandomness(16, 100, 0)  # not a power of two
        with pytest.raises(ValueError):
            SketchRandomness(16, 1, 0)
        with pytest.raises(ValueError):
            SketchRandomness(16, 256, -1)

    def test_levels_are_clamped_and_geometric(self):
        rnd = SketchRandomness(2**20, 256, 72002)
        levels = rnd.levels_of(np.arange(10**6, dtype=np.int64))
        assert levels.min() >= 0
        assert levels.max() <= rnd.max_level
        for k in range(9):
            frac = float((levels == k).mean())
            assert abs(frac - 2.0 ** -(k + 1)) <= 0.1 * 2.0 ** -(k + 1)

    def test_buckets_of_range(self):
        rnd = SketchRandomness(4096, 64, 3)
        items = np.arange(4096, dtype=np.int64)
        for level in (0, 5, rnd.max_level):
            b = rnd.buckets_of(level, items)
            assert b.min() >= 0
            assert b.max() < 64

    def test_minhash_spec_is_cached_and_seed_stable(self):
        rnd = SketchRandomness(4096, 64, 3)
        again = SketchRandomness(4096, 64, 3)
        spec = rnd.minhash_spec(2, 1, 0)
        assert rnd.minhash_spec(2, 1, 0) is spec
        assert again.minhash_spec(2, 1, 0) == spec
        assert rnd.minhash_spec(2, 1, 1) != spec

    def test_spawn_changes_every_spec(self):
        rnd = SketchRandomness(4096, 64, 3)
        child = rnd.spawn(0)
        other = rnd.spawn(1)
        assert child != rnd
        assert child != other
        assert child.level_spec != rnd.level_spec
        assert child.bucket_specs[0] != rnd.bucket_specs[0]
        assert (child.d, child.c_squared) == (rnd.d, rnd.c_squared)
