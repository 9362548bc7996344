"""Sketch-based set similarity estimation and search over dynamic streams.

The package keeps one small linear sketch per set, built from signed
coordinate updates so deletions are first-class, and answers similarity,
distance, and nearest-neighbor-candidate queries from the sketches alone.
"""

from .errors import (
    ConfigMismatchError,
    CounterOverflowError,
    GenerationError,
    ItemRangeError,
    StreamDataError,
    StreamParseError,
)
from .similarity import (
    RationalSimilarity,
    RootSimilarity,
    anderberg,
    exact_distance,
    exact_root_distance,
    exact_similarity,
    hamming,
    is_metric,
    is_root_lshable,
    jaccard,
    pair_counts,
    rogers_tanimoto,
    sorensen_dice,
)
from .hashing import (
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
from .sketch import (
    LevelSketch,
    SketchConfig,
    l0_estimate,
    lsb_sampling_level,
    merge,
    sample_level,
    similarity_at_level,
    similarity_from_level,
    sketch_from_bytes,
    sketch_to_bytes,
)
from .distance import DistanceEstimator, median_amplify
from .lsh import (
    CandidatePair,
    LshConfig,
    LshIndex,
    amplification_probability,
    candidate_levels,
    level_grid,
    minhash_pair_collides,
    sensitivity_report,
    write_candidates_csv,
)
from .bench import (
    BenchCorpus,
    DEFAULT_GRID,
    DEFAULT_PLANTED_RANGES,
    DeviationRow,
    GeneratedCorpus,
    PlantedPair,
    SIMILARITY_HISTOGRAM,
    ScurveRow,
    TimingRow,
    alpha_level,
    deviation_report,
    flip_probabilities,
    generate,
    generate_distribution,
    ingest,
    planted_partner,
    read_manifest,
    scurve_report,
    timing_report,
    write_deviation_csv,
    write_manifest,
    write_scurve_csv,
    write_stream,
    write_timing_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BenchCorpus",
    "CandidatePair",
    "ConfigMismatchError",
    "CounterOverflowError",
    "DEFAULT_GRID",
    "DEFAULT_PLANTED_RANGES",
    "DeviationRow",
    "DistanceEstimator",
    "GeneratedCorpus",
    "GenerationError",
    "HashSpec",
    "ItemRangeError",
    "LevelSketch",
    "LshConfig",
    "LshIndex",
    "PlantedPair",
    "RationalSimilarity",
    "RootSimilarity",
    "SIMILARITY_HISTOGRAM",
    "ScurveRow",
    "SketchConfig",
    "SketchRandomness",
    "StreamDataError",
    "StreamParseError",
    "TimingRow",
    "alpha_level",
    "amplification_probability",
    "anderberg",
    "candidate_levels",
    "deviation_report",
    "exact_distance",
    "exact_root_distance",
    "exact_similarity",
    "flip_probabilities",
    "generate",
    "generate_distribution",
    "hamming",
    "hash_array",
    "hash_key",
    "ingest",
    "is_metric",
    "is_root_lshable",
    "jaccard",
    "l0_estimate",
    "level_grid",
    "lsb",
    "lsb_array",
    "lsb_sampling_level",
    "median_amplify",
    "merge",
    "minhash_pair_collides",
    "minhash_positions",
    "minhash_signature",
    "mix64",
    "mixed_hash_array",
    "pair_counts",
    "planted_partner",
    "random_hash_spec",
    "read_manifest",
    "rogers_tanimoto",
    "sample_level",
    "scurve_report",
    "sensitivity_report",
    "similarity_at_level",
    "similarity_from_level",
    "sketch_from_bytes",
    "sketch_to_bytes",
    "sorensen_dice",
    "timing_report",
    "write_candidates_csv",
    "write_deviation_csv",
    "write_manifest",
    "write_scurve_csv",
    "write_stream",
    "write_timing_csv",
]
