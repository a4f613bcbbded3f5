"""aha: per-epoch mergeable leaf summaries with exact cohort roll-ups.

Ingest collapses each epoch's sessions into a compact table of mergeable
per-leaf statistics; any cohort's statistics for any later analysis are
reconstructed from those tables alone, exactly for decomposable statistics
and approximately (via histogram sketches) for quantiles.
"""

from .aggregates import (
    HistogramSketch,
    HistogramSpec,
    MetricAggregate,
    PartialAggregate,
    StatisticRequest,
    agg_from_session,
    finalize,
    merge,
    quantile_estimate,
)
from .cube import (
    CubeResult,
    EpochValue,
    cube,
    grouping_sets,
    naive_groupby_loop,
    query_pattern,
    query_pattern_over_time,
)
from .detectors import (
    AlertDiff,
    AlertPoint,
    AlertSeries,
    Decision,
    DetectorConfig,
    FeaturePoint,
    detect_knn,
    detect_three_sigma,
    extract_features,
    run_detector,
    whatif_replay,
)
from .errors import (
    CapacityError,
    ConfigMismatchError,
    EmptyCohortError,
    EngineError,
    EpochRangeError,
    PatternError,
    SchemaError,
    StoreError,
    UnknownValueError,
)
from .ingest import (
    IngestConfig,
    LeafTable,
    ingest_epoch,
    merge_tables,
    observed_leaf_fraction,
)
from .schema import (
    WILDCARD,
    AttributeSchema,
    CohortPattern,
    DatasetSchema,
    EpochId,
    MetricSchema,
    SessionBatch,
    SessionRecord,
    enumerate_grouping_sets,
    pattern_matches,
    possible_cohort_count,
    possible_leaf_count,
)
from .store import LoadResult, ReplayStore, load_range, persist, storage_ratio

__version__ = "0.1.0"
