"""histkit: moment-annotated histograms for telemetry pipelines.

Core pieces: an immutable :class:`Histogram` value type with exact merging,
moment-constrained CDF envelope bounds, the EMDCC information-loss metric
and information gain, a bit-exact binary wire format plus JSON interchange,
a DTrace output parser, and an in-process MapReduce aggregation harness.
"""

from . import errors
from .bounds import (
    BinConstraint,
    CdfBounds,
    EmdccReport,
    PerBinLoss,
    bounds_mean,
    bounds_mean_var,
    bounds_no_moment,
    bounds_pth_moment,
    emdcc_histogram,
    emdcc_mean_closed,
    emdcc_mean_var_closed,
    information_gain,
    mean_loss,
)
from .core import BinMoments, Ecdf, Histogram, build_histogram
from .ingest import (
    BucketScheme,
    DtraceAggregation,
    MapEmission,
    map_emit,
    parse_dtrace,
    reduce_pairs,
    simulate_mapreduce,
)
from .wire import decode, encode, encoded_size, from_json, to_json

__version__ = "0.1.0"

__all__ = [
    "BinConstraint",
    "BinMoments",
    "BucketScheme",
    "CdfBounds",
    "DtraceAggregation",
    "Ecdf",
    "EmdccReport",
    "Histogram",
    "MapEmission",
    "PerBinLoss",
    "bounds_mean",
    "bounds_mean_var",
    "bounds_no_moment",
    "bounds_pth_moment",
    "build_histogram",
    "decode",
    "emdcc_histogram",
    "emdcc_mean_closed",
    "emdcc_mean_var_closed",
    "encode",
    "encoded_size",
    "errors",
    "from_json",
    "information_gain",
    "map_emit",
    "mean_loss",
    "parse_dtrace",
    "reduce_pairs",
    "simulate_mapreduce",
    "to_json",
    "__version__",
]
