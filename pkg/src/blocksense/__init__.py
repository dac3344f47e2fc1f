"""Detection and localization of a contiguous activation block from
compressive linear measurements."""

from .core import (Block, BlockFamily, BudgetError, ParameterError, RngHandle, SignalInstance,
                   enumerate_blocks, sample_instance, signal_value)
from .measure import (BudgetLedger, MeasurementRecord, allones_sensing, column_sensing,
                      gaussian_sensing, measure, row_sensing, trace_inner)
from .detect import detection_threshold, estimate_detection_risk, run_detection
from .passive import ScoreTable, block_sums, localize_passive, score
from .active import (approx_localize, build_collections, cbs_allocation, cbs_run,
                     exact_localize_columns, exact_localize_rows, localize_active)
from .bounds import BoundQuery
from .harness import SweepSpec, run_sweep, rescale_snr

__version__ = "0.1.0"
