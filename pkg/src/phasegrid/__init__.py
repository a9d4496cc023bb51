"""Training-regime phase diagrams for three-layer ReLU networks."""

__version__ = "0.1.0"

from .data import (Dataset, SyntheticSpec, load_idx, synthetic_1d,
                   write_idx_images, write_idx_labels)
from .errors import (ConfigError, IdxFormatError, MetricError, PhaseGridError,
                     SweepError)
from .experiment import (PhaseCell, RunRow, ScanResult, SlopeFit, SweepResult,
                         calibrate_normalized_lr, fit_slope, group_consistency,
                         phase_scan, run_config, seed_averaged_rd, width_sweep,
                         zero_crossing)
from .metrics import (RegimeMetrics, circular_variance, condensation_index,
                      cosine, cosine_matrix, regime_metrics, relative_change,
                      scatter_w1, top_rows_by_norm)
from .model import (Gradients, Network, Schedule, TrainRecord, backward,
                    forward, init_network, load_checkpoint, loss, predict,
                    save_checkpoint, train)
from .scaling import (HyperConfig, PowerLaw, ScalingSummary, config_from_gammas,
                      effective_lr, kappas, normalize, preset, time_factor)

__all__ = [name for name in dir() if not name.startswith("_")]
