"""Long-horizon forecasting with a global-autocorrelation contrastive loss."""

from .autocorr import AcfTable, global_acf, relation, relation_matrix, smooth
from .config import RunConfig, load_config
from .data import (Segment, Series, WindowBatch, WindowSpec, chrono_split, load_csv, sample_batch,
                   timestamp_features, window_count)
from .errors import (AutoconError, ConfigError, ContractError, DataError, DimensionError, DivergenceError,
                     DomainError, ParameterError)
from .loss import autocon_loss, autocon_loss_oracle
from .metrics import EvalReport, dtw_align, mae, mse, shape_dtw, temporal_dtw
from .model import ModelConfig, ModelParams, forward, total_loss
from .optim import Adam, adam_step
from .tensor import Value, backward

__version__ = "0.1.0"
