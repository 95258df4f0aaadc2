"""Multi-scale single-image super-resolution with a channel-split
group-convolution trunk, self-contained numeric kernels, tape-based
reverse-mode differentiation, training, and Y-channel evaluation."""

from .errors import ContractViolation, CorpusError, TrainingDiverged, ValveError
from .kernels import (ConvParams, Tensor, add, bicubic_resize, concat_channels,
                      conv2d_backward, conv2d_forward, pixel_shuffle,
                      pixel_unshuffle, relu, relu_backward, split_channels)
from .autodiff import Tape, Var, forward_record
from .model import (GebParams, ModelConfig, ModelParams, geb_forward, init_model,
                    model_forward, named_params, record_forward,
                    record_forward_multi, trunk_forward, upsample_forward)
from .accounting import count_flops, count_params
from .checkpoint import (CheckpointDimOverflowError, CheckpointError,
                         CheckpointFormatError, CheckpointMagicError,
                         CheckpointTruncatedError, CheckpointVersionError,
                         load_checkpoint, save_checkpoint)
from .data import (ImageRecord, PatchBatch, ingest_corpus, load_image,
                   mod_crop, sample_batch, save_image)
from .training import (AdamState, TrainSchedule, adam_step, lr_at, mse_loss,
                       train, write_loss_log)
from .metrics import (MetricReport, evaluate, evaluate_bicubic, evaluate_model,
                      psnr, rgb_to_y, ssim)

__version__ = "0.1.0"
