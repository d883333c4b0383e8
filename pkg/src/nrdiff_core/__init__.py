"""nrdiff-comm-core - noise-restricted diffusion for goal-oriented communication"""

from .__version__ import __version__
from .bank import NoiseBank, build_bank, select_noise
from .channel import ChannelModel, CodecConfig, decode_packet, encode_packet, transmit
from .controller import TrainingConfig, run_training
from .diffusion import NoiseSchedule, build_schedule, forward_diffuse, nr_forward_diffuse, sample
from .errors import NRDiffError
from .models import ArchitectureConfig, DenoiserModel
from .pipeline import PipelineConfig, end_to_end, rx, tx
from .semantics import SemanticCondition, extract_conditions, generate_scene

__all__ = [
    "__version__",
    "ArchitectureConfig",
    "ChannelModel",
    "CodecConfig",
    "DenoiserModel",
    "NRDiffError",
    "NoiseBank",
    "NoiseSchedule",
    "PipelineConfig",
    "SemanticCondition",
    "TrainingConfig",
    "build_bank",
    "build_schedule",
    "decode_packet",
    "encode_packet",
    "end_to_end",
    "extract_conditions",
    "forward_diffuse",
    "generate_scene",
    "nr_forward_diffuse",
    "run_training",
    "rx",
    "sample",
    "select_noise",
    "transmit",
    "tx",
]
