"""Diffusion schedule and forward/reverse processes."""

from .process import (
    ImageTensor,
    NoisePredictor,
    derive_seed,
    forward_diffuse,
    fresh_noise_for_step,
    nr_forward_diffuse,
    reconstruct_x0,
    reverse_step,
    sample,
)
from .schedule import NoiseSchedule, build_schedule, rescaled_bounds

__all__ = [
    "ImageTensor",
    "NoisePredictor",
    "NoiseSchedule",
    "build_schedule",
    "derive_seed",
    "fresh_noise_for_step",
    "rescaled_bounds",
    "forward_diffuse",
    "nr_forward_diffuse",
    "reconstruct_x0",
    "reverse_step",
    "sample",
]
