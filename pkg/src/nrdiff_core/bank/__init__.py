"""Noise bank construction, selection and file format."""

from .noise_bank import (
    BankStatistics,
    NoiseBank,
    bank_statistics,
    build_bank,
    draw_training_noise,
    regenerate_vector,
)
from .selector import RadiusReport, gaussian_radius, select_noise, theoretical_radius
from .storage import load_bank, save_bank

__all__ = [
    "BankStatistics",
    "NoiseBank",
    "RadiusReport",
    "bank_statistics",
    "build_bank",
    "draw_training_noise",
    "gaussian_radius",
    "load_bank",
    "regenerate_vector",
    "save_bank",
    "select_noise",
    "theoretical_radius",
]
