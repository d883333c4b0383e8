"""Quality metrics; experiment drivers live in ``nrdiff_core.analytics.experiments``."""

from .quality import (
    MetricRecord,
    evaluate_pair,
    normalized_mutual_information,
    perceptual_proxy,
    psnr,
)

__all__ = [
    "MetricRecord",
    "evaluate_pair",
    "normalized_mutual_information",
    "perceptual_proxy",
    "psnr",
]
