"""Predictive beamforming for integrated sensing and communication in vehicular networks."""

from .system import SystemParams, channel_matrix, steering_vector, sum_rate

__version__ = "0.1.0"
__all__ = ["SystemParams", "channel_matrix", "steering_vector", "sum_rate", "__version__"]
