"""Explainable intrusion detection on tabular traffic data.

Pieces: CSV preprocessing, a variational autoencoder for compact
representations, teacher-to-student distillation, additive break-down
attributions, metrics, a pipeline over file artifacts, an HTTP service,
and a CLI that drives the service.
"""

__version__ = "0.1.0"

from .errors import DataError, DivergenceError, UsageError, XidsError

__all__ = ["DataError", "DivergenceError", "UsageError", "XidsError", "__version__"]
