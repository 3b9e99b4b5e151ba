"""Global tempo estimation behind the psb extractor subprocess contract."""

from .estimator import TempoEstimate, extract_tempo
from .model import TempoModel, load_model

__version__ = "1.0.0"

__all__ = ["TempoEstimate", "TempoModel", "extract_tempo", "load_model", "__version__"]
