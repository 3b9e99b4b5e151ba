"""psb: order a media collection so a per-item scalar feature traces a
narrative-arc template curve.

The pipeline normalizes one named feature per track onto [0, 1], samples
the template curve at the playlist's grid positions, and assigns tracks to
positions with a bottleneck-optimal, then total-deviation-optimal perfect
matching.
"""

from .feature_model import (
    ContrastiveLossInput,
    FeatureManifest,
    TrackRecord,
    ZetaProjection,
    contrastive_loss,
    load_manifest,
    load_zeta_weights,
    normalize,
    select_feature,
    zeta,
)
from .template_curve import (
    PolySegment,
    TemplateCurve,
    default_narrative_curve,
    eval_template,
    load_curve,
    sample_positions,
    validate_curve,
)

__version__ = "1.0.0"

__all__ = [
    "__version__",
    "ContrastiveLossInput",
    "FeatureManifest",
    "TrackRecord",
    "ZetaProjection",
    "contrastive_loss",
    "load_manifest",
    "load_zeta_weights",
    "normalize",
    "select_feature",
    "zeta",
    "PolySegment",
    "TemplateCurve",
    "default_narrative_curve",
    "eval_template",
    "load_curve",
    "sample_positions",
    "validate_curve",
]
