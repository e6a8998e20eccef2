"""Flow-conditioned frame synthesis: pyramids, recurrent model, style losses."""

from .model import (
    DESK_WIDTHS,
    FULL_WIDTHS,
    OVERRIDE_LOGIT,
    SynthesisModel,
    blend_scale,
    synthesize_frame,
)
from .pyramid import MIN_RESOLUTION, PyramidLevel, build_pyramid, num_scales
from .style import StyleExtractor, gram_matrix, style_loss
from .training import (
    FramePairSource,
    SynthTrainResult,
    evaluate_synthesizer,
    fvs_train_step,
    load_synthesizer,
    save_synthesizer,
    train_synthesizer,
)

__all__ = [
    "DESK_WIDTHS",
    "FULL_WIDTHS",
    "MIN_RESOLUTION",
    "OVERRIDE_LOGIT",
    "FramePairSource",
    "PyramidLevel",
    "StyleExtractor",
    "SynthTrainResult",
    "SynthesisModel",
    "blend_scale",
    "build_pyramid",
    "evaluate_synthesizer",
    "fvs_train_step",
    "gram_matrix",
    "load_synthesizer",
    "num_scales",
    "save_synthesizer",
    "style_loss",
    "synthesize_frame",
    "train_synthesizer",
]
