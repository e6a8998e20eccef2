"""magniflow: diffusion-based motion magnification for video.

Synthesizes noise-free flow training data, trains a flow magnifier
(conditional diffusion over displacement fields) and a flow-conditioned frame
synthesizer on a small numpy autodiff engine, and magnifies sub-pixel motion
in videos end to end.
"""

from .config import RunConfig, load_config
from .pipeline import MagnifyResult, magnify_video, pair_indices

__version__ = "0.1.0"

__all__ = [
    "MagnifyResult",
    "RunConfig",
    "load_config",
    "magnify_video",
    "pair_indices",
]
