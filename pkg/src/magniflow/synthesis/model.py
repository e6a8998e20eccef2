"""Multi-scale recurrent synthesizer: (reference frame, flow) -> magnified frame."""

from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import CheckpointError, ContractError
from ..flowcore import FlowField, ImageBuffer
from .pyramid import build_pyramid, num_scales

DESK_WIDTHS = (8, 16, 32)
FULL_WIDTHS = (16, 32, 64)
# logits this large saturate the float32 sigmoid to exactly 1 (or 0)
OVERRIDE_LOGIT = 30.0
_W_BIAS_INIT = 3.0


def _groups_for(channels: int) -> int:
    # keep >= 4 channels per group so small feature maps retain statistics
    for g in (8, 4, 2):
        if channels % g == 0 and channels // g >= 4:
            return g
    return 1


def blend_scale(image_warped, residual, w_logits) -> nn.Tensor:
    """x = I_warp * sigmoid(w) + R, elementwise and unclamped."""
    return nn.add(nn.mul(nn.as_tensor(image_warped), nn.sigmoid(nn.as_tensor(w_logits))), nn.as_tensor(residual))


class SynthesisModel:
    """Coarse-to-fine warp/fuse/blend network.

    Per level the recurrence takes y (the warped image at the coarsest scale,
    the upsampled previous output elsewhere), fuses [y | warped features |
    flow] through a small U-Net, and decodes a 3-channel residual plus a
    1-channel blend logit map combined as I_warp * sigmoid(w) + R. Only the
    emitted frame is clamped; everything internal stays unclamped.
    """

    def __init__(self, widths=DESK_WIDTHS, seed: int = 0):
        widths = tuple(int(w) for w in widths)
        if len(widths) != 3 or min(widths) < 1:
            raise ContractError(f"widths must be three positive ints, got {widths}")
        self.widths = widths
        self.seed = int(seed)
        self.params = nn.ParameterSet()
        self._build(np.random.default_rng(self.seed))

    # ---- construction --------------------------------------------------

    def _add_conv(self, rng, name, cin, cout, k=3):
        fan_in = cin * k * k
        self.params.add(f"{name}/w", nn.kaiming_uniform(rng, (cout, cin, k, k), fan_in))
        self.params.add(f"{name}/b", np.zeros(cout, dtype=nn.current_dtype()))

    def _add_norm(self, rng, name, channels):
        self.params.add(f"{name}/g", np.ones(channels, dtype=nn.current_dtype()))
        self.params.add(f"{name}/s", np.zeros(channels, dtype=nn.current_dtype()))

    def _build(self, rng):
        enc, b0, b1 = self.widths
        self._add_conv(rng, "enc/c1", 3, enc)
        self._add_conv(rng, "enc/c2", enc, enc)
        self._add_conv(rng, "fuse/in", 3 + enc + 2, b0)
        self._add_conv(rng, "fuse/down", b0, b1)
        self._add_norm(rng, "fuse/dn", b1)
        self._add_conv(rng, "fuse/mid", b1, b1)
        self._add_norm(rng, "fuse/mn", b1)
        self._add_conv(rng, "fuse/up", b0 + b1, b0)
        self._add_norm(rng, "fuse/un", b0)
        self._add_conv(rng, "dec", b0, 4)
        # start near the pass-through regime: damped weights plus a +3 blend
        # bias (sigmoid ~ 0.95) keep the warped image dominant before any
        # training has shaped the decoder, without severing its gradients
        self.params["dec/w"].data = 0.01 * self.params["dec/w"].data
        bias = self.params["dec/b"].data.copy()
        bias[3] = _W_BIAS_INIT
        self.params["dec/b"].data = bias

    # ---- pieces ---------------------------------------------------------

    def _conv(self, name, x, padding=1):
        return nn.conv2d(x, self.params[f"{name}/w"], self.params[f"{name}/b"], padding=padding)

    def _norm(self, name, x):
        c = x.shape[1]
        return nn.group_norm(x, _groups_for(c), self.params[f"{name}/g"], self.params[f"{name}/s"])

    def encode(self, image) -> nn.Tensor:
        """Shared per-level feature encoder; width is fixed across scales."""
        h = nn.silu(self._conv("enc/c1", nn.as_tensor(image)))
        return nn.silu(self._conv("enc/c2", h))

    def _fuse(self, x):
        h0 = nn.silu(self._conv("fuse/in", x))
        pooled = h0.shape[2] % 2 == 0 and h0.shape[3] % 2 == 0 and min(h0.shape[2:]) > 1
        h = nn.resample2x(h0, "down") if pooled else h0
        h = nn.silu(self._norm("fuse/dn", self._conv("fuse/down", h)))
        h = nn.silu(self._norm("fuse/mn", self._conv("fuse/mid", h)))
        if pooled:
            h = nn.resample2x(h, "up")
        h = nn.concat([h, h0], axis=1)
        return nn.silu(self._norm("fuse/un", self._conv("fuse/up", h)))

    # ---- forward --------------------------------------------------------

    def forward(self, images, flows, levels=None, decoder_override: bool = False) -> nn.Tensor:
        """Synthesize (N, 3, H, W) frames, unclamped.

        ``decoder_override`` replaces every decoder output with (R = 0,
        w = +30), collapsing the network to pure backward warping; the test
        hook for exactness checks.
        """
        images = np.asarray(images, dtype=np.float64)
        flows = np.asarray(flows, dtype=np.float64)
        if images.ndim != 4 or images.shape[1] != 3:
            raise ContractError(f"images must be (N, 3, H, W), got {images.shape}")
        if levels is None:
            levels = num_scales(images.shape[2], images.shape[3])
        pyramid = build_pyramid(images, flows, levels, encoder=self.encode)

        x = None
        for lvl in pyramid:
            warped = nn.Tensor(lvl.image_warped)
            if x is None:
                y = warped
            else:
                y = nn.resample2x(x, "up")
                for axis in (2, 3):
                    if y.shape[axis] > lvl.image.shape[axis]:
                        y = nn.narrow(y, axis, 0, lvl.image.shape[axis])
            h = self._fuse(nn.concat([y, lvl.features_warped, nn.Tensor(lvl.flow)], axis=1))
            out = self._conv("dec", h)
            if decoder_override:
                n, _, hh, ww = out.shape
                residual = nn.Tensor(np.zeros((n, 3, hh, ww)))
                w_logits = nn.Tensor(np.full((n, 1, hh, ww), OVERRIDE_LOGIT))
            else:
                residual = nn.narrow(out, 1, 0, 3)
                w_logits = nn.narrow(out, 1, 3, 1)
            x = blend_scale(warped, residual, w_logits)
        return x

    # ---- persistence ----------------------------------------------------

    def config_dict(self) -> dict:
        return {"widths": list(self.widths), "seed": self.seed}

    @classmethod
    def from_config(cls, config: dict) -> "SynthesisModel":
        try:
            return cls(widths=config["widths"], seed=config["seed"])
        except KeyError as exc:
            raise CheckpointError(f"synthesizer config missing key {exc}") from exc


def _image_chw(image) -> tuple:
    """(3, H, W) float array plus the source channel count."""
    if isinstance(image, ImageBuffer):
        image = image.data
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ContractError(f"expected (H, W, 1|3) frame, got {arr.shape}")
    chw = np.moveaxis(arr, -1, 0)
    channels = chw.shape[0]
    if channels == 1:
        chw = np.repeat(chw, 3, axis=0)
    return chw, channels


def synthesize_frame(model: SynthesisModel, image, flow, *, levels=None, decoder_override=False) -> ImageBuffer:
    """Emit one magnified frame, clamped to [0, 1].

    Grayscale frames ride through the 3-channel network replicated and come
    back averaged, so identity cases stay exact.
    """
    chw, channels = _image_chw(image)
    if isinstance(flow, FlowField):
        flow = np.stack([flow.u, flow.v])
    flow = np.asarray(flow, dtype=np.float64)
    if flow.shape != (2,) + chw.shape[1:]:
        raise ContractError(f"flow shape {flow.shape} does not match frame {chw.shape[1:]}")
    if levels is None:
        levels = num_scales(chw.shape[1], chw.shape[2])
    with nn.no_grad():
        out = model.forward(chw[None], flow[None], levels=levels, decoder_override=decoder_override)
    frame = np.moveaxis(out.data[0], 0, -1)
    if channels == 1:
        frame = frame.mean(axis=2, keepdims=True, dtype=np.float64)
    return ImageBuffer(np.clip(frame, 0.0, 1.0))
