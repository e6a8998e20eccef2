"""Conditional flow denoiser: latent prediction refined by convex upsampling.

The network downsamples the noisy flow and the conditional flow by 8x,
fuses them, runs a small conditioned U-Net to predict a coarse clean
flow, and lifts it back to full resolution as a per-subpixel convex
combination over 3x3 coarse neighborhoods with separate weights per
flow component.
"""

from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import CheckpointError, ContractError
from .features import (
    DEFAULT_ALPHA_MAX,
    DEFAULT_K,
    harmonic_alpha_features,
    timestep_embedding,
)

DESK_WIDTHS = (32, 32, 64)
FULL_WIDTHS = (256, 256, 512)
UPSAMPLE = 8
NEIGHBORS = 9
WEIGHT_CHANNELS = 2 * NEIGHBORS * UPSAMPLE * UPSAMPLE
# conditioning motion is typically sub-pixel while the diffusion state is
# unit variance; the fixed lift puts both on comparable footing so the
# shared downsampler sees the conditional in its nonlinear working range
COND_GAIN = 32.0


def _groups_for(channels: int) -> int:
    # each group keeps >= 4 channels so 1x1 feature maps still carry
    # usable statistics; smaller groups normalize themselves away there
    for g in (8, 4, 2):
        if channels % g == 0 and channels // g >= 4:
            return g
    return 1


def convex_upsample(coarse: nn.Tensor, weights: nn.Tensor) -> nn.Tensor:
    """Lift a coarse 2-channel flow 8x with normalized neighborhood weights.

    ``coarse`` is (N, 2, h, w); ``weights`` is (N, 1152, h, w) laid out as
    (component, neighbor, sub-row, sub-col) and must sum to 1 over the
    9-neighbor axis within 1e-4. Values are combined, never rescaled, so
    every output pixel stays inside its local coarse value range.
    """
    if coarse.ndim != 4 or coarse.shape[1] != 2:
        raise ContractError(f"coarse flow must be (N, 2, h, w), got {coarse.shape}")
    n, _, h, w = coarse.shape
    if weights.shape != (n, WEIGHT_CHANNELS, h, w):
        raise ContractError(
            f"weights must be (N, {WEIGHT_CHANNELS}, h, w) matching coarse, got {weights.shape}"
        )
    stacked = nn.reshape(weights, (n, 2, NEIGHBORS, UPSAMPLE, UPSAMPLE, h, w))
    sums = stacked.data.sum(axis=2)
    worst = np.abs(sums - 1.0).max()
    if worst > 1e-4:
        raise ContractError(f"upsampling weights deviate from convexity by {worst:.2e}")
    neighbors = nn.reshape(nn.neighborhood3x3(coarse), (n, 2, NEIGHBORS, 1, 1, h, w))
    fine = nn.reduce_sum(nn.mul(stacked, neighbors), axis=2)  # (n, 2, 8, 8, h, w)
    fine = nn.transpose(fine, (0, 1, 4, 2, 5, 3))  # (n, 2, h, 8, w, 8)
    return nn.reshape(fine, (n, 2, h * UPSAMPLE, w * UPSAMPLE))


class MagnifierModel:
    """Denoiser with magnification and timestep conditioning.

    Construction is deterministic in ``seed``; two models built with the
    same seed and configuration produce bit-identical outputs.
    """

    def __init__(
        self,
        widths=DESK_WIDTHS,
        k_terms: int = DEFAULT_K,
        alpha_max: float = DEFAULT_ALPHA_MAX,
        seed: int = 0,
    ):
        widths = tuple(int(w) for w in widths)
        if len(widths) != 3 or any(w < 1 for w in widths):
            raise ContractError(f"widths must be three positive stage sizes, got {widths}")
        if k_terms < 1:
            raise ContractError(f"k_terms must be >= 1, got {k_terms}")
        self.widths = widths
        self.k_terms = int(k_terms)
        self.alpha_max = float(alpha_max)
        self.seed = int(seed)
        self.emb_dim = widths[0]
        if self.emb_dim % 2:
            raise ContractError("first stage width must be even (embedding dimension)")
        self.params = nn.ParameterSet()
        self._build(np.random.default_rng(self.seed))

    # ---- construction -------------------------------------------------

    def _add_conv(self, rng, name, cin, cout, k):
        self.params.add(f"{name}/w", nn.kaiming_uniform(rng, (cout, cin, k, k), cin * k * k))
        self.params.add(f"{name}/b", np.zeros(cout))

    def _add_linear(self, rng, name, fin, fout):
        self.params.add(f"{name}/w", nn.kaiming_uniform(rng, (fin, fout), fin))
        self.params.add(f"{name}/b", np.zeros(fout))

    def _add_norm(self, name, channels):
        self.params.add(f"{name}/g", np.ones(channels))
        self.params.add(f"{name}/s", np.zeros(channels))

    def _add_resblock(self, rng, name, cin, cout):
        self._add_norm(f"{name}/n1", cin)
        self._add_conv(rng, f"{name}/c1", cin, cout, 3)
        self._add_linear(rng, f"{name}/emb", self.emb_dim, cout)
        self._add_norm(f"{name}/n2", cout)
        self._add_conv(rng, f"{name}/c2", cout, cout, 3)
        if cin != cout:
            self._add_conv(rng, f"{name}/skip", cin, cout, 1)

    def _build(self, rng):
        w0, w1, w2 = self.widths
        self._add_linear(rng, "h_alpha", 2 * self.k_terms + 1, self.emb_dim)
        self._add_linear(rng, "t_proj", self.emb_dim, self.emb_dim)
        self._add_conv(rng, "D/0", 2, w0, 3)
        self._add_conv(rng, "D/1", w0, w0, 3)
        self._add_conv(rng, "D/2", w0, w0, 3)
        self._add_conv(rng, "fuse", 2 * w0, w0, 1)
        self._add_resblock(rng, "res", w0, w0)
        self._add_conv(rng, "unet/in", w0, w0, 3)
        self._add_resblock(rng, "unet/down1", w0, w1)
        self._add_resblock(rng, "unet/down2", w1, w2)
        self._add_resblock(rng, "unet/mid", w2, w2)
        self._add_resblock(rng, "unet/up2", 2 * w2, w1)
        self._add_resblock(rng, "unet/up1", 2 * w1, w0)
        self._add_norm("unet/hn", w0)
        self._add_conv(rng, "unet/head", w0, 2, 3)
        # damped head keeps early predictions near zero without severing
        # the conditioning path
        self.params["unet/head/w"].data = 0.01 * self.params["unet/head/w"].data
        self._add_conv(rng, "mask/fw", w0 + 2, w0, 3)
        self._add_linear(rng, "mask/emb", self.emb_dim, w0)
        self._add_conv(rng, "mask/out", w0, WEIGHT_CHANNELS, 3)

    # ---- forward ------------------------------------------------------

    def _conv(self, name, x, stride=1, padding=1):
        return nn.conv2d(x, self.params[f"{name}/w"], self.params[f"{name}/b"], stride, padding)

    def _linear(self, name, x):
        return nn.add(nn.matmul(x, self.params[f"{name}/w"]), self.params[f"{name}/b"])

    def _norm(self, name, x):
        c = x.shape[1]
        return nn.group_norm(x, _groups_for(c), self.params[f"{name}/g"], self.params[f"{name}/s"])

    def _resblock(self, name, x, emb):
        """Returns (main output, residual branch)."""
        h = self._conv(f"{name}/c1", nn.silu(self._norm(f"{name}/n1", x)))
        bias = self._linear(f"{name}/emb", emb)
        h = nn.add(h, nn.reshape(bias, (bias.shape[0], bias.shape[1], 1, 1)))
        h = self._conv(f"{name}/c2", nn.silu(self._norm(f"{name}/n2", h)))
        skip = self._conv(f"{name}/skip", x, padding=0) if f"{name}/skip/w" in self.params else x
        return nn.add(skip, h), h

    def _downsample(self, x):
        h = nn.silu(self._conv("D/0", x, stride=2))
        h = nn.silu(self._conv("D/1", h, stride=2))
        return self._conv("D/2", h, stride=2)

    def embed(self, alpha, t) -> nn.Tensor:
        """Fused conditioning vector: harmonic alpha features + timestep."""
        feats = np.atleast_2d(harmonic_alpha_features(alpha, self.k_terms, self.alpha_max))
        h_a = self._linear("h_alpha", nn.Tensor(feats))
        h_t = self._linear("t_proj", nn.Tensor(timestep_embedding(t, self.emb_dim)))
        return nn.add(h_a, h_t)

    def _unet(self, x, emb):
        h0, _ = self._resblock("unet/down1", self._conv("unet/in", x), emb)
        pooled1 = h0.shape[2] % 2 == 0 and h0.shape[3] % 2 == 0 and min(h0.shape[2:]) > 1
        h1 = nn.resample2x(h0, "down") if pooled1 else h0
        h1, _ = self._resblock("unet/down2", h1, emb)
        pooled2 = h1.shape[2] % 2 == 0 and h1.shape[3] % 2 == 0 and min(h1.shape[2:]) > 1
        h2 = nn.resample2x(h1, "down") if pooled2 else h1
        h2, _ = self._resblock("unet/mid", h2, emb)
        u = nn.resample2x(h2, "up") if pooled2 else h2
        u, _ = self._resblock("unet/up2", nn.concat([u, h1], axis=1), emb)
        u = nn.resample2x(u, "up") if pooled1 else u
        u, _ = self._resblock("unet/up1", nn.concat([u, h0], axis=1), emb)
        return self._conv("unet/head", nn.silu(self._norm("unet/hn", u)))

    def forward(self, x_t, cond, alpha, t) -> nn.Tensor:
        """Predict the clean normalized flow from its noisy version.

        ``x_t`` lives in f_max-normalized space; ``cond`` is the conditional
        flow in pixel units, lifted by ``COND_GAIN`` before feature
        extraction.
        """
        x_t = nn.as_tensor(x_t)
        cond = nn.as_tensor(cond)
        if x_t.ndim != 4 or x_t.shape[1] != 2 or x_t.shape != cond.shape:
            raise ContractError(
                f"flows must share an (N, 2, H, W) shape, got {x_t.shape} and {cond.shape}"
            )
        cond = nn.mul(cond, COND_GAIN)
        h, w = x_t.shape[2], x_t.shape[3]
        if h % UPSAMPLE or w % UPSAMPLE:
            raise ContractError(f"spatial extents must be divisible by {UPSAMPLE}, got {h}x{w}")
        emb = self.embed(alpha, t)
        if emb.shape[0] == 1 and x_t.shape[0] > 1:
            emb = nn.reshape(
                nn.mul(emb, nn.Tensor(np.ones((x_t.shape[0], 1)))), (x_t.shape[0], self.emb_dim)
            )
        fused = self._conv("fuse", nn.concat([self._downsample(x_t), self._downsample(cond)], 1), padding=0)
        r, r_branch = self._resblock("res", fused, emb)
        coarse = self._unet(r, emb)
        ctx = self._conv("mask/fw", nn.concat([r_branch, coarse], axis=1))
        mask_bias = self._linear("mask/emb", emb)
        ctx = nn.add(ctx, nn.reshape(mask_bias, (mask_bias.shape[0], mask_bias.shape[1], 1, 1)))
        logits = self._conv("mask/out", nn.silu(ctx))
        n, _, lh, lw = logits.shape
        stacked = nn.reshape(logits, (n, 2, NEIGHBORS, UPSAMPLE, UPSAMPLE, lh, lw))
        weights = nn.reshape(nn.softmax_axis(stacked, 2), (n, WEIGHT_CHANNELS, lh, lw))
        return convex_upsample(coarse, weights)

    # ---- persistence --------------------------------------------------

    def config_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "k_terms": self.k_terms,
            "alpha_max": self.alpha_max,
            "seed": self.seed,
        }

    @classmethod
    def from_config(cls, config: dict) -> "MagnifierModel":
        try:
            return cls(
                widths=config["widths"],
                k_terms=config["k_terms"],
                alpha_max=config["alpha_max"],
                seed=config["seed"],
            )
        except KeyError as exc:
            raise CheckpointError(f"magnifier config missing key {exc}") from exc
