"""Texture losses: channel Gram matrices against a frozen random extractor."""

from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import ContractError

EXTRACTOR_WIDTHS = (8, 16, 32)
LEVEL_COUNT = 3
LEVEL_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


def gram_matrix(features) -> nn.Tensor:
    """Channel co-activation matrix G_ij = <F_i, F_j> per batch sample.

    ``features`` is (N, C, H, W); the result is (N, C, C) with each entry the
    inner product of two vectorized channel maps. Symmetric and PSD by
    construction.
    """
    features = nn.as_tensor(features)
    if features.ndim != 4:
        raise ContractError(f"features must be (N, C, H, W), got {features.shape}")
    n, c, h, w = features.shape
    flat = nn.reshape(features, (n, c, h * w))
    return nn.matmul(flat, nn.transpose(flat, (0, 2, 1)))


class StyleExtractor:
    """Frozen random-weight conv pyramid standing in for a pretrained net.

    Three stride-2 conv+SiLU stages with seeded He-uniform weights that are
    never trained or saved; rebuilding with the same seed yields the same
    features, which is all Gram matching needs at desk scale.
    """

    def __init__(self, seed: int = 0, widths=EXTRACTOR_WIDTHS):
        widths = tuple(int(w) for w in widths)
        if len(widths) != LEVEL_COUNT:
            raise ContractError(f"expected {LEVEL_COUNT} widths, got {widths}")
        self.seed = int(seed)
        self.widths = widths
        rng = np.random.default_rng(self.seed)
        self._weights = []
        cin = 3
        for cout in widths:
            w = nn.Tensor(nn.kaiming_uniform(rng, (cout, cin, 3, 3), cin * 9))
            self._weights.append(w)
            cin = cout

    def __call__(self, images) -> list:
        """List of q feature tensors, shallow to deep."""
        x = nn.as_tensor(images)
        if x.ndim != 4 or x.shape[1] != 3:
            raise ContractError(f"extractor wants (N, 3, H, W), got {x.shape}")
        feats = []
        for w in self._weights:
            x = nn.silu(nn.conv2d(x, w, stride=2, padding=1))
            feats.append(x)
        return feats


def style_loss(pred, target, extractor: StyleExtractor, weights=LEVEL_WEIGHTS) -> nn.Tensor:
    """Weighted squared Gram mismatch, averaged over the batch.

    Each extractor level l contributes
    w_l / (4 H_l^2 W_l^2 N_l^2) * sum_ij (G_ij - A_ij)^2.
    """
    pred = nn.as_tensor(pred)
    target = nn.as_tensor(target)
    if pred.shape != target.shape:
        raise ContractError(f"shape mismatch: {pred.shape} vs {target.shape}")
    feats_p = extractor(pred)
    feats_t = extractor(target)
    if len(weights) != len(feats_p):
        raise ContractError(f"need {len(feats_p)} level weights, got {len(weights)}")
    batch = pred.shape[0]
    total = None
    for w_l, fp, ft in zip(weights, feats_p, feats_t):
        _, c, h, w = fp.shape
        diff = nn.add(gram_matrix(fp), nn.mul(gram_matrix(ft), -1.0))
        norm = float(w_l) / (4.0 * h * h * w * w * c * c * batch)
        term = nn.mul(nn.reduce_sum(nn.mul(diff, diff)), norm)
        total = term if total is None else nn.add(total, term)
    return total
