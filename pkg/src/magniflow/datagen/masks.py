"""Motion-region shapes and their rasterization.

A RegionSpec fully determines its mask: randomized constructions (polygon
vertex jitter, fractal harmonics) are sampled once and stored on the spec, so
generate_mask is a pure function and manifests can reproduce every region.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, EmptyMaskError

SHAPE_FAMILIES = ("ellipse", "polygon", "fractal", "spot")

SPOT_RADIUS_RANGE = (1.0, 3.0)
POLYGON_VERTEX_RANGE = (3, 8)
FRACTAL_HARMONICS = (2, 6)


@dataclass(frozen=True)
class RegionSpec:
    """One motion region: geometry plus its direction and magnitude.

    center is (x, y) in sub-pixel field coordinates. scale is the
    characteristic radius in pixels (spot: the disc radius). direction is the
    motion angle in [0, 2pi); magnitude is in pixels per frame.
    """

    center: tuple
    shape: str
    scale: float
    direction: float
    magnitude: float
    aspect: float = 1.0
    orientation: float = 0.0
    smoothness: float = 0.0
    vertices: tuple = ()
    harmonics: tuple = field(default=())

    def __post_init__(self):
        if self.shape not in SHAPE_FAMILIES:
            raise ContractError(f"unknown shape family {self.shape!r}")
        if self.scale <= 0:
            raise ContractError(f"scale must be > 0, got {self.scale}")
        if self.magnitude < 0:
            raise ContractError(f"magnitude must be >= 0, got {self.magnitude}")
        if not (0.0 < self.aspect <= 1.0):
            raise ContractError(f"aspect must be in (0, 1], got {self.aspect}")
        if self.shape == "polygon" and len(self.vertices) < 3:
            raise ContractError("polygon needs at least 3 vertices")
        if self.shape == "spot" and not (
            SPOT_RADIUS_RANGE[0] <= self.scale <= SPOT_RADIUS_RANGE[1]
        ):
            raise ContractError(f"spot radius must lie in {SPOT_RADIUS_RANGE}, got {self.scale}")

    def to_json(self) -> dict:
        return {
            "center": [float(self.center[0]), float(self.center[1])],
            "shape": self.shape,
            "scale": float(self.scale),
            "direction": float(self.direction),
            "magnitude": float(self.magnitude),
            "aspect": float(self.aspect),
            "orientation": float(self.orientation),
            "smoothness": float(self.smoothness),
            "vertices": [[float(x), float(y)] for x, y in self.vertices],
            "harmonics": [[int(j), float(a), float(p)] for j, a, p in self.harmonics],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RegionSpec":
        return cls(
            center=tuple(obj["center"]),
            shape=obj["shape"],
            scale=obj["scale"],
            direction=obj["direction"],
            magnitude=obj["magnitude"],
            aspect=obj.get("aspect", 1.0),
            orientation=obj.get("orientation", 0.0),
            smoothness=obj.get("smoothness", 0.0),
            vertices=tuple(tuple(v) for v in obj.get("vertices", [])),
            harmonics=tuple(tuple(h) for h in obj.get("harmonics", [])),
        )


def _grid(dims):
    h, w = dims
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return xs, ys


def generate_mask(region: RegionSpec, dims: tuple) -> np.ndarray:
    """Rasterize a region to a boolean (H, W) mask.

    Pixel centers satisfying the shape's implicit inequality are set. Raises
    EmptyMaskError when nothing rasterizes (shape fully outside the field).
    """
    h, w = dims
    if h < 1 or w < 1:
        raise ContractError(f"field dims must be positive, got {dims}")
    xs, ys = _grid(dims)
    cx, cy = region.center
    dx = xs - cx
    dy = ys - cy

    if region.shape == "spot":
        mask = dx * dx + dy * dy <= region.scale**2
    elif region.shape == "ellipse":
        cos_o = np.cos(region.orientation)
        sin_o = np.sin(region.orientation)
        major = dx * cos_o + dy * sin_o
        minor = -dx * sin_o + dy * cos_o
        a = region.scale
        b = region.scale * region.aspect
        mask = (major / a) ** 2 + (minor / b) ** 2 <= 1.0
    elif region.shape == "polygon":
        mask = _convex_polygon_mask(region.vertices, xs, ys)
    else:  # fractal radial contour
        ang = np.arctan2(dy, dx)
        rad = np.full_like(ang, 1.0)
        for j, amp, phase in region.harmonics:
            rad += amp * np.sin(j * ang + phase)
        rad *= region.scale
        mask = dx * dx + dy * dy <= np.maximum(rad, 0.0) ** 2

    if not mask.any():
        raise EmptyMaskError(f"region at {region.center} rasterized empty on {w}x{h} field")
    return mask


def _convex_polygon_mask(vertices, xs, ys):
    """Scan-line fill of a convex polygon with half-open spans.

    Each pixel row collects edge crossings using the half-open rule
    (an edge covers scan lines y in [min(ay, by), max(ay, by))), then
    fills pixel centers x in [ceil(x_enter), ceil(x_exit) - 1]. An
    axis-aligned square of side s therefore covers exactly s * s pixels.
    """
    pts = [(float(x), float(y)) for x, y in vertices]
    h, w = ys.shape
    mask = np.zeros((h, w), dtype=bool)
    y_lo = max(0, int(np.ceil(min(p[1] for p in pts))))
    y_hi = min(h - 1, int(np.ceil(max(p[1] for p in pts))) - 1)
    n = len(pts)
    for y in range(y_lo, y_hi + 1):
        hits = []
        for i in range(n):
            ax, ay = pts[i]
            bx, by = pts[(i + 1) % n]
            if ay == by:
                continue
            if (ay <= y < by) or (by <= y < ay):
                hits.append(ax + (y - ay) / (by - ay) * (bx - ax))
        if len(hits) < 2:
            continue
        a = max(0, int(np.ceil(min(hits))))
        b = min(w - 1, int(np.ceil(max(hits))) - 1)
        if a <= b:
            mask[y, a : b + 1] = True
    return mask


def sample_region(
    rng: np.random.Generator,
    dims: tuple,
    direction: float,
    magnitude: float,
    scale_range: tuple,
    existing_centers: list,
) -> RegionSpec:
    """Draw one random region spec with a deterministic draw order.

    Centers are rejection-sampled (up to 20 attempts) to keep a pairwise
    distance of at least scale/2 from previously placed regions.
    """
    h, w = dims
    family = SHAPE_FAMILIES[int(rng.integers(0, len(SHAPE_FAMILIES)))]
    if family == "spot":
        scale = float(rng.uniform(*SPOT_RADIUS_RANGE))
    else:
        scale = float(rng.uniform(*scale_range))
    aspect = float(rng.uniform(0.4, 1.0))
    orientation = float(rng.uniform(0.0, 2 * np.pi))
    smoothness = float(rng.uniform(0.03, 0.1))

    vertices = ()
    harmonics = ()
    if family == "polygon":
        k = int(rng.integers(POLYGON_VERTEX_RANGE[0], POLYGON_VERTEX_RANGE[1] + 1))
        base = 2 * np.pi * np.arange(k) / k
        jitter = rng.uniform(-0.3, 0.3, size=k) * (2 * np.pi / k)
        angles = np.sort(base + jitter)
    elif family == "fractal":
        lo, hi = FRACTAL_HARMONICS
        harmonics = tuple(
            (j, float(rng.uniform(-smoothness, smoothness)), float(rng.uniform(0, 2 * np.pi)))
            for j in range(lo, hi + 1)
        )

    margin = min(scale, min(h, w) / 4.0)
    center = None
    for _ in range(20):
        cx = float(rng.uniform(margin, w - 1 - margin)) if w - 1 > 2 * margin else (w - 1) / 2.0
        cy = float(rng.uniform(margin, h - 1 - margin)) if h - 1 > 2 * margin else (h - 1) / 2.0
        if all(np.hypot(cx - ex, cy - ey) >= scale / 2.0 for ex, ey in existing_centers):
            center = (cx, cy)
            break
    if center is None:
        center = (cx, cy)  # placement permitted even when spacing failed

    if family == "polygon":
        vertices = tuple(
            (center[0] + scale * np.cos(a), center[1] + scale * np.sin(a)) for a in angles
        )

    return RegionSpec(
        center=center,
        shape=family,
        scale=scale,
        direction=direction,
        magnitude=magnitude,
        aspect=aspect,
        orientation=orientation,
        smoothness=smoothness,
        vertices=vertices,
        harmonics=harmonics,
    )
