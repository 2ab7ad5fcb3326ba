"""Initial interface generators."""

import numpy as np

from .curve import Curve
from .errors import ConfigError


def _circle_points(r, n, clockwise=True):
    theta = 2.0 * np.pi * np.arange(n) / n
    if clockwise:
        theta = -theta
    pts = r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    # exact zeros keep circle(1, 4) a clean square
    pts[np.abs(pts) < 1e-15 * r] = 0.0
    return pts


def circle(r, K, center=(0.0, 0.0)):
    """Regular ``K``-gon inscribed in the circle of radius ``r``."""
    if r <= 0 or K < 3:
        raise ConfigError("circle needs r > 0 and K >= 3")
    return Curve.from_loops([_circle_points(r, K) + np.asarray(center, dtype=float)])


def concentric_pair(r1, r2, K):
    """Annulus ``r1 < |z| < r2`` bounded by two regular ``K/2``-gons."""
    if not 0 < r1 < r2:
        raise ConfigError("concentric_pair needs 0 < r1 < r2")
    if K % 2 or K < 6:
        raise ConfigError("concentric_pair needs an even K >= 6")
    n = K // 2
    return Curve.from_loops([_circle_points(r2, n), _circle_points(r1, n)])


def stadium(length, width, K):
    """Rectangle with semicircular caps, overall extent ``length x width``.

    Vertices are equally spaced in arclength along the exact boundary.
    """
    if not length > width > 0:
        raise ConfigError("stadium needs length > width > 0")
    if K < 8:
        raise ConfigError("stadium needs K >= 8")
    rad = 0.5 * width
    half = 0.5 * length - rad
    straight = 2.0 * half
    perim = 2.0 * straight + 2.0 * np.pi * rad
    # start at the top midpoint and run clockwise
    s = perim * np.arange(K) / K
    pts = np.empty((K, 2))
    for i, si in enumerate(s):
        if si < half:
            pts[i] = (si, rad)
            continue
        si -= half
        if si < np.pi * rad:
            phi = np.pi / 2 - si / rad
            pts[i] = (half + rad * np.cos(phi), rad * np.sin(phi))
            continue
        si -= np.pi * rad
        if si < straight:
            pts[i] = (half - si, -rad)
            continue
        si -= straight
        if si < np.pi * rad:
            phi = -np.pi / 2 - si / rad
            pts[i] = (-half + rad * np.cos(phi), rad * np.sin(phi))
            continue
        si -= np.pi * rad
        pts[i] = (-half + si, rad)
    return Curve.from_loops([pts])


# Anticlockwise corners of a plus-shaped polygon whose facets all lie in the
# eight directions of a regular octagon: chamfered arm ends, chamfered reflex
# inner corners.
_STAR_CORNERS = np.array([
    (3.0, -0.5), (3.0, 0.5), (2.5, 1.0), (1.5, 1.0), (1.0, 1.5), (1.0, 2.5),
    (0.5, 3.0), (-0.5, 3.0), (-1.0, 2.5), (-1.0, 1.5), (-1.5, 1.0), (-2.5, 1.0),
    (-3.0, 0.5), (-3.0, -0.5), (-2.5, -1.0), (-1.5, -1.0), (-1.0, -1.5), (-1.0, -2.5),
    (-0.5, -3.0), (0.5, -3.0), (1.0, -2.5), (1.0, -1.5), (1.5, -1.0), (2.5, -1.0),
])


def faceted_octagon_star(K, scale=1.0):
    """Nonconvex polygon with all facets parallel to regular-octagon facets.

    Every corner is a vertex, so each element normal is exactly one of the
    eight octagon facet normals. Remaining vertices are spread over the
    facets in proportion to their length.
    """
    corners = scale * _STAR_CORNERS
    n = len(corners)
    if K < n:
        raise ConfigError(f"faceted_octagon_star needs K >= {n}")
    closed = np.vstack([corners, corners[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    ideal = K * seg / seg.sum()
    counts = np.maximum(1, np.floor(ideal).astype(int))
    while counts.sum() < K:
        counts[np.argmax(ideal - counts)] += 1
    while counts.sum() > K:
        counts[np.argmax(counts - ideal)] -= 1
    pts = []
    for i in range(n):
        t = np.arange(counts[i])[:, None] / counts[i]
        pts.append(closed[i] + t * (closed[i + 1] - closed[i]))
    return Curve.from_loops([np.concatenate(pts)])


_GENERATORS = {
    "circle": (circle, ("r", "K")),
    "concentric_pair": (concentric_pair, ("r1", "r2", "K")),
    "stadium": (stadium, ("length", "width", "K")),
    "faceted_octagon_star": (faceted_octagon_star, ("K",)),
}


def make_curve(shape_spec, H=4.0):
    """Build an initial curve from a dict like ``{"kind": "circle", "r": 1, "K": 64}``.

    Raises
    ------
    ConfigError
        Unknown kind, missing parameters, or a shape that does not fit
        strictly inside ``(-H, H)^2``.
    """
    spec = dict(shape_spec)
    kind = spec.pop("kind", None)
    if kind not in _GENERATORS:
        raise ConfigError(f"unknown shape kind {kind!r}; expected one of {sorted(_GENERATORS)}")
    fn, required = _GENERATORS[kind]
    missing = [k for k in required if k not in spec]
    if missing:
        raise ConfigError(f"shape {kind!r} is missing {', '.join(missing)}")
    try:
        curve = fn(**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for shape {kind!r}: {exc}") from None
    if np.abs(curve.points).max() >= H:
        raise ConfigError(f"shape {kind!r} does not fit inside (-{H}, {H})^2")
    return curve
