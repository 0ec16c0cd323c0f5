"""Pinhole ground-plane geometry for street-level queries.

A query arrives as labeled polygons in pixel coordinates plus a camera
model.  Assuming a flat ground plane at a fixed camera height, each pixel
below the horizon row maps to a unique ground point:

    forward  z = f * d / (v - y_h)
    lateral  x = (u - c_x) * d / (v - y_h)

with focal length f, camera height d and horizon row y_h.  Projected
segments live in a camera-centric metric frame stored as (x, y) =
(lateral right, forward), i.e. the camera sits at the origin looking
along +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from ._util import fmt
from .errors import FormatError, HorizonError, ParameterError, ValidationError
from .maps import POINT_FOOTPRINT_SIDE, Segment, _LineCursor, _parse_seg_line

QUERY_MAGIC = "SEMQUERY 1"

DEFAULT_CAMERA_HEIGHT = 1.7

# pixels kept strictly below the horizon before projecting
HORIZON_CLIP_MARGIN = 1.0

# fraction of a vertical object's pixel rows treated as ground contact
CONTACT_ROW_FRACTION = 0.1


@dataclass(frozen=True)
class CameraModel:
    focal: float
    principal: tuple[float, float]          # (c_x, c_y) pixels
    image_size: tuple[int, int]             # (width, height) pixels
    height: float = DEFAULT_CAMERA_HEIGHT   # meters above ground
    horizon_row: float = 0.0                # pixel row of the horizon

    def __post_init__(self):
        if self.focal <= 0:
            raise ParameterError("focal length must be positive")
        if self.height <= 0:
            raise ParameterError("camera height must be positive")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ParameterError("image size must be positive")
        if not 0 <= self.horizon_row < h:
            raise ParameterError("horizon row must lie inside the image")


@dataclass(frozen=True)
class GroundPoint:
    x: float  # lateral, right positive
    z: float  # forward


def fov_half_angle(camera: CameraModel) -> float:
    """Half the horizontal field of view, atan(W / 2f)."""
    return math.atan(camera.image_size[0] / (2.0 * camera.focal))


def metric_scale(camera: CameraModel) -> float:
    """Pixels per meter on the rectified ground plane, f / d."""
    return camera.focal / camera.height


def content_center_distance(camera: CameraModel, tile_side: float) -> float:
    """Forward distance to the center of the nearest fully visible tile.

    A disk of radius R (the tile circumradius) centered this far ahead fits
    the horizontal field of view at any tile orientation, so a descriptor
    placed here can cover a whole tile's worth of rectified content.
    """
    radius = tile_side * math.sqrt(2.0) / 2.0
    return radius + radius / math.tan(fov_half_angle(camera))


def ground_project(camera: CameraModel, pixel) -> GroundPoint:
    """Map one below-horizon pixel to the ground plane."""
    u, v = float(pixel[0]), float(pixel[1])
    drop = v - camera.horizon_row
    if drop <= 0:
        raise HorizonError(f"pixel row {v} is at or above the horizon row {camera.horizon_row}")
    z = camera.focal * camera.height / drop
    x = (u - camera.principal[0]) * camera.height / drop
    return GroundPoint(x, z)


def ground_to_pixel(camera: CameraModel, x: float, z: float) -> tuple[float, float]:
    """Forward projection of a ground point; inverse of ground_project."""
    if z <= 0:
        raise ParameterError("ground point must lie in front of the camera (z > 0)")
    u = camera.principal[0] + camera.focal * x / z
    v = camera.horizon_row + camera.focal * camera.height / z
    return u, v


def _project_vertices(camera: CameraModel, pixels: np.ndarray) -> np.ndarray:
    drop = pixels[:, 1] - camera.horizon_row
    z = camera.focal * camera.height / drop
    x = (pixels[:, 0] - camera.principal[0]) * camera.height / drop
    return np.column_stack([x, z])


def project_query_segments(camera: CameraModel, segments: list[Segment],
                           vertical_ids: set[int]) -> tuple[list[Segment], int]:
    """Project pixel-space query segments onto the ground plane.

    Flat concepts are clipped against the row y_h + margin and projected
    vertex-wise (the ground homography keeps edges straight).  Vertical
    concepts only touch the ground along their lowest pixel rows, so just
    the bottom CONTACT_ROW_FRACTION of their row span is projected and its
    convex hull becomes the ground segment.  Segments lost to the horizon
    are counted, not errors.
    """
    horizon_limit = camera.horizon_row + HORIZON_CLIP_MARGIN
    projected: list[Segment] = []
    dropped = 0
    for seg in segments:
        poly = seg.polygon
        if seg.concept in vertical_ids:
            rows = poly[:, 1]
            vmax = float(rows.max())
            band_top = vmax - CONTACT_ROW_FRACTION * (vmax - float(rows.min()))
            poly = geometry.clip_halfplane(poly, (0.0, band_top), (0.0, 1.0))
        poly = geometry.clip_halfplane(poly, (0.0, horizon_limit), (0.0, 1.0))
        if len(poly) < 3:
            dropped += 1
            continue
        ground = _project_vertices(camera, poly)
        if seg.concept in vertical_ids:
            ground = geometry.convex_hull(ground)
            if len(ground) < 3:
                # contact strip collapsed to a line; stand in a small square
                center = ground.mean(axis=0)
                h = POINT_FOOTPRINT_SIDE / 2.0
                ground = center + np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
        projected.append(Segment(seg.concept, ground))
    return projected, dropped


# ---------------------------------------------------------------------------
# query file format


def parse_query(text: str) -> tuple[CameraModel, list[Segment]]:
    """Parse a pixel-space query: magic, CAMERA line, SEG lines."""
    cursor = _LineCursor(text.splitlines())

    no, line = cursor.next_content()
    if line != QUERY_MAGIC:
        raise FormatError(f"expected magic '{QUERY_MAGIC}'", no)

    no, line = cursor.next_content()
    parts = line.split()
    if len(parts) != 8 or parts[0] != "CAMERA":
        raise FormatError("expected 'CAMERA f cx cy W H d y_h'", no)
    try:
        f, cx, cy = (float(p) for p in parts[1:4])
        w, h = (int(p) for p in parts[4:6])
        d, y_h = (float(p) for p in parts[6:8])
    except ValueError:
        raise FormatError("CAMERA values must be numeric", no) from None
    try:
        camera = CameraModel(f, (cx, cy), (w, h), d, y_h)
    except ParameterError as exc:
        raise ValidationError(str(exc), no) from None

    segments: list[Segment] = []
    while True:
        nxt = cursor.next_content_or_none()
        if nxt is None:
            break
        no, line = nxt
        # pixel coordinates carry no bounds; concept ids are checked by the
        # consumer against its own catalog so subset runs can skip extras
        segments.append(_parse_seg_line(no, line, known_ids=_AnyId(), bounds=None))
    return camera, segments


class _AnyId:
    def __contains__(self, item) -> bool:
        return True


def format_query(camera: CameraModel, segments: list[Segment]) -> str:
    cx, cy = camera.principal
    w, h = camera.image_size
    out = [QUERY_MAGIC,
           f"CAMERA {fmt(camera.focal)} {fmt(cx)} {fmt(cy)} {w} {h} "
           f"{fmt(camera.height)} {fmt(camera.horizon_row)}"]
    from .maps import format_seg_line
    out.extend(format_seg_line(seg) for seg in segments)
    return "\n".join(out) + "\n"
