"""Synthetic benchmark corpora: a small structured town plus camera queries.

Uniformly scattered segments make every tile look alike, so the generator
lays the map out the way towns do: a loose road grid, neighborhood cells
that each lean on their own subset of classes (parks, housing, downtown,
waterfront), buildings in rows along the streets, water and tree groves
in the block interiors, and lamps, signals, and signs clustered at
street-furniture stops.  Tiles then differ in which classes they hold
and in where those sit, which is what the layout descriptor keys on.

Queries come in two placements.  CC stands the camera at the ground-truth
tile's center and faces the tile's content, the way street-level photos
face the scene; CI backs the camera away along grid north until the whole
tile fits in view, so a noiseless CI query carries exactly the tile's
content.  Either view is then degraded with label dropout, per-segment
centroid jitter, and spurious segments, and projected into pixel space.
Everything derives from one seeded generator, so a corpus is a pure
function of its spec.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from ._util import write_text_atomic
from .camera import (CameraModel, content_center_distance, format_query,
                     fov_half_angle, ground_to_pixel)
from .config import RunConfig
from .errors import ParameterError
from .maps import (DEFAULT_CONCEPTS, POINT_FOOTPRINT_SIDE, Segment,
                   SemanticMap, format_map, tile_map)

DEFAULT_COUNTS = {
    "Road": 110,
    "Tree": 200,
    "Building": 150,
    "Water": 12,
    "Lamp_Post": 150,
    "Traffic_Signal": 48,
    "Traffic_Sign": 120,
}

PLACEMENTS = ("CC", "CI")

# Short road chunks keep several Road polygons in any street-level view, so
# single-segment dropout cannot erase the concept from a query.
_ROAD_CHUNK = 24.0      # meters of street per Road segment, roughly


@dataclass
class SyntheticSpec:
    extent: tuple[float, float] = (315.0, 315.0)
    margin: float = 30.0                      # empty band inside the bounds
    counts: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    n_queries: int = 100
    placement: str = "CC"                     # CC: in-tile camera; CI: full-tile view
    jitter_sigma: float = 2.0                 # per-segment translation, meters
    dropout: float = 0.1                      # per-segment removal probability
    spurious_rate: float = 0.05               # expected spurious per kept segment
    min_view_segments: int = 3                # needed in view to accept a heading
    heading_grid: float | None = None         # snap CC headings to multiples, radians
    view_range: float = 30.0                  # CC visibility limit, meters
    seed: int = 0
    # wide lens: the view wedge must catch most of a tile's classes from
    # its center, or retrieval punishes the query for content it never saw
    focal: float = 250.0
    image_size: tuple[int, int] = (1920, 1080)
    horizon_row: float = 540.0
    camera_height: float = 1.7

    def camera(self) -> CameraModel:
        w, h = self.image_size
        return CameraModel(self.focal, (w / 2.0, h / 2.0), (w, h),
                           self.camera_height, self.horizon_row)

    def __post_init__(self):
        if not 0.0 <= self.dropout <= 1.0:
            raise ParameterError("dropout must be a probability")
        if self.spurious_rate < 0 or self.jitter_sigma < 0:
            raise ParameterError("perturbation magnitudes must be nonnegative")
        if self.placement not in PLACEMENTS:
            raise ParameterError(f"placement must be one of {PLACEMENTS}")


def _blob(rng, radius: float, n_range=(7, 11)) -> np.ndarray:
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, n))
    radii = radius * rng.uniform(0.7, 1.3, n)
    return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])


def _square(center, side: float) -> np.ndarray:
    hs = side / 2.0
    cx, cy = center
    return np.array([[cx - hs, cy - hs], [cx + hs, cy - hs],
                     [cx + hs, cy + hs], [cx - hs, cy + hs]])


def _rect(center, along: float, across: float, horizontal: bool) -> np.ndarray:
    ha, hb = along / 2.0, across / 2.0
    if not horizontal:
        ha, hb = hb, ha
    cx, cy = center
    return np.array([[cx - ha, cy - hb], [cx + ha, cy - hb],
                     [cx + ha, cy + hb], [cx - ha, cy + hb]])


@dataclass
class _Street:
    pos: float            # x for vertical streets, y for horizontal ones
    width: float
    horizontal: bool


def _street_positions(rng, lo: float, hi: float, n: int) -> list[float]:
    # jittered even spacing keeps streets separated without a rejection loop
    slot = (hi - lo) / n
    jitter = min(8.0, slot / 4.0)
    return [lo + (i + 0.5) * slot + float(rng.uniform(-jitter, jitter))
            for i in range(n)]


def _clamp_to_band(poly: np.ndarray, lo_x, lo_y, hi_x, hi_y) -> np.ndarray:
    return geometry.clip_rect(poly, lo_x, lo_y, hi_x, hi_y)


def generate_map(spec: SyntheticSpec) -> SemanticMap:
    """Structured town map over [0, W] x [0, H] with an empty margin band."""
    rng = np.random.default_rng(spec.seed)
    w, h = spec.extent
    lo_x, lo_y = spec.margin, spec.margin
    hi_x, hi_y = w - spec.margin, h - spec.margin
    if hi_x - lo_x < 40.0 or hi_y - lo_y < 40.0:
        raise ParameterError("extent too small for the margin band")
    concepts = list(DEFAULT_CONCEPTS)
    by_name = {c.name: c for c in concepts}
    counts = {name: int(spec.counts.get(name, 0)) for name in by_name}
    unknown = set(spec.counts) - set(by_name)
    if unknown:
        raise ParameterError(f"no shape rule for concepts {sorted(unknown)}")
    segments: dict[str, list[np.ndarray]] = {name: [] for name in by_name}

    # street grid sized so road chunks roughly meet the Road budget
    span_x, span_y = hi_x - lo_x, hi_y - lo_y
    n_streets = max(2, round(counts["Road"] * _ROAD_CHUNK / ((span_x + span_y) / 2.0)))
    n_v = max(1, n_streets // 2)
    n_h = max(1, n_streets - n_v)
    streets = [_Street(p, float(rng.uniform(6.0, 10.0)), False)
               for p in _street_positions(rng, lo_x, hi_x, n_v)]
    streets += [_Street(p, float(rng.uniform(6.0, 10.0)), True)
                for p in _street_positions(rng, lo_y, hi_y, n_h)]

    for st in streets:
        lo, hi = (lo_y, hi_y) if not st.horizontal else (lo_x, hi_x)
        t = lo
        while t < hi:
            t_end = t + float(rng.uniform(0.8, 1.3) * _ROAD_CHUNK)
            if hi - t_end < 8.0:
                t_end = hi   # fold a short tail into the last chunk
            mid, length = (t + t_end) / 2.0, t_end - t
            center = (st.pos, mid) if not st.horizontal else (mid, st.pos)
            segments["Road"].append(_rect(center, length, st.width, st.horizontal))
            t = t_end

    intersections = [(sv.pos, sh.pos, max(sv.width, sh.width))
                     for sv in streets if not sv.horizontal
                     for sh in streets if sh.horizontal]

    # neighborhood cells: each ~80 m patch leans on its own subset of
    # classes, the way cities separate parks, housing, and downtown, so
    # tiles differ in which classes they hold and not just where
    n_cx = max(2, round(span_x / 80.0))
    n_cy = max(2, round(span_y / 80.0))
    kinds = ["residential", "downtown", "park", "waterfront"]
    cell_kinds = [kinds[i % len(kinds)] for i in range(n_cx * n_cy)]
    rng.shuffle(cell_kinds)

    def district(x, y):
        i = min(n_cx - 1, max(0, int((x - lo_x) / span_x * n_cx)))
        j = min(n_cy - 1, max(0, int((y - lo_y) / span_y * n_cy)))
        return cell_kinds[j * n_cx + i]

    def clear_of(kind_name, x, y, pad):
        # keep class gates away from cell edges; a tile straddling the
        # edge then holds a whole cluster or none, not a lone segment
        return all(district(x + dx, y + dy) != kind_name
                   for dx in (-pad, pad) for dy in (-pad, pad))

    def near_intersection(x, y, slack):
        return any(abs(x - ix) < iw / 2 + slack and abs(y - iy) < iw / 2 + slack
                   for ix, iy, iw in intersections)

    def distance_to_streets(x, y):
        return min(abs((x if not st.horizontal else y) - st.pos) - st.width / 2
                   for st in streets)

    # water first so buildings can avoid it; each pond is a few overlapping
    # lobes rather than one polygon, so a view keeps Water even when one
    # segment drops out or the shore is only partly visible
    water_centers = []
    ponds = max(1, counts["Water"] // 3)
    for wi in range(ponds):
        radius = float(rng.uniform(14.0, 26.0)) if wi < 2 else float(rng.uniform(8.0, 13.0))
        for _try in range(120):
            x = float(rng.uniform(lo_x + radius, hi_x - radius))
            y = float(rng.uniform(lo_y + radius, hi_y - radius))
            if (district(x, y) in ("park", "waterfront")
                    and distance_to_streets(x, y) > radius * 0.6):
                for _ in range(4):
                    ang = float(rng.uniform(0.0, 2.0 * math.pi))
                    cx = x + math.cos(ang) * radius * 0.48
                    cy = y + math.sin(ang) * radius * 0.48
                    segments["Water"].append(_blob(rng, radius * 0.52) + (cx, cy))
                water_centers.append((x, y, radius))
                break

    def in_water(x, y, slack=4.0):
        return any(math.hypot(x - wx, y - wy) < wr + slack
                   for wx, wy, wr in water_centers)

    # buildings walk both sides of every street; a street-level view then
    # has building rows left and right whichever way the camera faces.
    # Styles change every ~30-40 m, under the tile stride, so even
    # half-overlapping tiles see different frontage patterns.
    order = list(range(len(streets)))
    rng.shuffle(order)
    for si in order:
        st = streets[si]
        lo, hi = (lo_y, hi_y) if not st.horizontal else (lo_x, hi_x)
        for side_sign in (1, -1):
            t = lo + float(rng.uniform(0.0, 10.0))
            stretch_end = t
            while t < hi and counts["Building"] > len(segments["Building"]):
                if t >= stretch_end:
                    f_lo = float(rng.uniform(8.0, 13.0))
                    f_hi = f_lo + float(rng.uniform(2.0, 6.0))
                    setback = float(rng.uniform(2.0, 6.0))
                    accept = float(rng.uniform(0.55, 0.95))
                    gap_hi = float(rng.uniform(4.0, 9.0))
                    stretch_end = t + float(rng.uniform(28.0, 42.0))
                frontage = float(rng.uniform(f_lo, f_hi))
                depth = float(rng.uniform(7.0, 13.0))
                mid = t + frontage / 2.0
                off = st.pos + side_sign * (st.width / 2.0 + setback + depth / 2.0)
                x, y = (off, mid) if not st.horizontal else (mid, off)
                ok = (lo_x + 1 < x < hi_x - 1 and lo_y + 1 < y < hi_y - 1
                      and clear_of("park", x, y, 8.0)
                      and not near_intersection(x, y, 8.0) and not in_water(x, y)
                      and rng.random() < accept)
                if ok:
                    poly = _rect((x, y), depth, frontage, not st.horizontal)
                    poly = _clamp_to_band(poly, lo_x, lo_y, hi_x, hi_y)
                    if len(poly) >= 3:
                        segments["Building"].append(poly)
                t += frontage + float(rng.uniform(3.0, gap_hi))

    # tree groves in park and residential block interiors
    grove_budget = int(counts["Tree"] * 0.25)
    while grove_budget > 0:
        for _try in range(120):
            x = float(rng.uniform(lo_x + 10, hi_x - 10))
            y = float(rng.uniform(lo_y + 10, hi_y - 10))
            if (clear_of("downtown", x, y, 15.0) and clear_of("waterfront", x, y, 15.0)
                    and distance_to_streets(x, y) > 10.0 and not in_water(x, y)):
                break
        else:
            break
        n_trees = int(min(grove_budget, rng.integers(3, 8)))
        spread = float(rng.uniform(4.0, 9.0))
        for _ in range(n_trees):
            cx = x + float(rng.normal(0.0, spread))
            cy = y + float(rng.normal(0.0, spread))
            poly = _blob(rng, float(rng.uniform(1.5, 3.5)), (6, 9)) + (cx, cy)
            poly = _clamp_to_band(poly, lo_x, lo_y, hi_x, hi_y)
            if len(poly) >= 3:
                segments["Tree"].append(poly)
        grove_budget -= n_trees

    # street furniture shares corner-style stops: lamps, signs, and curb
    # trees clump at common spots, so one glance catches all of them, each
    # in a small clump that single-segment dropout cannot erase.  Each
    # block between crossings draws its own palette (densities, cluster
    # sizes, curb offsets), so blocks get recognizable furniture character.
    cross_pos = {False: sorted(st.pos for st in streets if st.horizontal),
                 True: sorted(st.pos for st in streets if not st.horizontal)}

    def make_palette():
        return {
            "p_sign": float(rng.uniform(0.6, 1.0)),
            "p_tree": float(rng.uniform(0.5, 1.0)),
            "lamp_k": (2, int(rng.integers(2, 4))),
            "sign_k": (2, int(rng.integers(2, 4))),
            "lamp_off": (0.6, float(rng.uniform(1.2, 3.0))),
            "tree_off": (2.0, float(rng.uniform(4.0, 8.0))),
        }

    palettes: dict[tuple[int, int], dict] = {}

    def palette_at(si, st, t):
        block = sum(1 for p in cross_pos[st.horizontal] if p < t)
        key = (si, block)
        if key not in palettes:
            palettes[key] = make_palette()
        return palettes[key]

    stops = []
    for si, st in enumerate(streets):
        lo, hi = (lo_y, hi_y) if not st.horizontal else (lo_x, hi_x)
        t = lo + float(rng.uniform(4.0, 18.0))
        side_sign = 1 if rng.random() < 0.5 else -1
        while t < hi:
            stops.append((si, st, t, side_sign))
            side_sign = -side_sign
            t += float(rng.uniform(24.0, 36.0))
    rng.shuffle(stops)

    def place(name, st, t, side_sign, extra_off, along_jitter, blob_radius=None):
        if len(segments[name]) >= counts[name]:
            return
        off = st.pos + side_sign * (st.width / 2.0 + extra_off)
        along = t + along_jitter
        x, y = (off, along) if not st.horizontal else (along, off)
        if not (lo_x < x < hi_x and lo_y < y < hi_y) or in_water(x, y, 1.0):
            return
        if blob_radius is None:
            poly = _square((x, y), POINT_FOOTPRINT_SIDE)
        else:
            poly = _blob(rng, blob_radius, (6, 9)) + (x, y)
        poly = _clamp_to_band(poly, lo_x, lo_y, hi_x, hi_y)
        if len(poly) >= 3:
            segments[name].append(poly)

    for si, st, t, side in stops:
        sx, sy = (st.pos, t) if not st.horizontal else (t, st.pos)
        pal = palette_at(si, st, t)
        for _ in range(int(rng.integers(pal["lamp_k"][0], pal["lamp_k"][1] + 1))):
            place("Lamp_Post", st, t, side,
                  float(rng.uniform(*pal["lamp_off"])), float(rng.uniform(-2.0, 2.0)))
        if clear_of("park", sx, sy, 7.0) and rng.random() < pal["p_sign"]:
            for _ in range(int(rng.integers(pal["sign_k"][0], pal["sign_k"][1] + 1))):
                place("Traffic_Sign", st, t, side,
                      float(rng.uniform(0.8, 2.0)), float(rng.uniform(-3.5, 3.5)))
        if clear_of("downtown", sx, sy, 7.0) and rng.random() < pal["p_tree"]:
            for _ in range(int(rng.integers(2, 4))):
                place("Tree", st, t, side,
                      float(rng.uniform(*pal["tree_off"])), float(rng.uniform(-6.0, 6.0)),
                      blob_radius=float(rng.uniform(1.5, 3.0)))

    # signals sit in pairs on three or four corners of downtown
    # intersections: in view from the middle whichever way the camera
    # turns, and one head can drop out without erasing the class
    corner_offsets = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    xi = list(range(len(intersections)))
    rng.shuffle(xi)
    for downtown_only in (True, False):
        for ii in xi:
            if len(segments["Traffic_Signal"]) >= counts["Traffic_Signal"]:
                break
            ix, iy, iw = intersections[ii]
            if downtown_only != (district(ix, iy) == "downtown"):
                continue
            rng.shuffle(corner_offsets)
            for sx, sy in corner_offsets[: int(rng.integers(3, 5))]:
                off = iw / 2.0 + 1.0
                x, y = ix + sx * off, iy + sy * off
                for dx, dy in ((0.0, 0.0), (sx * 1.6, sy * 1.6)):
                    if lo_x < x + dx < hi_x and lo_y < y + dy < hi_y:
                        segments["Traffic_Signal"].append(
                            _square((x + dx, y + dy), POINT_FOOTPRINT_SIDE))
        if len(segments["Traffic_Signal"]) >= counts["Traffic_Signal"] * 0.6:
            break

    out: list[Segment] = []
    for concept in concepts:
        for poly in segments[concept.name]:
            out.append(Segment(concept.id, poly))
    return SemanticMap(concepts, out, (0.0, 0.0, w, h))


def _to_camera_frame(poly: np.ndarray, center, heading: float) -> np.ndarray:
    """Map-frame polygon to camera frame (x right, y forward along heading)."""
    sh, ch = math.sin(heading), math.cos(heading)
    rel = poly - np.asarray(center)
    # right axis bears heading-90deg, forward bears heading
    return np.stack([rel[:, 0] * sh - rel[:, 1] * ch,
                     rel[:, 0] * ch + rel[:, 1] * sh], axis=1)


def _clip_view_wedge(poly: np.ndarray, z_near: float, tan_half: float) -> np.ndarray:
    poly = geometry.clip_halfplane(poly, (0.0, z_near), (0.0, 1.0))
    if len(poly) >= 3:
        poly = geometry.clip_halfplane(poly, (0.0, 0.0), (-1.0, tan_half))
    if len(poly) >= 3:
        poly = geometry.clip_halfplane(poly, (0.0, 0.0), (1.0, tan_half))
    return poly


def _project_polygon(camera: CameraModel, poly: np.ndarray) -> np.ndarray:
    return np.array([ground_to_pixel(camera, x, y) for x, y in poly])


def _extrude_pixels(pixel_poly: np.ndarray, contact_fraction: float) -> np.ndarray:
    """Grow a footprint upward so its bottom row band recovers the footprint.

    The vertical object occupies image rows well above its ground contact;
    the consumer keeps only the bottom `contact_fraction` of rows, so the
    total row span is footprint-span / contact_fraction.  Tops may rise past
    the horizon row or the image top: these are label masks, not photos,
    and keeping the span exact keeps the contact-band rule invertible.
    """
    rows = pixel_poly[:, 1]
    r_lo, r_hi = float(rows.min()), float(rows.max())
    span = max(r_hi - r_lo, 1e-6)
    total = span / contact_fraction
    lifted = pixel_poly - np.array([0.0, total - span])
    return geometry.convex_hull(np.vstack([pixel_poly, lifted]))


@dataclass
class QueryRecord:
    name: str
    tile_id: int
    n_segments: int


def generate_queries(semantic_map: SemanticMap, spec: SyntheticSpec,
                     cfg: RunConfig) -> list[tuple[QueryRecord, CameraModel, list[Segment]]]:
    """Camera views of ground-truth tiles, degraded per the spec's knobs.

    CC placement picks spec.n_queries random tiles (with replacement) and
    stands the camera at each tile's center, facing the tile's content: of
    the candidate headings (heading_grid multiples, or sixteen random draws)
    it keeps the one that puts the most segments inside the view wedge, the
    way street-level photos face the scene rather than an empty lot.  CI
    placement emits one query per tile with at least min_view_segments
    segments, camera backed off along grid north so the whole tile (and
    nothing else) is in view; with all perturbations at zero these queries
    reproduce the tile content exactly.
    """
    from .camera import CONTACT_ROW_FRACTION  # keep synth and consumer in sync
    rng = np.random.default_rng(spec.seed + 1)
    camera = spec.camera()
    tan_half = math.tan(fov_half_angle(camera))
    z_near = camera.focal * camera.height / (camera.image_size[1] - camera.horizon_row)
    vertical = {c.id for c in semantic_map.concepts if c.vertical}
    concept_ids = [c.id for c in semantic_map.concepts]

    _, tiles = tile_map(semantic_map, cfg.tile_side, cfg.tile_stride)
    candidates = [t for t in tiles if len(t.segments) >= spec.min_view_segments]
    if not candidates:
        raise ParameterError("map too sparse: no tile has enough segments for a query")

    views: list[tuple[object, list[Segment], float]] = []
    if spec.placement == "CI":
        standoff = content_center_distance(camera, cfg.tile_side)
        for tile in candidates:
            eye = (tile.center[0], tile.center[1] - standoff)
            seen = []
            for seg in tile.segments:
                cam_poly = _to_camera_frame(seg.polygon, eye, math.pi / 2.0)
                if cam_poly[:, 1].min() < z_near:
                    raise ParameterError("tile content violates the near plane")
                seen.append(Segment(seg.concept, cam_poly))
            views.append((tile, seen, standoff))
    else:
        def wedge_view(tile, heading):
            seen = []
            for seg in tile.segments:
                cam_poly = _to_camera_frame(seg.polygon, tile.center, heading)
                cam_poly = _clip_view_wedge(cam_poly, z_near, tan_half)
                if len(cam_poly) >= 3:
                    cam_poly = geometry.clip_halfplane(
                        cam_poly, (0.0, spec.view_range), (0.0, -1.0))
                if len(cam_poly) >= 3 and geometry.polygon_area(cam_poly) > geometry.AREA_EPS:
                    seen.append(Segment(seg.concept, cam_poly))
            return seen

        for _qi in range(spec.n_queries):
            view = None
            for _attempt in range(50):
                tile = candidates[int(rng.integers(len(candidates)))]
                if spec.heading_grid:
                    steps = max(1, round(2.0 * math.pi / spec.heading_grid))
                    cands = [spec.heading_grid * i for i in range(steps)]
                else:
                    cands = [float(rng.uniform(0.0, 2.0 * math.pi)) for _ in range(16)]
                best, best_key = None, (-1, -1, -1)
                for ci in rng.permutation(len(cands)):
                    seen = wedge_view(tile, cands[ci])
                    # cover as many of the tile's concepts as possible, then
                    # spread them over as many bearing octants as possible,
                    # then take the busiest view; a view that misses a
                    # concept class entirely is the main way localization
                    # goes wrong, and angular spread is what fills distinct
                    # descriptor cells
                    octants = set()
                    for s in seen:
                        cx, cy = s.polygon.mean(axis=0)
                        octants.add(int(math.atan2(cx, cy) / (math.pi / 4.0)))
                    key = (len({s.concept for s in seen}), len(octants), len(seen))
                    if key > best_key:
                        best, best_key = seen, key
                if len(best) >= spec.min_view_segments:
                    view = best
                    break
            if view is None:
                raise ParameterError("could not find a viewable tile/heading combination")
            views.append((tile, view, 0.0))

    out = []
    for qi, (tile, view, standoff) in enumerate(views):
        # degrade: dropout, then jitter survivors, then spurious additions
        kept = [s for s in view if rng.random() >= spec.dropout]
        perturbed: list[Segment] = []
        for seg in kept:
            if spec.jitter_sigma > 0.0:
                shifted = seg.polygon + rng.normal(0.0, spec.jitter_sigma, 2)
                shifted = _clip_view_wedge(shifted, z_near, tan_half)
            else:
                shifted = seg.polygon
            if len(shifted) >= 3 and geometry.polygon_area(shifted) > geometry.AREA_EPS:
                perturbed.append(Segment(seg.concept, shifted))
        n_spurious = int(rng.binomial(len(kept), spec.spurious_rate)) if kept else 0
        # spurious detections mimic oversegmentation: extra blobs of classes
        # the view already contains, not hallucinated classes
        seen_ids = sorted({s.concept for s in kept}) or concept_ids
        for _ in range(n_spurious):
            cid = int(seen_ids[int(rng.integers(len(seen_ids)))])
            y = float(rng.uniform(z_near + 1.0, standoff + 20.0 if standoff else spec.view_range))
            x = float(rng.uniform(-0.85, 0.85)) * y * tan_half
            side = POINT_FOOTPRINT_SIDE if cid in vertical else float(rng.uniform(1.0, 4.0))
            square = _square((x, y), side)
            square = _clip_view_wedge(square, z_near, tan_half)
            if len(square) >= 3:
                perturbed.append(Segment(cid, square))

        pixel_segments = []
        for seg in perturbed:
            px = _project_polygon(camera, seg.polygon)
            if seg.concept in vertical:
                px = _extrude_pixels(px, CONTACT_ROW_FRACTION)
            if len(px) >= 3:
                pixel_segments.append(Segment(seg.concept, px))

        record = QueryRecord(f"queries/q{qi:04d}.txt", tile.id, len(pixel_segments))
        out.append((record, camera, pixel_segments))
    return out


def generate_corpus(spec: SyntheticSpec, out_dir: str, cfg: RunConfig | None = None,
                    ) -> tuple[str, str, str]:
    """Write map.txt, queries/, and manifest.csv; returns their paths."""
    if cfg is None:
        cfg = RunConfig()
    semantic_map = generate_map(spec)
    queries = generate_queries(semantic_map, spec, cfg)

    os.makedirs(os.path.join(out_dir, "queries"), exist_ok=True)
    map_path = os.path.join(out_dir, "map.txt")
    write_text_atomic(map_path, format_map(semantic_map))
    rows = []
    for record, camera, segments in queries:
        write_text_atomic(os.path.join(out_dir, record.name),
                          format_query(camera, segments))
        rows.append(record)
    manifest_path = os.path.join(out_dir, "manifest.csv")
    lines = ["query,tile_id,n_segments"]
    lines += [f"{r.name},{r.tile_id},{r.n_segments}" for r in rows]
    write_text_atomic(manifest_path, "\n".join(lines) + "\n")
    return map_path, os.path.join(out_dir, "queries"), manifest_path


def read_manifest(path: str) -> list[QueryRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(QueryRecord(row["query"], int(row["tile_id"]),
                                       int(row["n_segments"])))
    if not records:
        raise ParameterError(f"manifest {path} lists no queries")
    return records
