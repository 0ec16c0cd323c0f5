"""Vector semantic maps: concepts, labeled polygon segments, tiling, Gaussians.

A map is a set of polygonal segments in metric ground coordinates, each
carrying a concept label.  For retrieval the map is cut into overlapping
square tiles on a regular grid; per tile and per concept the segments are
summarized as a Gaussian mixture whose components come from exact polygon
moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from ._util import fmt
from .errors import FormatError, ParameterError, ValidationError

MAP_MAGIC = "SEMMAP 1"

# covariance eigenvalue floor in m^2; keeps slivers and symbolic points invertible
COV_FLOOR = 0.01

DEFAULT_TILE_SIDE = 30.0
DEFAULT_TILE_STRIDE = 15.0

# side of the square footprint used for point-like street furniture
POINT_FOOTPRINT_SIDE = 0.5


@dataclass(frozen=True)
class ConceptLabel:
    id: int
    name: str
    vertical: bool


# ground-truth catalog used by the synthetic generator and the demos;
# vertical means pole-like classes whose masks only touch the ground
# along their bottom rows, while buildings enter as map footprints
DEFAULT_CONCEPTS: tuple[ConceptLabel, ...] = (
    ConceptLabel(0, "Road", False),
    ConceptLabel(1, "Tree", False),
    ConceptLabel(2, "Building", False),
    ConceptLabel(3, "Water", False),
    ConceptLabel(4, "Lamp_Post", True),
    ConceptLabel(5, "Traffic_Signal", True),
    ConceptLabel(6, "Traffic_Sign", True),
)


@dataclass
class Segment:
    """One labeled polygon. Vertices are (n, 2) floats, either winding."""

    concept: int
    polygon: np.ndarray

    def __post_init__(self):
        self.polygon = geometry.as_polygon(self.polygon)


@dataclass
class SemanticMap:
    concepts: list[ConceptLabel]
    segments: list[Segment]
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    def concept_by_id(self) -> dict[int, ConceptLabel]:
        return {c.id: c for c in self.concepts}


@dataclass(frozen=True)
class TileGrid:
    """Regular grid of overlapping square tiles covering a map's bounds."""

    x0: float
    y0: float
    side: float
    stride: float
    nx: int
    ny: int

    def center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.x0 + self.side / 2.0 + ix * self.stride,
                self.y0 + self.side / 2.0 + iy * self.stride)

    def tile_id(self, ix: int, iy: int) -> int:
        return iy * self.nx + ix

    def cell(self, tile_id: int) -> tuple[int, int]:
        return tile_id % self.nx, tile_id // self.nx

    @property
    def count(self) -> int:
        return self.nx * self.ny


@dataclass
class Tile:
    id: int
    center: tuple[float, float]
    side: float
    segments: list[Segment] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.segments


@dataclass
class GaussianComponent:
    mean: np.ndarray
    cov: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(2)
        self.cov = np.asarray(self.cov, dtype=float).reshape(2, 2)


@dataclass
class ConceptGmm:
    """Per-concept mixture; weights sum to 1 whenever components exist."""

    weights: np.ndarray
    components: list[GaussianComponent]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.weights) != len(self.components):
            raise ParameterError("weight count must match component count")

    @property
    def empty(self) -> bool:
        return len(self.components) == 0

    @classmethod
    def void(cls) -> "ConceptGmm":
        return cls(np.zeros(0), [])


def polygon_gaussian(polygon, floor: float = COV_FLOOR) -> GaussianComponent:
    """Gaussian matching a polygon's uniform-density mean and covariance.

    Covariance eigenvalues are floored at `floor` so every component stays
    invertible.  A zero-area polygon falls back to the vertex mean with an
    isotropic floor covariance and is flagged degenerate.
    """
    area, mean, cov = geometry.polygon_moments(polygon)
    if area <= geometry.AREA_EPS:
        return GaussianComponent(mean, floor * np.eye(2), degenerate=True)
    w, v = np.linalg.eigh(cov)
    w = np.maximum(w, floor)
    cov = (v * w) @ v.T
    cov = 0.5 * (cov + cov.T)
    return GaussianComponent(mean, cov)


def segment_weights(segments: list[Segment]) -> np.ndarray:
    """Area-proportional mixture weights; uniform when all areas vanish."""
    if not segments:
        return np.zeros(0)
    areas = np.array([geometry.polygon_area(s.polygon) for s in segments])
    total = float(areas.sum())
    if total <= geometry.AREA_EPS:
        return np.full(len(segments), 1.0 / len(segments))
    return areas / total


def gmm_from_segments(segments: list[Segment]) -> ConceptGmm:
    comps = [polygon_gaussian(s.polygon) for s in segments]
    return ConceptGmm(segment_weights(segments), comps)


def gmms_by_concept(segments: list[Segment], concepts: list[ConceptLabel]) -> list[ConceptGmm]:
    """One mixture per catalog entry, ordered like `concepts`.

    Segments whose concept id is not in the catalog are ignored, which is
    what a concept-subset run wants.
    """
    rows = {c.id: i for i, c in enumerate(concepts)}
    grouped: list[list[Segment]] = [[] for _ in concepts]
    for seg in segments:
        row = rows.get(seg.concept)
        if row is not None:
            grouped[row].append(seg)
    return [gmm_from_segments(group) for group in grouped]


def tile_gmm(tile: Tile, concept_id: int) -> ConceptGmm:
    """Mixture over one concept's segments inside a tile."""
    return gmm_from_segments([s for s in tile.segments if s.concept == concept_id])


def make_grid(bounds, side: float = DEFAULT_TILE_SIDE,
              stride: float = DEFAULT_TILE_STRIDE) -> TileGrid:
    if side <= 0 or stride <= 0:
        raise ParameterError("tile side and stride must be positive")
    xmin, ymin, xmax, ymax = bounds

    def axis_count(extent: float) -> int:
        if extent <= side:
            return 1
        # ceil so the grid covers extents that do not divide evenly; the
        # last tile may overhang the declared bounds
        return int(math.ceil((extent - side) / stride - 1e-9)) + 1

    return TileGrid(xmin, ymin, side, stride, axis_count(xmax - xmin), axis_count(ymax - ymin))


def tile_map(semantic_map: SemanticMap, side: float = DEFAULT_TILE_SIDE,
             stride: float = DEFAULT_TILE_STRIDE) -> tuple[TileGrid, list[Tile]]:
    """Cut a map into overlapping square tiles, clipping segments to each tile.

    Clipped pieces with vanishing area are dropped; a tile with no surviving
    pieces is kept (empty) so tile ids stay aligned with the grid.
    """
    grid = make_grid(semantic_map.bounds, side, stride)
    tiles = [Tile(grid.tile_id(ix, iy), grid.center(ix, iy), side)
             for iy in range(grid.ny) for ix in range(grid.nx)]
    half = side / 2.0
    for seg in semantic_map.segments:
        x, y = seg.polygon[:, 0], seg.polygon[:, 1]
        sxmin, sxmax = float(x.min()), float(x.max())
        symin, symax = float(y.min()), float(y.max())
        # only tiles whose square can intersect the segment's bbox
        ix_lo = max(0, int(math.ceil((sxmin - grid.x0 - side) / grid.stride - 1e-9)))
        ix_hi = min(grid.nx - 1, int(math.floor((sxmax - grid.x0) / grid.stride + 1e-9)))
        iy_lo = max(0, int(math.ceil((symin - grid.y0 - side) / grid.stride - 1e-9)))
        iy_hi = min(grid.ny - 1, int(math.floor((symax - grid.y0) / grid.stride + 1e-9)))
        for iy in range(iy_lo, iy_hi + 1):
            for ix in range(ix_lo, ix_hi + 1):
                cx, cy = grid.center(ix, iy)
                clipped = geometry.clip_rect(seg.polygon, cx - half, cy - half, cx + half, cy + half)
                if len(clipped) >= 3 and geometry.polygon_area(clipped) > geometry.AREA_EPS:
                    tiles[grid.tile_id(ix, iy)].segments.append(Segment(seg.concept, clipped))
    return grid, tiles


# ---------------------------------------------------------------------------
# map file format


def parse_map(text: str) -> SemanticMap:
    """Parse the plain-text map format.

    Layout: a magic line, a BOUNDS line, a CONCEPTS block, then SEG lines
    with metric vertex coordinates.  Blank lines and '#' comments are
    skipped.  Structural problems raise FormatError with the line number;
    semantic ones raise ValidationError.
    """
    lines = text.splitlines()
    cursor = _LineCursor(lines)

    no, line = cursor.next_content()
    if line != MAP_MAGIC:
        raise FormatError(f"expected magic '{MAP_MAGIC}'", no)

    no, line = cursor.next_content()
    parts = line.split()
    if len(parts) != 5 or parts[0] != "BOUNDS":
        raise FormatError("expected 'BOUNDS xmin ymin xmax ymax'", no)
    try:
        xmin, ymin, xmax, ymax = (float(p) for p in parts[1:])
    except ValueError:
        raise FormatError("BOUNDS values must be numeric", no) from None
    if not (xmax > xmin and ymax > ymin):
        raise ValidationError("bounds must have positive extent", no)

    no, line = cursor.next_content()
    parts = line.split()
    if len(parts) != 2 or parts[0] != "CONCEPTS":
        raise FormatError("expected 'CONCEPTS <count>'", no)
    try:
        n_concepts = int(parts[1])
    except ValueError:
        raise FormatError("concept count must be an integer", no) from None
    if n_concepts <= 0:
        raise ValidationError("concept count must be positive", no)

    concepts: list[ConceptLabel] = []
    for _ in range(n_concepts):
        no, line = cursor.next_content()
        parts = line.split()
        if len(parts) != 3:
            raise FormatError("expected '<id> <name> <vertical 0|1>'", no)
        try:
            cid = int(parts[0])
            vertical = int(parts[2])
        except ValueError:
            raise FormatError("concept id and vertical flag must be integers", no) from None
        if vertical not in (0, 1):
            raise ValidationError("vertical flag must be 0 or 1", no)
        concepts.append(ConceptLabel(cid, parts[1], bool(vertical)))
    ids = sorted(c.id for c in concepts)
    if ids != list(range(n_concepts)):
        raise ValidationError(f"concept ids must be exactly 0..{n_concepts - 1}")
    if len({c.name for c in concepts}) != n_concepts:
        raise ValidationError("concept names must be unique")
    concepts.sort(key=lambda c: c.id)
    known = {c.id for c in concepts}

    segments: list[Segment] = []
    while True:
        nxt = cursor.next_content_or_none()
        if nxt is None:
            break
        no, line = nxt
        segments.append(_parse_seg_line(no, line, known, bounds=(xmin, ymin, xmax, ymax)))

    return SemanticMap(concepts, segments, (xmin, ymin, xmax, ymax))


def _parse_seg_line(no: int, line: str, known_ids: set[int],
                    bounds: tuple[float, float, float, float] | None) -> Segment:
    parts = line.split()
    if parts[0] != "SEG":
        raise FormatError(f"unexpected record '{parts[0]}'", no)
    if len(parts) < 3:
        raise FormatError("expected 'SEG <concept> <n> <x1> <y1> ...'", no)
    try:
        cid = int(parts[1])
        n = int(parts[2])
    except ValueError:
        raise FormatError("SEG concept id and vertex count must be integers", no) from None
    if cid not in known_ids:
        raise ValidationError(f"segment references undeclared concept {cid}", no)
    if n < 3:
        raise ValidationError("segments need at least 3 vertices", no)
    coords = parts[3:]
    if len(coords) != 2 * n:
        raise FormatError(f"expected {2 * n} coordinates, got {len(coords)}", no)
    try:
        values = np.array([float(c) for c in coords]).reshape(n, 2)
    except ValueError:
        raise FormatError("vertex coordinates must be numeric", no) from None
    if bounds is not None:
        xmin, ymin, xmax, ymax = bounds
        eps = 1e-9
        if (values[:, 0].min() < xmin - eps or values[:, 0].max() > xmax + eps
                or values[:, 1].min() < ymin - eps or values[:, 1].max() > ymax + eps):
            raise ValidationError("segment vertex outside declared bounds", no)
    return Segment(cid, values)


def format_map(semantic_map: SemanticMap) -> str:
    xmin, ymin, xmax, ymax = semantic_map.bounds
    out = [MAP_MAGIC, f"BOUNDS {fmt(xmin)} {fmt(ymin)} {fmt(xmax)} {fmt(ymax)}"]
    out.append(f"CONCEPTS {len(semantic_map.concepts)}")
    for c in sorted(semantic_map.concepts, key=lambda c: c.id):
        out.append(f"{c.id} {c.name} {1 if c.vertical else 0}")
    for seg in semantic_map.segments:
        out.append(format_seg_line(seg))
    return "\n".join(out) + "\n"


def format_seg_line(seg: Segment) -> str:
    coords = " ".join(fmt(v) for v in seg.polygon.reshape(-1))
    return f"SEG {seg.concept} {len(seg.polygon)} {coords}"


class _LineCursor:
    """Iterates content lines, tracking 1-based numbers, skipping blanks/comments."""

    def __init__(self, lines: list[str]):
        self._lines = lines
        self._pos = 0

    def next_content_or_none(self) -> tuple[int, str] | None:
        while self._pos < len(self._lines):
            self._pos += 1
            stripped = self._lines[self._pos - 1].strip()
            if stripped and not stripped.startswith("#"):
                return self._pos, stripped
        return None

    def next_content(self) -> tuple[int, str]:
        nxt = self.next_content_or_none()
        if nxt is None:
            raise FormatError("unexpected end of file", len(self._lines))
        return nxt
