"""End-to-end glue: map -> tile index, query file -> descriptor and mask."""

from __future__ import annotations

import numpy as np

from ._util import parallel_map
from .camera import (CameraModel, content_center_distance, fov_half_angle,
                     project_query_segments)
from .config import RunConfig
from .descriptor import NORTH_ORIENTATION, LayoutDescriptor, extract_descriptor
from .errors import LayoutMismatchError, ValidationError
from .index_io import TileIndex, TileRecord
from .maps import ConceptLabel, Segment, SemanticMap, gmms_by_concept, tile_map
from .matching import FovMask
from .tree import build_tree


def select_concepts(all_concepts: list[ConceptLabel],
                    names: tuple[str, ...] | None) -> list[ConceptLabel]:
    """Resolve a concept-name filter against a catalog, keeping catalog order."""
    if names is None:
        return list(all_concepts)
    by_name = {c.name: c for c in all_concepts}
    missing = [n for n in names if n not in by_name]
    if missing:
        raise ValidationError(f"unknown concept names: {missing}")
    wanted = set(names)
    return [c for c in all_concepts if c.name in wanted]


def build_tile_index(semantic_map: SemanticMap, cfg: RunConfig) -> TileIndex:
    """Tile a map, fit per-concept mixtures, extract descriptors, optionally
    attach the hierarchical search tree."""
    layout = cfg.pooling_layout()
    concepts = select_concepts(semantic_map.concepts, cfg.concepts)
    grid, tiles = tile_map(semantic_map, cfg.tile_side, cfg.tile_stride)

    def make_record(tile) -> TileRecord:
        gmms = gmms_by_concept(tile.segments, concepts)
        # tile descriptors sit at the tile center under either origin mode;
        # the modes differ only on the query side
        desc = extract_descriptor(gmms, layout, np.array(tile.center), NORTH_ORIENTATION)
        return TileRecord(tile.id, tile.center, tile.side, tile.empty, gmms, desc)

    records = parallel_map(make_record, tiles)
    tree = None
    if cfg.tree:
        entries = [(r.tile_id, r.descriptor) for r in records
                   if cfg.include_empty or not r.empty]
        tree = build_tree(entries, cfg.tree_branching, cfg.tree_leaf_capacity, cfg.seed)
    return TileIndex(layout, concepts, grid, records, tree)


def check_layout_compatible(index: TileIndex, cfg: RunConfig) -> None:
    """Refuse to match when the run's layout differs from the index's."""
    lay = cfg.pooling_layout()
    if (lay.n_rings, lay.n_sectors) != (index.layout.n_rings, index.layout.n_sectors) \
            or tuple(lay.ring_radii) != tuple(index.layout.ring_radii) \
            or tuple(lay.sigmas) != tuple(index.layout.sigmas):
        raise LayoutMismatchError(
            "configured pooling layout does not match the index; "
            "rebuild the index or drop the conflicting flags")


def query_descriptor(camera: CameraModel, pixel_segments: list[Segment],
                     index: TileIndex, origin_mode: str,
                     ) -> tuple[LayoutDescriptor, FovMask, int]:
    """Project a pixel-space query to the ground and describe it.

    CC places the descriptor at the camera (origin of the ground frame) and
    masks sectors outside the field of view; CI places it at the center of
    the rectified content area, the nearest fully visible tile-sized disk
    ahead of the camera, and uses the full mask.  Returns (descriptor,
    mask, dropped segment count).
    """
    known = {c.id for c in index.concepts}
    usable = [s for s in pixel_segments if s.concept in known]
    ground_segments, dropped = project_query_segments(camera, usable, index.vertical_ids())
    gmms = gmms_by_concept(ground_segments, index.concepts)
    if origin_mode == "CC":
        origin = np.zeros(2)
        mask = FovMask.for_camera(index.layout, fov_half_angle(camera))
    else:
        origin = np.array([0.0, content_center_distance(camera, index.grid.side)])
        mask = FovMask.full(index.layout)
    desc = extract_descriptor(gmms, index.layout, origin, NORTH_ORIENTATION)
    return desc, mask, dropped
