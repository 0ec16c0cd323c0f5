"""Semantic tile maps, rotation-searched layout descriptors, place retrieval.

The pieces compose left to right: parse or synthesize a vector semantic
map, cut it into overlapping tiles, summarize each tile's geometry as
per-concept Gaussian mixtures, pool those mixtures into a polar grid of
Hellinger affinities (the layout descriptor), then rank tiles for a
ground-projected camera query by rotation-searched masked distance plus
a presence penalty.  A spectral tree over the descriptors trades a
little accuracy for sublinear search.
"""

from .camera import (CameraModel, GroundPoint, fov_half_angle, ground_project,
                     ground_to_pixel, metric_scale, parse_query,
                     project_query_segments)
from .config import RunConfig, apply_overrides, parse_config_file
from .descriptor import (LayoutDescriptor, PoolingLayout, bhattacharyya_gauss,
                         bhattacharyya_gmm, extract_descriptor, hellinger,
                         presence_vector)
from .errors import (FormatError, HorizonError, LayoutMismatchError,
                     ParameterError, SemlocError, ValidationError)
from .evaluate import EvalReport, evaluate_queries, heat_pgm, summary_text
from .geometry import (clip_halfplane, clip_rect, convex_hull, polygon_area,
                       polygon_moments, polygon_signed_area)
from .index_io import TileIndex, TileRecord, read_index, write_index
from .maps import (ConceptGmm, ConceptLabel, GaussianComponent, Segment,
                   SemanticMap, Tile, TileGrid, format_map, gmms_by_concept,
                   make_grid, parse_map, polygon_gaussian, tile_map)
from .matching import (CombinedScoreParams, FovMask, MatchResult,
                       asymmetric_l2, combined_distance, min_rotation_distance,
                       min_rotation_distance_fft, presence_mismatch,
                       rank_tiles, recall_at, recall_auc, rank_cdf)
from .pipeline import build_tile_index, query_descriptor, select_concepts
from .synth import SyntheticSpec, generate_corpus, generate_map, generate_queries
from .tree import (SemanticTree, TraversalBudget, TreeNode, build_tree,
                   pairwise_distance_matrix, spectral_split, tree_search)

__version__ = "0.1.0"

__all__ = [
    "CameraModel", "GroundPoint", "fov_half_angle", "ground_project",
    "ground_to_pixel", "metric_scale", "parse_query", "project_query_segments",
    "RunConfig", "apply_overrides", "parse_config_file",
    "LayoutDescriptor", "PoolingLayout", "bhattacharyya_gauss",
    "bhattacharyya_gmm", "extract_descriptor", "hellinger", "presence_vector",
    "FormatError", "HorizonError", "LayoutMismatchError", "ParameterError",
    "SemlocError", "ValidationError",
    "EvalReport", "evaluate_queries", "heat_pgm", "summary_text",
    "clip_halfplane", "clip_rect", "convex_hull", "polygon_area",
    "polygon_moments", "polygon_signed_area",
    "TileIndex", "TileRecord", "read_index", "write_index",
    "ConceptGmm", "ConceptLabel", "GaussianComponent", "Segment",
    "SemanticMap", "Tile", "TileGrid", "format_map", "gmms_by_concept",
    "make_grid", "parse_map", "polygon_gaussian", "tile_map",
    "CombinedScoreParams", "FovMask", "MatchResult", "asymmetric_l2",
    "combined_distance", "min_rotation_distance", "min_rotation_distance_fft",
    "presence_mismatch", "rank_tiles", "recall_at", "recall_auc", "rank_cdf",
    "build_tile_index", "query_descriptor", "select_concepts",
    "SyntheticSpec", "generate_corpus", "generate_map", "generate_queries",
    "SemanticTree", "TraversalBudget", "TreeNode", "build_tree",
    "pairwise_distance_matrix", "spectral_split", "tree_search",
]
