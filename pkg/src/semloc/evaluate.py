"""Retrieval evaluation: ground-truth ranks, recall curves, heat maps.

A run scores every manifest query against a tile index and reports where
the ground-truth tile landed.  Scoring modes: the combined layout+presence
distance (default), layout only, presence only, and a seeded random
baseline for calibration.  Curves from several runs (modes or concept
subsets) can share one CSV, labeled per run.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ._util import fmt, write_text_atomic
from .camera import parse_query
from .config import RunConfig
from .errors import ParameterError, ValidationError
from .index_io import TileIndex
from .maps import TileGrid
from .matching import (CombinedScoreParams, rank_cdf, rank_tiles,
                       recall_at, recall_auc)
from .pipeline import query_descriptor, select_concepts
from .synth import QueryRecord
from .tree import TraversalBudget, tree_search

MODES = ("combined", "layout", "presence", "random")


@dataclass
class EvalReport:
    label: str
    ranks: list[int]
    n_ranked: int
    curve: np.ndarray
    auc: float

    @property
    def median_normalized_rank(self) -> float:
        return float(np.median(np.asarray(self.ranks) / self.n_ranked))

    def recall_at(self, fraction: float) -> float:
        return recall_at(self.curve, fraction)


def _score_params(cfg: RunConfig, mode: str) -> CombinedScoreParams:
    if mode == "layout":
        return CombinedScoreParams(0.0, cfg.presence_asymmetric)
    return CombinedScoreParams(cfg.lambda_presence, cfg.presence_asymmetric)


def _presence_only_rank(query_pres, entries, asymmetric: bool, gt: int) -> int:
    q = np.asarray(query_pres, dtype=np.uint8)
    ids = np.array([t for t, _ in entries])
    pres = np.stack([d.presence for _, d in entries])
    if asymmetric:
        mism = np.sum((q[None, :] == 1) & (pres == 0), axis=1)
    else:
        mism = np.sum(q[None, :] != pres, axis=1)
    order = np.lexsort((ids, mism))
    return int(np.flatnonzero(ids[order] == gt)[0]) + 1


def evaluate_queries(index: TileIndex, base_dir: str, records: list[QueryRecord],
                     cfg: RunConfig, mode: str = "combined",
                     subset: tuple[str, ...] | None = None,
                     use_tree: bool = False, label: str | None = None) -> EvalReport:
    """Rank the ground-truth tile for every query in a manifest."""
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    entries = index.entries(cfg.include_empty)
    if not entries:
        raise ParameterError("index has no rankable tiles")
    known = {tid for tid, _ in entries}
    rows = None
    if subset:
        chosen = select_concepts(index.concepts, subset)
        positions = {c.id: i for i, c in enumerate(index.concepts)}
        rows = np.array([positions[c.id] for c in chosen])
        entries = [(tid, d.select_concepts(rows)) for tid, d in entries]
    params = _score_params(cfg, mode)

    ranks: list[int] = []
    for qi, record in enumerate(records):
        if record.tile_id not in known:
            raise ValidationError(
                f"ground-truth tile {record.tile_id} of {record.name} is not ranked")
        if mode == "random":
            rng = np.random.default_rng((cfg.seed, qi))
            ids = np.array([t for t, _ in entries])
            shuffled = rng.permutation(ids)
            ranks.append(int(np.flatnonzero(shuffled == record.tile_id)[0]) + 1)
            continue
        with open(os.path.join(base_dir, record.name)) as fh:
            camera, pixel_segments = parse_query(fh.read())
        desc, mask, _ = query_descriptor(camera, pixel_segments, index, cfg.origin_mode)
        if rows is not None:
            desc = desc.select_concepts(rows)
        if mode == "presence":
            ranks.append(_presence_only_rank(desc.presence, entries,
                                             cfg.presence_asymmetric, record.tile_id))
            continue
        if use_tree:
            ranks.append(_tree_rank(index, entries, desc, mask, params, cfg, record.tile_id))
        else:
            results, _ = rank_tiles(desc, entries, mask, params)
            ranks.append(next(r.rank for r in results if r.tile_id == record.tile_id))

    curve = rank_cdf(ranks, len(entries))
    if label is None:
        label = mode if not subset else f"{mode}[{'+'.join(subset)}]"
    return EvalReport(label, ranks, len(entries), curve, recall_auc(curve))


def _tree_rank(index: TileIndex, entries, desc, mask, params, cfg: RunConfig,
               gt: int) -> int:
    """Tree search yields a top-1 only: rank 1 on a hit, else worst case."""
    if index.tree is None:
        raise ParameterError("index has no tree section; rebuild with tree=1")
    descriptors = dict(entries)
    budget = TraversalBudget(cfg.tree_samples, cfg.seed, cfg.tree_spill)
    best, _ = tree_search(index.tree, descriptors, desc, mask, params, budget)
    return 1 if best.tile_id == gt else len(entries)


def write_curves_csv(reports: list[EvalReport], path: str) -> None:
    lines = ["label,fraction,recall"]
    for rep in reports:
        for frac, rec in rep.curve:
            lines.append(f"{rep.label},{fmt(frac)},{fmt(rec)}")
    write_text_atomic(path, "\n".join(lines) + "\n")


def summary_text(reports: list[EvalReport]) -> str:
    lines = []
    for rep in reports:
        lines.append(f"{rep.label}: queries={len(rep.ranks)} tiles={rep.n_ranked} "
                     f"median_norm_rank={fmt(rep.median_normalized_rank)} "
                     f"recall@1%={fmt(rep.recall_at(0.01))} "
                     f"recall@5%={fmt(rep.recall_at(0.05))} "
                     f"auc={fmt(rep.auc)}")
    return "\n".join(lines) + "\n"


def heat_pgm(grid: TileGrid, heat: dict[int, float]) -> str:
    """ASCII PGM over the tile grid; brighter is closer, absent tiles are 0.

    Row 0 is the northernmost tile row so the image reads like a map.
    """
    values = np.zeros((grid.ny, grid.nx))
    known = np.zeros((grid.ny, grid.nx), dtype=bool)
    for tile_id, h in heat.items():
        ix, iy = grid.cell(tile_id)
        values[grid.ny - 1 - iy, ix] = h
        known[grid.ny - 1 - iy, ix] = True
    if known.any():
        lo = values[known].min()
        hi = values[known].max()
        span = hi - lo
        pixels = np.zeros_like(values)
        if span <= 0:
            pixels[known] = 255
        else:
            pixels[known] = 1 + np.round(254.0 * (values[known] - lo) / span)
    else:
        pixels = values
    out = ["P2", f"{grid.nx} {grid.ny}", "255"]
    for row in pixels.astype(int):
        out.append(" ".join(str(v) for v in row))
    return "\n".join(out) + "\n"


def write_heat_pgm(grid: TileGrid, heat: dict[int, float], path: str) -> None:
    write_text_atomic(path, heat_pgm(grid, heat))


def ranking_csv(results, centers: dict[int, tuple[float, float]]) -> str:
    lines = ["rank,tile_id,distance,shift,x,y"]
    for r in results:
        x, y = centers[r.tile_id]
        lines.append(f"{r.rank},{r.tile_id},{fmt(r.distance)},{r.best_shift},{fmt(x)},{fmt(y)}")
    return "\n".join(lines) + "\n"
