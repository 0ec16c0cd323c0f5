"""Command-line front end.

Subcommands: build-index, query, synth, evaluate, tree-layers.  Options
come from defaults, then an optional key=value config file, then flags;
flags win.  SEMLOC_THREADS caps worker threads for batch stages.
"""

from __future__ import annotations

import argparse
import os
import sys

from ._util import fmt, write_text_atomic
from .camera import parse_query
from .config import RunConfig, apply_overrides, read_config_updates
from .descriptor import descriptor_dump_lines
from .errors import SemlocError
from .evaluate import (MODES, evaluate_queries, heat_pgm, ranking_csv,
                       summary_text, write_curves_csv)
from .index_io import read_index, write_index
from .maps import parse_map
from .matching import rank_tiles
from .pipeline import build_tile_index, check_layout_compatible, query_descriptor
from .synth import SyntheticSpec, generate_corpus, read_manifest
from .tree import TraversalBudget, tree_search

_LAYOUT_KEYS = {"rings", "sectors", "ring_radii", "ring_sigmas"}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--tile-side", dest="tile_side", type=float)
    p.add_argument("--tile-stride", dest="tile_stride", type=float)
    p.add_argument("--rings", type=int)
    p.add_argument("--sectors", type=int)
    p.add_argument("--ring-radii", dest="ring_radii",
                   type=lambda s: tuple(float(v) for v in s.split(",")))
    p.add_argument("--ring-sigmas", dest="ring_sigmas",
                   type=lambda s: tuple(float(v) for v in s.split(",")))
    p.add_argument("--origin-mode", dest="origin_mode", choices=("CI", "CC"))
    p.add_argument("--concepts", type=lambda s: tuple(v.strip() for v in s.split(",")),
                   help="comma-separated concept names to keep")
    p.add_argument("--lambda-presence", dest="lambda_presence", type=float)
    p.add_argument("--presence-asymmetric", dest="presence_asymmetric",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--include-empty", dest="include_empty",
                   action=argparse.BooleanOptionalAction, default=None,
                   help="rank empty tiles too (default on)")
    p.add_argument("--tree", action=argparse.BooleanOptionalAction, default=None,
                   help="build or use the hierarchical search tree")
    p.add_argument("--tree-branching", dest="tree_branching", type=int)
    p.add_argument("--tree-samples", dest="tree_samples", type=int)
    p.add_argument("--tree-leaf-capacity", dest="tree_leaf_capacity", type=int)
    p.add_argument("--tree-spill", dest="tree_spill", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--seed", type=int)


def _load_config(args: argparse.Namespace) -> tuple[RunConfig, set[str]]:
    """Defaults -> config file -> flags; returns config and explicit keys."""
    cfg = RunConfig()
    explicit: set[str] = set()
    if args.config:
        updates = read_config_updates(args.config)
        explicit |= set(updates)
        cfg = apply_overrides(cfg, updates)
    flag_updates = {k: getattr(args, k) for k in (
        "tile_side", "tile_stride", "rings", "sectors", "ring_radii", "ring_sigmas",
        "origin_mode", "concepts", "lambda_presence", "presence_asymmetric",
        "include_empty", "tree", "tree_branching", "tree_samples",
        "tree_leaf_capacity", "tree_spill", "top_k", "seed") if getattr(args, k) is not None}
    explicit |= set(flag_updates)
    return apply_overrides(cfg, flag_updates), explicit


def _check_requested_layout(index, cfg: RunConfig, explicit: set[str]) -> None:
    # an explicitly requested layout must match the index; otherwise the
    # index's stored layout is authoritative
    if explicit & _LAYOUT_KEYS:
        check_layout_compatible(index, cfg)


def cmd_build_index(args: argparse.Namespace) -> int:
    cfg, _ = _load_config(args)
    with open(args.map) as fh:
        semantic_map = parse_map(fh.read())
    index = build_tile_index(semantic_map, cfg)
    write_index(index, args.out)
    if args.dump_descriptors:
        lines = []
        for t in index.tiles:
            lines.extend(descriptor_dump_lines(t.tile_id, t.descriptor))
        write_text_atomic(args.dump_descriptors, "\n".join(lines) + "\n")
    n_empty = sum(1 for t in index.tiles if t.empty)
    print(f"indexed {len(index.tiles)} tiles ({n_empty} empty) "
          f"over a {index.grid.nx}x{index.grid.ny} grid -> {args.out}")
    if index.tree is not None:
        print(f"tree: {len(index.tree.nodes)} nodes, depth {index.tree.depth}")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    cfg, explicit = _load_config(args)
    index = read_index(args.index)
    _check_requested_layout(index, cfg, explicit)
    with open(args.query) as fh:
        camera, pixel_segments = parse_query(fh.read())
    desc, mask, dropped = query_descriptor(camera, pixel_segments, index, cfg.origin_mode)
    entries = index.entries(cfg.include_empty)
    centers = {t.tile_id: t.center for t in index.tiles}
    from .matching import CombinedScoreParams
    params = CombinedScoreParams(cfg.lambda_presence, cfg.presence_asymmetric)

    if cfg.tree:
        if index.tree is None:
            raise SemlocError("index has no tree section; rebuild with --tree")
        budget = TraversalBudget(cfg.tree_samples, cfg.seed, cfg.tree_spill)
        best, comparisons = tree_search(index.tree, dict(entries), desc, mask,
                                        params, budget)
        results = [best]
        print(f"tree search: {comparisons} descriptor comparisons")
    else:
        results, heat = rank_tiles(desc, entries, mask, params)
        if args.heat:
            write_text_atomic(args.heat, heat_pgm(index.grid, heat))

    if args.out:
        write_text_atomic(args.out, ranking_csv(results, centers))
    if dropped:
        print(f"dropped {dropped} segment(s) lost to the horizon")
    for r in results[:cfg.top_k]:
        x, y = centers[r.tile_id]
        print(f"#{r.rank} tile {r.tile_id} d={fmt(r.distance)} shift={r.best_shift} "
              f"center=({fmt(x)}, {fmt(y)})")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg, _ = _load_config(args)
    spec = SyntheticSpec(
        extent=args.extent, margin=args.margin, n_queries=args.queries,
        placement=args.placement, jitter_sigma=args.jitter, dropout=args.dropout,
        spurious_rate=args.spurious, min_view_segments=args.min_view_segments,
        seed=cfg.seed)
    map_path, query_dir, manifest_path = generate_corpus(spec, args.out, cfg)
    print(f"map: {map_path}")
    print(f"queries: {query_dir}")
    print(f"manifest: {manifest_path}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg, explicit = _load_config(args)
    index = read_index(args.index)
    _check_requested_layout(index, cfg, explicit)
    records = read_manifest(args.manifest)
    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    reports = []
    for mode in args.mode:
        reports.append(evaluate_queries(index, base_dir, records, cfg, mode=mode,
                                        use_tree=bool(cfg.tree)))
    for subset in args.subset or []:
        reports.append(evaluate_queries(index, base_dir, records, cfg,
                                        subset=subset, use_tree=bool(cfg.tree)))
    if args.curve:
        write_curves_csv(reports, args.curve)
    text = summary_text(reports)
    if args.summary:
        write_text_atomic(args.summary, text)
    print(text, end="")
    return 0


def cmd_tree_layers(args: argparse.Namespace) -> int:
    index = read_index(args.index)
    if index.tree is None:
        raise SemlocError("index has no tree section; rebuild with --tree")
    rows = []
    for node in index.tree.nodes:
        for tid in node.tile_ids:
            rows.append((node.layer, tid, node.id))
    rows.sort()
    lines = ["layer,tile_id,node_id"] + [f"{l},{t},{n}" for l, t, n in rows]
    out = "\n".join(lines) + "\n"
    if args.out:
        write_text_atomic(args.out, out)
    else:
        print(out, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semloc",
        description="semantic tile maps, layout descriptors, place retrieval")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="tile a map and extract descriptors")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-descriptors", dest="dump_descriptors",
                   help="also write DESC/PRES debug lines to this file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="rank tiles for one query file")
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--out", help="ranked CSV (rank,tile_id,distance,shift,x,y)")
    p.add_argument("--heat", help="heat-map PGM over the tile grid")
    _add_config_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("synth", help="generate a synthetic map and query corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--placement", choices=("CC", "CI"), default="CC",
                   help="CC: camera inside the tile; CI: whole tile in view")
    p.add_argument("--jitter", type=float, default=2.0)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--spurious", type=float, default=0.05)
    p.add_argument("--extent", type=lambda s: tuple(float(v) for v in s.split(",")),
                   default=(315.0, 315.0))
    p.add_argument("--margin", type=float, default=30.0)
    p.add_argument("--min-view-segments", dest="min_view_segments", type=int, default=3)
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="rank ground truth for a query corpus")
    p.add_argument("--index", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--curve", help="rank-CDF CSV (label,fraction,recall)")
    p.add_argument("--summary", help="write the summary text here too")
    p.add_argument("--mode", action="append", choices=MODES, default=None,
                   help="scoring mode; repeat for several curves")
    p.add_argument("--subset", action="append", default=None,
                   type=lambda s: tuple(v.strip() for v in s.split(",")),
                   help="concept-name subset; repeat for several curves")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tree-layers", help="dump per-layer tile clusters as CSV")
    p.add_argument("--index", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tree_layers)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "mode", None) is None and args.command == "evaluate":
        args.mode = ["combined"]
    try:
        return args.func(args)
    except (SemlocError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
