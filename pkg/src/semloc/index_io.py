"""Persistent tile index: text format with a versioned magic header.

The index carries everything a query needs: pooling layout, concept
catalog, tile grid geometry, per-tile Gaussian mixtures, descriptors,
presence bits, and (optionally) the hierarchical search tree.  Floats are
written in shortest round-trip form so rebuilding with the same seed
yields a byte-identical file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import fmt, write_text_atomic
from .descriptor import NORTH_ORIENTATION, LayoutDescriptor, PoolingLayout
from .errors import FormatError, ValidationError
from .maps import ConceptGmm, ConceptLabel, GaussianComponent, TileGrid, _LineCursor
from .tree import SemanticTree, TreeNode

INDEX_MAGIC = "SEMIDX 1"


@dataclass
class TileRecord:
    tile_id: int
    center: tuple[float, float]
    side: float
    empty: bool
    gmms: list[ConceptGmm]
    descriptor: LayoutDescriptor


@dataclass
class TileIndex:
    layout: PoolingLayout
    concepts: list[ConceptLabel]
    grid: TileGrid
    tiles: list[TileRecord]
    tree: SemanticTree | None = None

    def concept_rows(self) -> dict[int, int]:
        return {c.id: i for i, c in enumerate(self.concepts)}

    def vertical_ids(self) -> set[int]:
        return {c.id for c in self.concepts if c.vertical}

    def entries(self, include_empty: bool = True) -> list[tuple[int, LayoutDescriptor]]:
        return [(t.tile_id, t.descriptor) for t in self.tiles
                if include_empty or not t.empty]

    def by_id(self) -> dict[int, TileRecord]:
        return {t.tile_id: t for t in self.tiles}


def format_index(index: TileIndex) -> str:
    out = [INDEX_MAGIC]
    lay = index.layout
    out.append(f"LAYOUT {lay.n_rings} {lay.n_sectors}")
    for i in range(lay.n_rings):
        out.append(f"RING {i} {fmt(lay.ring_radii[i])} {fmt(lay.sigmas[i])}")
    g = index.grid
    out.append(f"GRID {fmt(g.x0)} {fmt(g.y0)} {fmt(g.side)} {fmt(g.stride)} {g.nx} {g.ny}")
    out.append(f"CONCEPTS {len(index.concepts)}")
    for c in index.concepts:
        out.append(f"CONCEPT {c.id} {c.name} {1 if c.vertical else 0}")
    out.append(f"TILES {len(index.tiles)}")
    for t in index.tiles:
        out.append(f"TILE {t.tile_id} {fmt(t.center[0])} {fmt(t.center[1])} "
                   f"{fmt(t.side)} {1 if t.empty else 0}")
        for row, gmm in enumerate(t.gmms):
            if gmm.empty:
                continue
            out.append(f"GMM {t.tile_id} {index.concepts[row].id} {len(gmm.components)}")
            for w, comp in zip(gmm.weights, gmm.components):
                c = comp.cov
                out.append(f"COMP {fmt(w)} {fmt(comp.mean[0])} {fmt(comp.mean[1])} "
                           f"{fmt(c[0, 0])} {fmt(c[0, 1])} {fmt(c[1, 1])}")
        flat = " ".join(fmt(v) for v in t.descriptor.values.reshape(-1))
        out.append(f"DVEC {t.tile_id} {flat}")
        bits = "".join(str(int(b)) for b in t.descriptor.presence)
        out.append(f"PRES {t.tile_id} {bits}")
    if index.tree is not None:
        tr = index.tree
        out.append(f"TREE {tr.branching} {tr.leaf_capacity} {tr.seed}")
        for n in tr.nodes:
            ids = " ".join(str(t) for t in n.tile_ids)
            out.append(f"NODE {n.id} {n.layer} {n.parent} {ids}".rstrip())
    out.append("END")
    return "\n".join(out) + "\n"


def write_index(index: TileIndex, path: str) -> None:
    write_text_atomic(path, format_index(index))


def parse_index(text: str) -> TileIndex:
    cursor = _LineCursor(text.splitlines())
    no, line = cursor.next_content()
    if line != INDEX_MAGIC:
        raise FormatError(f"expected magic '{INDEX_MAGIC}'", no)

    no, line = cursor.next_content()
    parts = line.split()
    if parts[0] != "LAYOUT" or len(parts) != 3:
        raise FormatError("expected 'LAYOUT <rings> <sectors>'", no)
    n_rings, n_sectors = int(parts[1]), int(parts[2])
    radii, sigmas = [0.0] * n_rings, [0.0] * n_rings
    for _ in range(n_rings):
        no, line = cursor.next_content()
        parts = line.split()
        if parts[0] != "RING" or len(parts) != 4:
            raise FormatError("expected 'RING <i> <radius> <sigma>'", no)
        i = int(parts[1])
        radii[i], sigmas[i] = float(parts[2]), float(parts[3])
    layout = PoolingLayout(n_rings, n_sectors, tuple(radii), tuple(sigmas))

    no, line = cursor.next_content()
    parts = line.split()
    if parts[0] != "GRID" or len(parts) != 7:
        raise FormatError("expected 'GRID x0 y0 side stride nx ny'", no)
    grid = TileGrid(float(parts[1]), float(parts[2]), float(parts[3]),
                    float(parts[4]), int(parts[5]), int(parts[6]))

    no, line = cursor.next_content()
    parts = line.split()
    if parts[0] != "CONCEPTS" or len(parts) != 2:
        raise FormatError("expected 'CONCEPTS <count>'", no)
    concepts = []
    for _ in range(int(parts[1])):
        no, line = cursor.next_content()
        parts = line.split()
        if parts[0] != "CONCEPT" or len(parts) != 4:
            raise FormatError("expected 'CONCEPT <id> <name> <vertical>'", no)
        concepts.append(ConceptLabel(int(parts[1]), parts[2], bool(int(parts[3]))))

    no, line = cursor.next_content()
    parts = line.split()
    if parts[0] != "TILES" or len(parts) != 2:
        raise FormatError("expected 'TILES <count>'", no)
    n_tiles = int(parts[1])
    rows = {c.id: i for i, c in enumerate(concepts)}

    tiles: list[TileRecord] = []
    tree: SemanticTree | None = None
    current: dict | None = None

    def finish_current() -> None:
        if current is None:
            return
        if current["values"] is None or current["presence"] is None:
            raise ValidationError(f"tile {current['id']} lacks DVEC or PRES")
        values = current["values"].reshape(len(concepts), layout.n_rings, layout.n_sectors)
        desc = LayoutDescriptor(values, current["presence"],
                                np.array(current["center"]), orientation=current["orient"])
        tiles.append(TileRecord(current["id"], current["center"], current["side"],
                                current["empty"], current["gmms"], desc))

    while True:
        nxt = cursor.next_content_or_none()
        if nxt is None:
            raise FormatError("missing END record", len(text.splitlines()))
        no, line = nxt
        parts = line.split()
        tag = parts[0]
        if tag == "TILE":
            finish_current()
            current = {
                "id": int(parts[1]),
                "center": (float(parts[2]), float(parts[3])),
                "side": float(parts[4]),
                "empty": bool(int(parts[5])),
                "gmms": [ConceptGmm.void() for _ in concepts],
                "values": None, "presence": None,
                "orient": NORTH_ORIENTATION,
            }
        elif tag == "GMM":
            if current is None or int(parts[1]) != current["id"]:
                raise ValidationError("GMM record outside its tile", no)
            concept_id, n_comp = int(parts[2]), int(parts[3])
            weights, comps = [], []
            for _ in range(n_comp):
                no2, comp_line = cursor.next_content()
                cp = comp_line.split()
                if cp[0] != "COMP" or len(cp) != 7:
                    raise FormatError("expected 'COMP w mx my cxx cxy cyy'", no2)
                weights.append(float(cp[1]))
                mean = [float(cp[2]), float(cp[3])]
                cov = [[float(cp[4]), float(cp[5])], [float(cp[5]), float(cp[6])]]
                comps.append(GaussianComponent(mean, cov))
            current["gmms"][rows[concept_id]] = ConceptGmm(np.array(weights), comps)
        elif tag == "DVEC":
            if current is None or int(parts[1]) != current["id"]:
                raise ValidationError("DVEC record outside its tile", no)
            current["values"] = np.array([float(v) for v in parts[2:]])
        elif tag == "PRES":
            if current is None or int(parts[1]) != current["id"]:
                raise ValidationError("PRES record outside its tile", no)
            current["presence"] = np.array([int(b) for b in parts[2]], dtype=np.uint8)
        elif tag == "TREE":
            finish_current()
            current = None
            tree = _parse_tree(cursor, int(parts[1]), int(parts[2]), int(parts[3]))
            break
        elif tag == "END":
            finish_current()
            current = None
            break
        else:
            raise FormatError(f"unexpected record '{tag}'", no)

    if len(tiles) != n_tiles:
        raise ValidationError(f"expected {n_tiles} tiles, found {len(tiles)}")
    return TileIndex(layout, concepts, grid, tiles, tree)


def _parse_tree(cursor: _LineCursor, branching: int, leaf_capacity: int,
                seed: int) -> SemanticTree:
    nodes: list[TreeNode] = []
    while True:
        nxt = cursor.next_content_or_none()
        if nxt is None:
            raise FormatError("missing END record after TREE section")
        no, line = nxt
        parts = line.split()
        if parts[0] == "END":
            break
        if parts[0] != "NODE":
            raise FormatError(f"unexpected record '{parts[0]}' in TREE section", no)
        nodes.append(TreeNode(int(parts[1]), int(parts[2]), int(parts[3]),
                              [int(t) for t in parts[4:]]))
    nodes.sort(key=lambda n: n.id)
    for n in nodes:
        if n.parent >= 0:
            nodes[n.parent].children.append(n.id)
    return SemanticTree(nodes, branching, leaf_capacity, seed)


def read_index(path: str) -> TileIndex:
    with open(path) as fh:
        return parse_index(fh.read())
