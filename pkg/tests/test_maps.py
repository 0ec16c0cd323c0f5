import numpy as np
import pytest

from semloc import (ConceptLabel, FormatError, Segment, ValidationError,
                    format_map, gmms_by_concept, make_grid, parse_map,
                    polygon_area, polygon_gaussian, tile_map)
from semloc.errors import ParameterError
from semloc.maps import (COV_FLOOR, gmm_from_segments, segment_weights,
                         tile_gmm)

from conftest import square


def test_polygon_gaussian_matches_moments():
    comp = polygon_gaussian(square(10.0, 10.0, 8.0))
    np.testing.assert_allclose(comp.mean, [10.0, 10.0])
    np.testing.assert_allclose(comp.cov, np.diag([64.0 / 12.0] * 2), atol=1e-12)
    assert not comp.degenerate


def test_polygon_gaussian_floors_thin_slivers():
    sliver = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 1e-4], [0.0, 1e-4]])
    comp = polygon_gaussian(sliver)
    assert np.linalg.eigvalsh(comp.cov).min() >= COV_FLOOR - 1e-15
    assert not comp.degenerate


def test_polygon_gaussian_degenerate_fallback():
    line = np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
    comp = polygon_gaussian(line)
    assert comp.degenerate
    np.testing.assert_allclose(comp.mean, [2.0, 0.0])
    np.testing.assert_allclose(comp.cov, COV_FLOOR * np.eye(2))


def test_segment_weights_area_proportional():
    segs = [Segment(0, square(0.0, 0.0, 2.0)), Segment(0, square(9.0, 0.0, 4.0))]
    np.testing.assert_allclose(segment_weights(segs), [0.2, 0.8])
    assert len(segment_weights([])) == 0


def test_segment_weights_uniform_when_degenerate():
    line = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    segs = [Segment(0, line), Segment(0, line + 5.0)]
    np.testing.assert_allclose(segment_weights(segs), [0.5, 0.5])


def test_gmm_weights_sum_to_one(tiny_map):
    gmm = gmm_from_segments([s for s in tiny_map.segments if s.concept == 0])
    assert gmm.weights.sum() == pytest.approx(1.0)
    assert len(gmm.components) == 2


def test_gmms_by_concept_order_and_unknown_ids(tiny_map):
    segs = tiny_map.segments + [Segment(77, square(5.0, 5.0, 2.0))]
    gmms = gmms_by_concept(segs, tiny_map.concepts)
    assert len(gmms) == 3
    assert [len(g.components) for g in gmms] == [2, 1, 1]   # id 77 dropped
    empty = gmms_by_concept([], tiny_map.concepts)
    assert all(g.empty for g in empty)


def test_make_grid_counts():
    assert make_grid((0, 0, 315, 315)).count == 400
    assert make_grid((0, 0, 90, 90)).count == 25
    assert make_grid((0, 0, 60, 60)).nx == 3
    assert make_grid((0, 0, 61, 60)).nx == 4      # overhang covers the rim
    assert make_grid((0, 0, 20, 20)).count == 1   # extent below one side
    with pytest.raises(ParameterError):
        make_grid((0, 0, 10, 10), side=0.0)


def test_grid_indexing_round_trip():
    grid = make_grid((0, 0, 90, 90))
    for tid in range(grid.count):
        ix, iy = grid.cell(tid)
        assert grid.tile_id(ix, iy) == tid
    assert grid.center(0, 0) == (15.0, 15.0)
    assert grid.center(1, 2) == (30.0, 45.0)


def test_tile_map_clips_and_keeps_empty_tiles(tiny_map):
    grid, tiles = tile_map(tiny_map)
    assert grid.count == 9 and len(tiles) == 9
    assert [t.id for t in tiles] == list(range(9))
    by_id = {t.id: t for t in tiles}
    # the 5 m tree at (25, 12) straddles the overlap of tiles 0 and 1
    assert sum(1 for s in by_id[0].segments if s.concept == 1) == 1
    assert sum(1 for s in by_id[1].segments if s.concept == 1) == 1
    # the north-west corner tile holds nothing
    assert by_id[grid.tile_id(0, 2)].empty
    # clipped pieces stay inside their tile square
    for t in tiles:
        cx, cy = t.center
        for s in t.segments:
            assert s.polygon[:, 0].min() >= cx - t.side / 2.0 - 1e-9
            assert s.polygon[:, 0].max() <= cx + t.side / 2.0 + 1e-9


def test_tile_map_drops_zero_area_clips(tiny_map):
    # a square only touching tile (0, 0) along the x = 30 border must not
    # leave a degenerate sliver there
    before = tile_map(tiny_map)[1][0].segments
    tiny_map.segments.append(Segment(0, square(32.0, 10.0, 4.0)))
    after = tile_map(tiny_map)[1][0].segments
    assert len(after) == len(before)
    assert all(polygon_area(s.polygon) > 0.0 for s in after)


def test_tile_gmm_filters_by_concept(tiny_map):
    _, tiles = tile_map(tiny_map)
    tile0 = next(t for t in tiles if t.id == 0)
    assert not tile_gmm(tile0, 0).empty
    assert tile_gmm(tile0, 99).empty


def test_map_format_round_trip(tiny_map):
    text = format_map(tiny_map)
    parsed = parse_map(text)
    assert format_map(parsed) == text
    assert [c.name for c in parsed.concepts] == ["Road", "Tree", "Lamp_Post"]
    assert parsed.concepts[2].vertical
    assert parsed.bounds == tiny_map.bounds
    assert len(parsed.segments) == len(tiny_map.segments)
    np.testing.assert_allclose(parsed.segments[0].polygon,
                               tiny_map.segments[0].polygon)


def test_map_parse_skips_comments_and_blanks(tiny_map):
    text = format_map(tiny_map)
    lines = text.splitlines()
    lines.insert(1, "# a comment")
    lines.insert(3, "")
    parsed = parse_map("\n".join(lines) + "\n")
    assert len(parsed.segments) == len(tiny_map.segments)


@pytest.mark.parametrize("mutate,exc", [
    (lambda t: t.replace("SEMMAP 1", "SEMMAP 9"), FormatError),
    (lambda t: t.replace("BOUNDS 0.0 0.0 60.0 60.0", "BOUNDS 0.0 0.0"), FormatError),
    (lambda t: t.replace("BOUNDS 0.0 0.0 60.0 60.0",
                         "BOUNDS 0.0 0.0 -1.0 60.0"), ValidationError),
    (lambda t: t.replace("CONCEPTS 3", "CONCEPTS x"), FormatError),
    (lambda t: t.replace("1 Tree 0", "5 Tree 0"), ValidationError),
    (lambda t: t.replace("1 Tree 0", "1 Road 0"), ValidationError),
    (lambda t: t.replace("1 Tree 0", "1 Tree 7"), ValidationError),
    (lambda t: t.replace("SEG 1", "SEG 9"), ValidationError),
    (lambda t: t.replace("SEG 0 4", "SEG 0 2 1.0 1.0"), ValidationError),
    (lambda t: t.replace("SEG 0 4", "BLOB 0 4"), FormatError),
    (lambda t: t + "SEG 0 3 0.0 0.0 70.0 0.0 0.0 5.0\n", ValidationError),
])
def test_map_parse_errors(tiny_map, mutate, exc):
    with pytest.raises(exc):
        parse_map(mutate(format_map(tiny_map)))


def test_map_parse_error_carries_line_number():
    bad = "SEMMAP 1\nBOUNDS 0.0 0.0 10.0 10.0\nCONCEPTS 1\n0 Road 0\nSEG zero\n"
    with pytest.raises(FormatError) as err:
        parse_map(bad)
    assert err.value.line == 5
    assert "line 5" in str(err.value)


def test_concept_label_point_like():
    assert ConceptLabel(0, "Lamp_Post", True).vertical
    assert not ConceptLabel(0, "Road", False).vertical
