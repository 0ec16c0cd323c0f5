import math

import numpy as np
import pytest

from semloc import (CombinedScoreParams, FovMask, LayoutDescriptor,
                    LayoutMismatchError, PoolingLayout, asymmetric_l2,
                    combined_distance, min_rotation_distance,
                    min_rotation_distance_fft, presence_mismatch, rank_cdf,
                    rank_tiles, recall_at, recall_auc)
from semloc.errors import ParameterError
from semloc.matching import rotate_descriptor

from _oracles import shift_profile

L8 = PoolingLayout.default()
FULL = FovMask.full(L8)


def ld(values, presence=None):
    values = np.asarray(values, dtype=float)
    if presence is None:
        presence = np.ones(values.shape[0], dtype=np.uint8)
    return LayoutDescriptor(values, presence, np.zeros(2), 0.0)


def unit_sector(sector, n_concepts=1):
    v = np.zeros((n_concepts, 1, 8))
    v[:, 0, sector] = 1.0
    return ld(v)


def test_mask_validation():
    with pytest.raises(ParameterError):
        FovMask(np.zeros((1, 8)))                  # nothing enabled
    with pytest.raises(ParameterError):
        FovMask(np.full((1, 8), 0.5))              # not binary
    with pytest.raises(ParameterError):
        FovMask(np.ones(8))                        # wrong rank
    assert FULL.n_enabled == 8


@pytest.mark.parametrize("half_deg,expect", [
    (30.0, {0, 1, 7}),
    (22.5, {0, 1, 7}),                 # boundary sector still counts
    (75.4, {0, 1, 2, 6, 7}),
    (180.0, set(range(8))),
])
def test_mask_for_camera_sectors(half_deg, expect):
    mask = FovMask.for_camera(L8, math.radians(half_deg))
    assert set(np.flatnonzero(mask.weights[0])) == expect


def test_rotate_descriptor_is_ccw_roll():
    desc = ld(np.arange(8.0).reshape(1, 1, 8))
    rot = rotate_descriptor(desc, 2)
    np.testing.assert_allclose(rot.values[0, 0], np.roll(desc.values[0, 0], 2))
    assert rot.values[0, 0, 2] == desc.values[0, 0, 0]


def test_distance_hand_case():
    q, r = unit_sector(0), unit_sector(3)
    assert asymmetric_l2(q, r, FULL, 3) == pytest.approx(0.0)
    assert asymmetric_l2(q, r, FULL, 0) == pytest.approx(math.sqrt(2.0))
    d, k = min_rotation_distance(q, r, FULL)
    assert (d, k) == (pytest.approx(0.0), 3)


def test_distance_tie_breaks_to_smallest_shift():
    q = ld(np.full((1, 1, 8), 0.25))
    r = ld(np.full((1, 1, 8), 0.5))
    d, k = min_rotation_distance(q, r, FULL)
    assert k == 0 and d == pytest.approx(math.sqrt(8 * 0.25 ** 2))


def test_masked_distance_ignores_disabled_sectors():
    q, r = unit_sector(0), unit_sector(3)
    narrow = FovMask(np.eye(1, 8))          # only sector 0 enabled
    assert asymmetric_l2(q, r, narrow, 3) == pytest.approx(0.0)
    assert asymmetric_l2(q, r, narrow, 1) == pytest.approx(1.0)


def test_unseen_reference_concept_still_costs_under_mask():
    # the mask selects sectors, never concepts: content the reference has
    # in an enabled sector but the query lacks is charged in full
    qv = np.zeros((2, 1, 8))
    qv[0, 0, 0] = 1.0
    rv = np.zeros((2, 1, 8))
    rv[0, 0, 0] = 1.0
    rv[1, 0, 0] = 1.0
    d, k = min_rotation_distance(ld(qv), ld(rv), FULL)
    assert k == 0 and d == pytest.approx(1.0)


def test_fft_profile_matches_loop_oracle(rng):
    for layout, rings in [(L8, 1), (PoolingLayout.make(2, 6, 15.0), 2)]:
        sectors = layout.n_sectors
        for _ in range(60):
            q = rng.normal(size=(3, rings, sectors))
            r = rng.normal(size=(3, rings, sectors))
            m = (rng.random((rings, sectors)) < 0.7).astype(float)
            if not m.any():
                m[0, 0] = 1.0
            qd, rd = ld(q), ld(r)
            mask = FovMask(m)
            oracle = shift_profile(q, r, m)
            scan = [asymmetric_l2(qd, rd, mask, k) for k in range(sectors)]
            np.testing.assert_allclose(scan, oracle, atol=1e-9)
            d_fft, k_fft = min_rotation_distance_fft(qd, rd, mask)
            d_scan, k_scan = min_rotation_distance(qd, rd, mask)
            assert d_fft == pytest.approx(d_scan, abs=1e-9)
            assert d_fft == pytest.approx(min(oracle), abs=1e-9)
            assert k_fft == k_scan


def test_presence_mismatch_asymmetry():
    q = np.array([1, 0, 1], dtype=np.uint8)
    r = np.array([1, 1, 0], dtype=np.uint8)
    assert presence_mismatch(q, r, asymmetric=True) == pytest.approx(1.0 / 3.0)
    assert presence_mismatch(q, r, asymmetric=False) == pytest.approx(2.0 / 3.0)
    # a reference richer than the query costs nothing asymmetrically
    assert presence_mismatch(np.array([1, 0]), np.array([1, 1]), True) == 0.0


def test_combined_distance_lambda():
    q = np.array([1, 1], dtype=np.uint8)
    r = np.array([1, 0], dtype=np.uint8)
    params = CombinedScoreParams(lambda_=2.0, asymmetric=True)
    assert combined_distance(0.3, q, r, params) == pytest.approx(0.3 + 2.0 * 0.5)
    with pytest.raises(ParameterError):
        CombinedScoreParams(lambda_=-1.0)


def test_rank_tiles_orders_and_breaks_ties_by_id(rng):
    query = unit_sector(0)
    refs = [(4, unit_sector(1)), (2, unit_sector(0)),
            (9, unit_sector(0)), (7, ld(rng.normal(size=(1, 1, 8)) + 4.0))]
    results, heat = rank_tiles(query, refs, FULL)
    # the rotation search makes tile 4 a perfect match too (shift 1), so
    # three exact ties resolve by ascending tile id
    assert [r.tile_id for r in results] == [2, 4, 9, 7]
    assert [r.rank for r in results] == [1, 2, 3, 4]
    assert results[0].distance == pytest.approx(0.0, abs=1e-9)
    assert results[1].best_shift == 1
    assert set(heat) == {2, 4, 9, 7}
    assert heat[2] == max(heat.values())
    assert heat[2] == pytest.approx(-math.log(results[0].distance + 1e-12))


def test_rank_tiles_matches_single_pair_scan(rng):
    layout = PoolingLayout.make(2, 8, 15.0)
    mask = FovMask((rng.random((2, 8)) < 0.8).astype(float))
    query = ld(rng.normal(size=(3, 2, 8)), rng.integers(0, 2, 3))
    refs = [(i, ld(rng.normal(size=(3, 2, 8)), rng.integers(0, 2, 3)))
            for i in range(20)]
    params = CombinedScoreParams(lambda_=0.7, asymmetric=True)
    results, _ = rank_tiles(query, refs, mask, params)
    for res in results:
        ref = dict(refs)[res.tile_id]
        d, k = min_rotation_distance(query, ref, mask)
        expected = combined_distance(d, query.presence, ref.presence, params)
        assert res.distance == pytest.approx(expected, abs=1e-9)
        assert res.best_shift == k


def test_rank_tiles_input_errors():
    with pytest.raises(ParameterError):
        rank_tiles(unit_sector(0), [], FULL)
    with pytest.raises(LayoutMismatchError):
        rank_tiles(unit_sector(0), [(0, ld(np.zeros((1, 2, 8))))], FULL)


def test_rank_cdf_and_recall():
    curve = rank_cdf([1, 1, 2, 4], 4)
    assert curve.shape == (5, 2)
    np.testing.assert_allclose(curve[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(curve[:, 1], [0.0, 0.5, 0.75, 0.75, 1.0])
    assert recall_auc(curve) == pytest.approx(0.75)
    assert recall_at(curve, 0.25) == pytest.approx(0.5)
    assert recall_at(curve, 0.01) == pytest.approx(0.5)    # floor is one tile
    assert recall_at(curve, 1.0) == pytest.approx(1.0)
    assert curve[-1, 1] == 1.0
    with pytest.raises(ParameterError):
        rank_cdf([0], 4)
    with pytest.raises(ParameterError):
        rank_cdf([5], 4)
    with pytest.raises(ParameterError):
        rank_cdf([], 4)
