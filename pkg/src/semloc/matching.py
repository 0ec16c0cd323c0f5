"""Rotation-searched descriptor matching and tile ranking.

Rotating a scene by k sectors circularly shifts every descriptor block by
k, so heading-unknown matching scans all discrete shifts.  The query's
limited field of view is handled asymmetrically: a per-sector 0/1 mask in
the query frame decides which cells count, and the reference is the one
that gets shifted,

    d^2(k) = sum_c sum_r sum_s m[r, s] * (q[c, r, s] - ref[c, r, (s+k) mod S])^2.

Expanding the square turns the scan into circular correlations,

    d^2(k) = sum m q^2 - 2 corr(m*q, ref)(k) + corr(m, ref^2)(k),

which the FFT path evaluates for all k at once; it is required to agree
with the direct scan to floating-point noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptor import LayoutDescriptor, PoolingLayout
from .errors import LayoutMismatchError, ParameterError

HEAT_EPS = 1e-12


@dataclass
class FovMask:
    """Per-(ring, sector) weights in {0, 1}, defined in the query frame."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise ParameterError("mask must be (rings, sectors)")
        if not np.all((self.weights == 0.0) | (self.weights == 1.0)):
            raise ParameterError("mask weights must be 0 or 1")
        if not np.any(self.weights):
            raise ParameterError("mask must enable at least one sector")

    @classmethod
    def full(cls, layout: PoolingLayout) -> "FovMask":
        return cls(np.ones((layout.n_rings, layout.n_sectors)))

    @classmethod
    def for_camera(cls, layout: PoolingLayout, half_angle: float) -> "FovMask":
        """Enable sectors whose center lies within the field of view,
        widened by half a sector step so partially seen cells still count."""
        step = layout.sector_step
        angles = step * np.arange(layout.n_sectors)
        rel = (angles + math.pi) % (2.0 * math.pi) - math.pi
        enabled = np.abs(rel) <= half_angle + step / 2.0 + 1e-12
        return cls(np.tile(enabled.astype(float), (layout.n_rings, 1)))

    @property
    def n_enabled(self) -> int:
        return int(self.weights[0].sum())


@dataclass
class CombinedScoreParams:
    """Weight of the presence term and whether it ignores unseen concepts."""

    lambda_: float = 1.0
    asymmetric: bool = True

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ParameterError("presence weight must be nonnegative")


@dataclass
class MatchResult:
    tile_id: int
    distance: float
    best_shift: int
    rank: int = 0


def _check_compatible(a: LayoutDescriptor, b: LayoutDescriptor) -> None:
    if a.values.shape != b.values.shape:
        raise LayoutMismatchError(
            f"descriptor shapes differ: {a.values.shape} vs {b.values.shape}")


def rotate_descriptor(desc: LayoutDescriptor, k: int) -> LayoutDescriptor:
    """Descriptor of the same scene rotated by k sector steps CCW."""
    return LayoutDescriptor(np.roll(desc.values, k, axis=-1), desc.presence.copy(),
                            desc.origin, desc.orientation)


def asymmetric_l2(query: LayoutDescriptor, ref: LayoutDescriptor,
                  mask: FovMask, shift: int) -> float:
    """Masked L2 distance at one reference shift."""
    _check_compatible(query, ref)
    diff = query.values - np.roll(ref.values, -shift, axis=-1)
    return math.sqrt(float(np.sum(mask.weights * diff * diff)))


def min_rotation_distance(query: LayoutDescriptor, ref: LayoutDescriptor,
                          mask: FovMask) -> tuple[float, int]:
    """Direct scan over all shifts; ties go to the smallest shift."""
    _check_compatible(query, ref)
    best_d, best_k = math.inf, 0
    for k in range(query.values.shape[-1]):
        d = asymmetric_l2(query, ref, mask, k)
        if d < best_d:
            best_d, best_k = d, k
    return best_d, best_k


def _profile_many(query_values: np.ndarray, ref_values: np.ndarray,
                  mask_weights: np.ndarray) -> np.ndarray:
    """Squared distances for all shifts of many references, via rfft.

    query_values (C, R, S), ref_values (N, C, R, S) -> (N, S).
    """
    s = query_values.shape[-1]
    mq = mask_weights[None, :, :] * query_values
    const = float(np.sum(mq * query_values))
    f_mq = np.fft.rfft(mq, axis=-1)                    # (C, R, F)
    f_m = np.fft.rfft(mask_weights, axis=-1)           # (R, F)
    f_ref = np.fft.rfft(ref_values, axis=-1)           # (N, C, R, F)
    f_ref2 = np.fft.rfft(ref_values * ref_values, axis=-1)
    # corr(a, b)(k) = sum_s a[s] b[s+k] = irfft(conj(F_a) * F_b)
    cross = np.einsum("crf,ncrf->nf", np.conj(f_mq), f_ref)
    sqr = np.einsum("rf,ncrf->nf", np.conj(f_m), f_ref2)
    d2 = const - 2.0 * np.fft.irfft(cross, n=s, axis=-1) + np.fft.irfft(sqr, n=s, axis=-1)
    return np.maximum(d2, 0.0)


def min_rotation_distance_fft(query: LayoutDescriptor, ref: LayoutDescriptor,
                              mask: FovMask) -> tuple[float, int]:
    """FFT evaluation of the full shift profile; same result as the scan."""
    _check_compatible(query, ref)
    d2 = _profile_many(query.values, ref.values[None], mask.weights)[0]
    k = int(np.argmin(d2))  # argmin takes the first minimum: smallest shift
    return math.sqrt(float(d2[k])), k


def presence_mismatch(query_presence: np.ndarray, ref_presence: np.ndarray,
                      asymmetric: bool = True) -> float:
    """Fraction of concepts with a presence disagreement.

    Asymmetric counts only concepts the query saw; the query cannot see
    everything a tile holds, so extra reference concepts are not penalized.
    """
    q = np.asarray(query_presence, dtype=np.uint8)
    r = np.asarray(ref_presence, dtype=np.uint8)
    if q.shape != r.shape:
        raise LayoutMismatchError("presence vectors differ in length")
    if len(q) == 0:
        return 0.0
    if asymmetric:
        mismatches = int(np.sum((q == 1) & (r == 0)))
    else:
        mismatches = int(np.sum(q != r))
    return mismatches / len(q)


def combined_distance(ssl_distance: float, query_presence, ref_presence,
                      params: CombinedScoreParams) -> float:
    return ssl_distance + params.lambda_ * presence_mismatch(
        query_presence, ref_presence, params.asymmetric)


def rank_tiles(query: LayoutDescriptor, refs: list[tuple[int, LayoutDescriptor]],
               mask: FovMask, params: CombinedScoreParams | None = None,
               ) -> tuple[list[MatchResult], dict[int, float]]:
    """Rank reference tiles by combined distance, ascending.

    Ties break on the smaller tile id.  Also returns the heat value
    -log(distance + eps) per tile for map rendering.
    """
    if params is None:
        params = CombinedScoreParams()
    if not refs:
        raise ParameterError("cannot rank an empty reference set")
    for _, d in refs:
        _check_compatible(query, d)
    ids = np.array([t for t, _ in refs])
    values = np.stack([d.values for _, d in refs])
    pres = np.stack([d.presence for _, d in refs])
    d2 = _profile_many(query.values, values, mask.weights)      # (N, S)
    shifts = np.argmin(d2, axis=1)
    ssl = np.sqrt(d2[np.arange(len(refs)), shifts])
    if params.lambda_ > 0.0 and len(query.presence) > 0:
        q = query.presence.astype(np.uint8)
        if params.asymmetric:
            mism = np.sum((q[None, :] == 1) & (pres == 0), axis=1)
        else:
            mism = np.sum(q[None, :] != pres, axis=1)
        total = ssl + params.lambda_ * mism / len(q)
    else:
        total = ssl
    order = np.lexsort((ids, total))
    results = [MatchResult(int(ids[i]), float(total[i]), int(shifts[i]), rank + 1)
               for rank, i in enumerate(order)]
    heat = {r.tile_id: -math.log(r.distance + HEAT_EPS) for r in results}
    return results, heat


def rank_cdf(ranks, n_tiles: int) -> np.ndarray:
    """Recall against normalized shortlist size.

    Returns (n_tiles + 1, 2) rows of (fraction, recall): recall(i / N) is
    the share of queries whose ground truth sits within the top i.
    """
    ranks = np.asarray(list(ranks), dtype=int)
    if n_tiles < 1:
        raise ParameterError("need at least one tile")
    if len(ranks) == 0:
        raise ParameterError("need at least one query rank")
    if ranks.min() < 1 or ranks.max() > n_tiles:
        raise ParameterError("ranks must lie in 1..n_tiles")
    counts = np.bincount(ranks, minlength=n_tiles + 1)
    recall = np.cumsum(counts) / len(ranks)
    fractions = np.arange(n_tiles + 1) / n_tiles
    return np.column_stack([fractions, recall])


def recall_auc(curve: np.ndarray) -> float:
    """Area under a rank_cdf curve (rectangle rule over the rank steps)."""
    return float(np.mean(curve[1:, 1]))


def recall_at(curve: np.ndarray, fraction: float) -> float:
    """Recall at a shortlist of max(1, floor(fraction * N)) tiles."""
    n = len(curve) - 1
    k = max(1, int(math.floor(fraction * n + 1e-9)))
    return float(curve[min(k, n), 1])
