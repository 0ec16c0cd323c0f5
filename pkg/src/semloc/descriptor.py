"""Annular layout descriptors over semantic Gaussian mixtures.

The descriptor summarizes how a concept's probability mass is laid out
around an origin.  Pooling regions are isotropic Gaussians placed on
concentric rings; each region's response is the Hellinger distance between
the concept's mixture and the region's Gaussian.  Per concept the block of
responses is L2-normalized, and a separate presence bit records whether the
concept occurs at all.

For two Gaussians with means m_s, m_p and covariances S_s, S_p the
Bhattacharyya distance is

    d_B = (1/8) (m_s - m_p)^T S^-1 (m_s - m_p)
        + (1/2) ln( det S / sqrt(det S_s * det S_p) ),   S = (S_s + S_p) / 2

and a mixture against a single Gaussian is scored by the weighted sum of
its components' distances.  Hellinger follows as sqrt(1 - exp(-d_B)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .maps import ConceptGmm, GaussianComponent

DEFAULT_RING_RADIUS = 15.0
DEFAULT_POOL_SIGMA = 7.5
DEFAULT_SECTORS = 8

# sector 0 points at +y: grid north for map tiles, and the camera heading
# for queries, whose ground frame also puts forward along +y
NORTH_ORIENTATION = math.pi / 2.0


@dataclass(frozen=True)
class PoolingLayout:
    """Ring radii, per-ring pooling sigmas, and the sector count."""

    n_rings: int
    n_sectors: int
    ring_radii: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        if self.n_rings < 1:
            raise ParameterError("need at least one ring")
        if self.n_sectors < 2:
            raise ParameterError("need at least two sectors")
        if len(self.ring_radii) != self.n_rings or len(self.sigmas) != self.n_rings:
            raise ParameterError("radii and sigmas must have one entry per ring")
        if any(r <= 0 for r in self.ring_radii) or any(s <= 0 for s in self.sigmas):
            raise ParameterError("radii and sigmas must be positive")
        if any(b <= a for a, b in zip(self.ring_radii, self.ring_radii[1:])):
            raise ParameterError("ring radii must be strictly increasing")

    @classmethod
    def default(cls) -> "PoolingLayout":
        return cls(1, DEFAULT_SECTORS, (DEFAULT_RING_RADIUS,), (DEFAULT_POOL_SIGMA,))

    @classmethod
    def make(cls, n_rings: int, n_sectors: int = DEFAULT_SECTORS,
             max_radius: float = DEFAULT_RING_RADIUS) -> "PoolingLayout":
        """Evenly spaced rings out to max_radius, sigma half the radius."""
        radii = tuple(max_radius * (i + 1) / n_rings for i in range(n_rings))
        return cls(n_rings, n_sectors, radii, tuple(r / 2.0 for r in radii))

    @property
    def sector_step(self) -> float:
        return 2.0 * math.pi / self.n_sectors


@dataclass
class LayoutDescriptor:
    """Pooled responses (concepts x rings x sectors) plus presence bits."""

    values: np.ndarray
    presence: np.ndarray
    origin: np.ndarray
    orientation: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3:
            raise ParameterError("values must be (concepts, rings, sectors)")
        self.presence = np.asarray(self.presence, dtype=np.uint8).reshape(-1)
        if len(self.presence) != self.values.shape[0]:
            raise ParameterError("presence length must match concept count")
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)

    @property
    def n_concepts(self) -> int:
        return self.values.shape[0]

    def block_shape(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[2]

    def select_concepts(self, rows) -> "LayoutDescriptor":
        """View of a concept subset; blocks are independent so no re-norm."""
        rows = np.asarray(rows, dtype=int)
        return LayoutDescriptor(self.values[rows], self.presence[rows],
                                self.origin, self.orientation)


def pooling_gaussian(layout: PoolingLayout, ring: int, sector: int,
                     origin, orientation: float = 0.0) -> GaussianComponent:
    """Isotropic pooling Gaussian for one (ring, sector) cell.

    Sector 0 points along `orientation`; sectors advance counter-clockwise
    in equal steps.
    """
    if not 0 <= ring < layout.n_rings:
        raise ParameterError(f"ring {ring} outside 0..{layout.n_rings - 1}")
    if not 0 <= sector < layout.n_sectors:
        raise ParameterError(f"sector {sector} outside 0..{layout.n_sectors - 1}")
    angle = orientation + layout.sector_step * sector
    radius = layout.ring_radii[ring]
    origin = np.asarray(origin, dtype=float).reshape(2)
    mean = origin + radius * np.array([math.cos(angle), math.sin(angle)])
    return GaussianComponent(mean, layout.sigmas[ring] ** 2 * np.eye(2))


def _check_spd_2x2(cov: np.ndarray, what: str) -> float:
    det = float(cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0])
    if det <= 0.0 or cov[0, 0] <= 0.0:
        raise ValueError(f"{what} covariance is not positive definite")
    return det


def bhattacharyya_gauss(gs: GaussianComponent, gp: GaussianComponent) -> float:
    """Bhattacharyya distance between two 2D Gaussians."""
    det_s = _check_spd_2x2(gs.cov, "first")
    det_p = _check_spd_2x2(gp.cov, "second")
    avg = 0.5 * (gs.cov + gp.cov)
    det_avg = _check_spd_2x2(avg, "averaged")
    dx, dy = gs.mean - gp.mean
    maha = (avg[1, 1] * dx * dx - 2.0 * avg[0, 1] * dx * dy + avg[0, 0] * dy * dy) / det_avg
    return 0.125 * maha + 0.5 * math.log(det_avg / math.sqrt(det_s * det_p))


def bhattacharyya_gmm(gmm: ConceptGmm, gp: GaussianComponent) -> float:
    """Mixture-to-Gaussian distance: weights times component distances."""
    if gmm.empty:
        raise ValueError("empty mixture has no distance; caller zeroes the block")
    return float(sum(w * bhattacharyya_gauss(c, gp)
                     for w, c in zip(gmm.weights, gmm.components)))


def hellinger(d_b: float) -> float:
    """Hellinger distance from a Bhattacharyya distance."""
    if d_b < 0.0:
        raise ValueError(f"Bhattacharyya distance must be nonnegative, got {d_b}")
    # -expm1(-d) = 1 - exp(-d) without cancellation near zero
    return math.sqrt(-math.expm1(-d_b))


def presence_vector(gmms: list[ConceptGmm]) -> np.ndarray:
    return np.array([0 if g.empty else 1 for g in gmms], dtype=np.uint8)


def _pool_means(layout: PoolingLayout, ring: int, origin: np.ndarray,
                orientation: float) -> np.ndarray:
    angles = orientation + layout.sector_step * np.arange(layout.n_sectors)
    return origin + layout.ring_radii[ring] * np.column_stack([np.cos(angles), np.sin(angles)])


def _block_row(gmm: ConceptGmm, layout: PoolingLayout, ring: int,
               origin: np.ndarray, orientation: float) -> np.ndarray:
    """All sector responses of one (concept, ring), vectorized over components."""
    means = np.stack([c.mean for c in gmm.components])          # (n, 2)
    covs = np.stack([c.cov for c in gmm.components])            # (n, 2, 2)
    sigma2 = layout.sigmas[ring] ** 2
    avg = 0.5 * (covs + sigma2 * np.eye(2))
    det_s = covs[:, 0, 0] * covs[:, 1, 1] - covs[:, 0, 1] * covs[:, 1, 0]
    det_avg = avg[:, 0, 0] * avg[:, 1, 1] - avg[:, 0, 1] * avg[:, 1, 0]
    if np.any(det_s <= 0) or np.any(covs[:, 0, 0] <= 0) or np.any(det_avg <= 0):
        raise ValueError("component covariance is not positive definite")
    log_term = 0.5 * (np.log(det_avg) - 0.5 * (np.log(det_s) + 2.0 * math.log(sigma2)))
    diff = means[:, None, :] - _pool_means(layout, ring, origin, orientation)[None, :, :]
    dx, dy = diff[..., 0], diff[..., 1]
    maha = (avg[:, None, 1, 1] * dx * dx
            - 2.0 * avg[:, None, 0, 1] * dx * dy
            + avg[:, None, 0, 0] * dy * dy) / det_avg[:, None]
    d_b = gmm.weights @ (0.125 * maha + log_term[:, None])      # (sectors,)
    if np.any(d_b < 0):
        raise ValueError("negative mixture Bhattacharyya distance")
    return np.sqrt(-np.expm1(-d_b))


def extract_descriptor(gmms: list[ConceptGmm], layout: PoolingLayout, origin,
                       orientation: float = 0.0) -> LayoutDescriptor:
    """Descriptor of per-concept mixtures around an origin.

    Absent concepts yield zero blocks and presence 0; present blocks are
    L2-normalized over their (ring, sector) cells jointly.
    """
    origin = np.asarray(origin, dtype=float).reshape(2)
    values = np.zeros((len(gmms), layout.n_rings, layout.n_sectors))
    for c, gmm in enumerate(gmms):
        if gmm.empty:
            continue
        for r in range(layout.n_rings):
            values[c, r] = _block_row(gmm, layout, r, origin, orientation)
        norm = float(np.linalg.norm(values[c]))
        if norm > 0.0:
            values[c] /= norm
    return LayoutDescriptor(values, presence_vector(gmms), origin, orientation)


def descriptor_dump_lines(tile_id: int, desc: LayoutDescriptor) -> list[str]:
    """Debug dump: one DESC line per cell plus a PRES bitstring line."""
    from ._util import fmt
    lines = []
    c_n, r_n, s_n = desc.values.shape
    for c in range(c_n):
        for r in range(r_n):
            for s in range(s_n):
                lines.append(f"DESC {tile_id} {c} {r} {s} {fmt(desc.values[c, r, s])}")
    bits = "".join(str(int(b)) for b in desc.presence)
    lines.append(f"PRES {tile_id} {bits}")
    return lines
