"""Run configuration: defaults, flat key=value files, flag overrides.

Precedence is defaults < config file < command-line flags.  Keys mirror the
flag names with underscores.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .descriptor import DEFAULT_RING_RADIUS, DEFAULT_SECTORS, PoolingLayout
from .errors import ParameterError
from .maps import DEFAULT_TILE_SIDE, DEFAULT_TILE_STRIDE

ORIGIN_MODES = ("CI", "CC")  # content center (tile) vs camera center


@dataclass
class RunConfig:
    tile_side: float = DEFAULT_TILE_SIDE
    tile_stride: float = DEFAULT_TILE_STRIDE
    rings: int = 1
    sectors: int = DEFAULT_SECTORS
    ring_radii: tuple[float, ...] | None = None   # None: derived from rings
    ring_sigmas: tuple[float, ...] | None = None
    origin_mode: str = "CC"
    concepts: tuple[str, ...] | None = None       # None: all map concepts
    lambda_presence: float = 1.0
    presence_asymmetric: bool = True
    include_empty: bool = True
    tree: bool = False
    tree_branching: int = 3
    tree_samples: int = 5
    tree_leaf_capacity: int = 8
    tree_spill: int = 1
    top_k: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.origin_mode not in ORIGIN_MODES:
            raise ParameterError(f"origin_mode must be one of {ORIGIN_MODES}")
        if self.tile_side <= 0 or self.tile_stride <= 0:
            raise ParameterError("tile side and stride must be positive")
        if self.lambda_presence < 0:
            raise ParameterError("lambda_presence must be nonnegative")

    def pooling_layout(self) -> PoolingLayout:
        if self.ring_radii is not None:
            if self.ring_sigmas is None:
                sigmas = tuple(r / 2.0 for r in self.ring_radii)
            else:
                sigmas = self.ring_sigmas
            return PoolingLayout(len(self.ring_radii), self.sectors,
                                 tuple(self.ring_radii), sigmas)
        layout = PoolingLayout.make(self.rings, self.sectors, DEFAULT_RING_RADIUS)
        if self.ring_sigmas is not None:
            layout = PoolingLayout(layout.n_rings, layout.n_sectors,
                                   layout.ring_radii, tuple(self.ring_sigmas))
        return layout


_BOOL_KEYS = {"presence_asymmetric", "include_empty", "tree"}
_INT_KEYS = {"rings", "sectors", "tree_branching", "tree_samples",
             "tree_leaf_capacity", "tree_spill", "top_k", "seed"}
_FLOAT_KEYS = {"tile_side", "tile_stride", "lambda_presence"}
_TUPLE_FLOAT_KEYS = {"ring_radii", "ring_sigmas"}
_TUPLE_STR_KEYS = {"concepts"}
_STR_KEYS = {"origin_mode"}


def _coerce(key: str, raw: str):
    if key in _BOOL_KEYS:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ParameterError(f"{key}: expected a boolean, got '{raw}'")
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _TUPLE_FLOAT_KEYS:
        return tuple(float(p) for p in raw.split(",") if p.strip())
    if key in _TUPLE_STR_KEYS:
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    if key in _STR_KEYS:
        return raw.strip()
    raise ParameterError(f"unknown config key '{key}'")


def read_config_updates(path: str) -> dict:
    """Read key=value lines into a dict of coerced, explicitly set keys."""
    updates = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            key = key.strip()
            try:
                updates[key] = _coerce(key, value.strip())
            except ValueError:
                raise ParameterError(f"{path}:{lineno}: bad value for '{key}'") from None
    return updates


def parse_config_file(path: str, base: RunConfig | None = None) -> RunConfig:
    """Apply key=value lines from a file on top of a base config."""
    cfg = base if base is not None else RunConfig()
    return replace(cfg, **read_config_updates(path))


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply non-None override values (e.g. parsed CLI flags); flags win."""
    valid = {f.name for f in fields(RunConfig)}
    updates = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(updates) - valid
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    return replace(cfg, **updates)
