"""Numeric configuration for the whole place-and-route pipeline.

All knobs live in one flat dataclass so that a JSON config file and
``--set key=value`` CLI overrides map 1:1 onto fields.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError


@dataclass
class PnrConfig:
    """Every tunable number in the flow, with fab-plausible defaults.

    Geometry defaults follow single-mode silicon photonics practice: a
    5 um minimum bend radius and a 10 x 10 um crossing cell.  Loss
    coefficients (2 dB/cm propagation, 0.01 dB per 90-degree bend,
    0.15 dB per crossing) are placeholders to be overridden per process.
    """

    # grid / geometry
    pitch: float = 1.0                 # um per routing cell
    r_min: float = 5.0                 # minimum bend radius, um
    wg_width: float = 0.5              # waveguide width, um
    min_spacing: float = 0.5           # edge-to-edge waveguide spacing, um
    crossing_size: float = 10.0        # crossing footprint side, um
    crossing_clearance: float = 5.0    # min distance crossing-to-crossing/bend, um

    # insertion-loss coefficients
    a_prop: float = 2e-4               # dB/um
    a_bend: float = 0.01               # dB per 90-degree bend
    a_cross: float = 0.15              # dB per crossing

    # router cost weights
    w_len: float = 1.0                 # per um of path length
    w_bend: float = 8.0                # per 90-degree bend
    w_cross: float = 30.0              # per crossing
    # per soft-reserved foreign cell swept; swept tubes overlap move to
    # move (roughly tenfold), so the effective per-um surcharge in fully
    # reserved territory is about 10x this value
    w_group: float = 0.02

    # placer
    beta: float = 0.5                  # orientation-penalty weight in the net cost
    eps_wirelength: float = 1e-2       # smoothing epsilon, um^2
    density_mu: float = 1.05           # density weight ramp per iteration
    alpha_min: float = 1e-3            # BB step clamp, low
    alpha_max: float = 1e2             # BB step clamp, high
    max_iterations: int = 1000
    overflow_stop: float = 0.05        # stop when overflow < this fraction of movable area
    target_density: float = 1.0        # bin capacity multiplier
    density_bins: int = 0              # bins per axis; 0 = auto from die size

    # spacing-inflation model
    s1_codir: float = 2.0              # um per extra co-directional port on an edge
    s2_congestion: float = 10.0        # um at congestion 1.0 (crossing footprint side)
    thermal_margin: float = 10.0       # extra um on all edges of thermal components

    # rip-up and reroute
    ripup_rounds: int = 3

    seed: int = 0

    def __post_init__(self):
        positive = [
            "pitch", "r_min", "wg_width", "min_spacing",
            "crossing_size", "crossing_clearance",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.r_min < self.pitch:
            raise ConfigError(f"r_min ({self.r_min}) must be >= pitch ({self.pitch})")
        if self.crossing_clearance > self.crossing_size:
            raise ConfigError(
                "crossing_clearance must be <= crossing_size "
                f"({self.crossing_clearance} > {self.crossing_size})")
        for name in ("w_len", "w_bend", "w_cross", "w_group", "beta",
                     "a_prop", "a_bend", "a_cross"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.eps_wirelength <= 0:
            raise ConfigError("eps_wirelength must be > 0")
        if not (0 < self.alpha_min <= self.alpha_max):
            raise ConfigError("need 0 < alpha_min <= alpha_max")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")

    # -- derived quantities used throughout the router --

    @property
    def half_width(self) -> float:
        return self.wg_width / 2.0

    @property
    def r_min_cells(self) -> int:
        """Bend radius in whole cells (rounded up so radius >= r_min)."""
        import math
        return int(math.ceil(self.r_min / self.pitch - 1e-9))

    @property
    def crossing_halfspan_cells(self) -> int:
        """Cells of straight run required on each side of a crossing."""
        import math
        return int(math.ceil(self.crossing_size / (2.0 * self.pitch) - 1e-9))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PnrConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "PnrConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)

    def with_overrides(self, overrides: dict) -> "PnrConfig":
        data = self.to_dict()
        data.update(overrides)
        return self.from_dict(data)


def parse_override(expr: str) -> tuple[str, object]:
    """Parse one ``key=value`` CLI override, coercing to the field type."""
    if "=" not in expr:
        raise ConfigError(f"override must look like key=value, got {expr!r}")
    key, raw = expr.split("=", 1)
    key = key.strip()
    fields = {f.name: f for f in dataclasses.fields(PnrConfig)}
    if key not in fields:
        raise ConfigError(f"unknown config key {key!r}")
    ftype = fields[key].type
    try:
        if ftype in ("int", int):
            return key, int(raw)
        return key, float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} for {key}: {exc}") from exc
