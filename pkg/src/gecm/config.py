"""Pipeline configuration.

All tunable constants of both pipelines live in one flat record so that the
effective configuration can be embedded verbatim in every output sidecar.
Values can be loaded from a flat ``key = value`` config file (TOML-style
scalars, ``#`` comments) and overridden per call; the compiled-in defaults
below are the reference values used by the test suite.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

CONFIG_ENV_VAR = "GECM_CONFIG"


@dataclass(frozen=True)
class Config:
    # --- image normalization / target mask ---
    hdr_log: bool = False              # log(1+I) compression before min-max scaling
    clahe_tiles: int = 8               # CLAHE tile grid (tiles x tiles)
    clahe_clip: float = 2.0            # CLAHE clip limit (multiple of the mean bin count)
    center_penalty: float = 5.0        # px of area traded per px of centroid offset
    min_foreground: int = 10           # below this many mask pixels the pose is degenerate

    # --- scatterer detection / clustering (image side) ---
    smooth_sigma: float = 1.5          # [px] Gaussian smoothing before peak detection
    peak_delta: float = 1e-3           # local-maximum tolerance against the 3x3 max filter
    nms_radius: float = 4.0            # [px] minimum pairwise distance between kept points
    dbscan_eps: float = 3.0            # [px] DBSCAN neighborhood radius
    dbscan_min_samples: int = 2        # DBSCAN core threshold (neighborhood includes self)
    noise_keep: int = 3                # high-score DBSCAN noise points retained
    max_scatterers: int = 20           # cap K on the final scatterer set

    # --- ray tracing (mesh side) ---
    max_bounces: int = 3
    roughness_m: float | None = None   # [m] surface roughness; None -> wavelength / 20
    fresnel_power: float = 0.8         # mean Fresnel power response, homogeneous metal
    cosine_floor: float = 0.05         # lower clamp on the per-bounce incidence cosine
    bounce_gain: float = 0.3           # multi-bounce gain per extra bounce
    align_power: float = 8.0           # exponent of the retro-reflection cosine lobe
    rays_per_side: int = 256           # orthographic launch grid density
    launch_margin: float = 0.05        # fractional margin around the mesh footprint
    energy_floor: float = 1e-6         # paths below this energy are pruned

    # --- aggregation / selection (mesh side) ---
    bin_size_px: float = 2.0           # [image-plane px] aggregation bin size
    threshold_db: float = -20.0        # relative dB threshold on binned saliency
    select_nms_radius: float = 4.0     # [image-plane px] NMS radius on bin centroids
    select_top_k: int = 20             # cap K on rendered scatterers

    # --- canvas / rendering ---
    canvas_height: int = 256
    canvas_width: int = 256
    canvas_margin: float = 0.10        # fractional canvas margin kept around the footprint
    log_scale_kappa: float = 100.0     # log-intensity scaling constant

    def replace(self, **overrides: object) -> "Config":
        """Return a copy with the given fields overridden (None values ignored)."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        bad = set(clean) - {f.name for f in dataclasses.fields(self)}
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return dataclasses.replace(self, **clean)  # type: ignore[arg-type]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(name: str, raw: str, target_type: type) -> object:
    raw = raw.strip()
    if raw.startswith(('"', "'")) and raw.endswith(raw[0]) and len(raw) >= 2:
        raw = raw[1:-1]
    if raw.lower() in ("none", "null", ""):
        return None
    if target_type is bool or raw.lower() in ("true", "false"):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if target_type is int:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Load a Config from a flat key = value file.

    With ``path=None`` the file named by ``$GECM_CONFIG`` is used if set,
    otherwise the built-in defaults are returned.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return Config()
    text = Path(path).read_text(encoding="utf-8")
    fields = {f.name: f for f in dataclasses.fields(Config)}
    overrides: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in fields:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        ftype = fields[key].type
        if "bool" in str(ftype):
            target: type = bool
        elif "int" in str(ftype):
            target = int
        else:
            target = float
        overrides[key] = _coerce(key, raw, target)
    return Config().replace(**overrides)


def parse_overrides(pairs: list[str]) -> dict[str, object]:
    """Parse repeated ``--set key=value`` CLI overrides into typed values."""
    fields = {f.name: f for f in dataclasses.fields(Config)}
    out: dict[str, object] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = (part.strip() for part in pair.split("=", 1))
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        ftype = str(fields[key].type)
        target: type = bool if "bool" in ftype else int if "int" in ftype else float
        out[key] = _coerce(key, raw, target)
    return out
