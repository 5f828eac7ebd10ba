"""Shared domain types: imaging parameters, pose skeletons, scatterer sets,
the conditioning-map record, and the fixed drawing palette.

Everything here is immutable after construction and safe to share across
threads. Angles are degrees at this interface; trigonometry happens in
radians inside the geometry code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping

from .errors import OutOfRangeError, UnknownPolarizationError

# Defaults applied when optional metadata is absent from a dataset record.
DEFAULT_DEPRESSION_DEG = 45.0
DEFAULT_WAVELENGTH_M = 0.03          # X-band
DEFAULT_RESOLUTION_M_PER_PX = 0.3
DEFAULT_POLARIZATION = "HH"


class Polarization(str, enum.Enum):
    HH = "HH"
    HV = "HV"
    VH = "VH"
    VV = "VV"


class Provenance(str, enum.Enum):
    DERIVED_FROM_IMAGE = "derived_from_image"
    RENDERED_FROM_MESH = "rendered_from_mesh"


@dataclass(frozen=True)
class ImagingParams:
    """Radar viewpoint and sensor parameters driving both pipelines.

    Azimuth follows the dataset convention: 0 degrees points West in image
    coordinates and increases clockwise.
    """

    azimuth_deg: float
    depression_deg: float = DEFAULT_DEPRESSION_DEG
    wavelength_m: float = DEFAULT_WAVELENGTH_M
    polarization: Polarization = Polarization.HH
    resolution_m_per_px: float = DEFAULT_RESOLUTION_M_PER_PX
    band_label: str | None = None
    class_label: str | None = None

    def to_dict(self) -> dict:
        return {
            "azimuth_deg": self.azimuth_deg,
            "depression_deg": self.depression_deg,
            "wavelength_m": self.wavelength_m,
            "polarization": self.polarization.value,
            "resolution_m_per_px": self.resolution_m_per_px,
            "band_label": self.band_label,
            "class_label": self.class_label,
        }


_PARAM_KEYS = (
    "azimuth_deg",
    "depression_deg",
    "wavelength_m",
    "polarization",
    "resolution_m_per_px",
    "band_label",
    "class_label",
)


def _as_float(field: str, value: object) -> float:
    try:
        out = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise OutOfRangeError(field, value, "a finite number") from None
    if not math.isfinite(out):
        raise OutOfRangeError(field, value, "a finite number")
    return out


def validate_params(raw: Mapping[str, object] | ImagingParams) -> ImagingParams:
    """Validate a raw parameter record into an ImagingParams.

    Azimuth is wrapped modulo 360 into [0, 360); the other numeric fields are
    range-checked. Validation is idempotent: feeding the result back returns
    an equal record.
    """
    if isinstance(raw, ImagingParams):
        raw = raw.to_dict()
    unknown = set(raw) - set(_PARAM_KEYS)
    if unknown:
        raise OutOfRangeError(sorted(unknown)[0], raw[sorted(unknown)[0]], "a known parameter field")
    if raw.get("azimuth_deg") is None:
        raise OutOfRangeError("azimuth_deg", None, "required")

    azimuth = math.fmod(_as_float("azimuth_deg", raw["azimuth_deg"]), 360.0)
    if azimuth < 0.0:
        azimuth += 360.0
    if azimuth >= 360.0:  # fmod can return 360.0 - epsilon rounded up
        azimuth -= 360.0

    def field_or_default(key: str, default: float) -> float:
        value = raw.get(key)
        return default if value is None else _as_float(key, value)

    depression = field_or_default("depression_deg", DEFAULT_DEPRESSION_DEG)
    if not 0.0 < depression <= 90.0:
        raise OutOfRangeError("depression_deg", depression, "(0, 90]")

    wavelength = field_or_default("wavelength_m", DEFAULT_WAVELENGTH_M)
    if wavelength <= 0.0:
        raise OutOfRangeError("wavelength_m", wavelength, "(0, inf)")

    resolution = field_or_default("resolution_m_per_px", DEFAULT_RESOLUTION_M_PER_PX)
    if resolution <= 0.0:
        raise OutOfRangeError("resolution_m_per_px", resolution, "(0, inf)")

    pol_raw = raw.get("polarization")
    if pol_raw is None:
        pol_raw = DEFAULT_POLARIZATION
    if isinstance(pol_raw, Polarization):
        pol = pol_raw
    else:
        try:
            pol = Polarization(str(pol_raw).strip().upper())
        except ValueError:
            raise UnknownPolarizationError(pol_raw) from None

    band = raw.get("band_label")
    cls = raw.get("class_label")
    return ImagingParams(
        azimuth_deg=azimuth,
        depression_deg=depression,
        wavelength_m=wavelength,
        polarization=pol,
        resolution_m_per_px=resolution,
        band_label=str(band) if band not in (None, "") else None,
        class_label=str(cls) if cls not in (None, "") else None,
    )


def format_text_condition(params: ImagingParams) -> str:
    """Render imaging metadata as the deterministic text condition string.

    Angles use one decimal place, resolution three; optional fields simply
    omit their clause. Distinct (azimuth, depression, polarization, class)
    tuples map to distinct strings at this precision.
    """
    clauses = []
    if params.class_label is not None:
        clauses.append(f"class={params.class_label}")
    clauses.append(f"azimuth={params.azimuth_deg:.1f}deg")
    clauses.append(f"depression={params.depression_deg:.1f}deg")
    clauses.append(f"polarization={params.polarization.value}")
    if params.band_label is not None:
        clauses.append(f"band={params.band_label}")
    clauses.append(f"resolution={params.resolution_m_per_px:.3f}m")
    return "; ".join(clauses)


Point2 = tuple[float, float]
Point3 = tuple[float, float, float]


def _check_finite2(name: str, p: Point2) -> Point2:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise OutOfRangeError(name, p, "finite coordinates")
    return (x, y)


@dataclass(frozen=True)
class PoseSkeleton2D:
    """Five named keypoints in continuous image-plane pixel coordinates."""

    nose: Point2
    tail: Point2
    wing_root: Point2
    left_tip: Point2
    right_tip: Point2

    def __post_init__(self):
        for name in ("nose", "tail", "wing_root", "left_tip", "right_tip"):
            object.__setattr__(self, name, _check_finite2(name, getattr(self, name)))

    def points(self) -> dict[str, Point2]:
        return {
            "nose": self.nose,
            "tail": self.tail,
            "wing_root": self.wing_root,
            "left_tip": self.left_tip,
            "right_tip": self.right_tip,
        }

    def clipped(self, width: int, height: int) -> "PoseSkeleton2D":
        """Clamp every keypoint into [0, width-1] x [0, height-1]."""

        def clamp(p: Point2) -> Point2:
            return (min(max(p[0], 0.0), width - 1.0), min(max(p[1], 0.0), height - 1.0))

        return PoseSkeleton2D(*(clamp(p) for p in self.points().values()))


@dataclass(frozen=True)
class PoseSkeleton3D:
    """The same five keypoints in meters, radar frame."""

    nose: Point3
    tail: Point3
    wing_root: Point3
    left_tip: Point3
    right_tip: Point3

    def __post_init__(self):
        for name in ("nose", "tail", "wing_root", "left_tip", "right_tip"):
            p = getattr(self, name)
            q = (float(p[0]), float(p[1]), float(p[2]))
            if not all(math.isfinite(c) for c in q):
                raise OutOfRangeError(name, p, "finite coordinates")
            object.__setattr__(self, name, q)
        if self.nose == self.tail:
            raise OutOfRangeError("nose", self.nose, "distinct from tail")

    def points(self) -> dict[str, Point3]:
        return {
            "nose": self.nose,
            "tail": self.tail,
            "wing_root": self.wing_root,
            "left_tip": self.left_tip,
            "right_tip": self.right_tip,
        }


@dataclass(frozen=True)
class Scatterer:
    x: float
    y: float
    intensity: float


@dataclass(frozen=True)
class ScattererSet:
    """Up to K strong scattering centers with normalized intensities in [0, 1]."""

    scatterers: tuple[Scatterer, ...] = ()

    def __post_init__(self):
        for s in self.scatterers:
            if not (math.isfinite(s.x) and math.isfinite(s.y)):
                raise OutOfRangeError("scatterer", (s.x, s.y), "finite coordinates")
            if not 0.0 <= s.intensity <= 1.0:
                raise OutOfRangeError("intensity", s.intensity, "[0, 1]")

    def __len__(self) -> int:
        return len(self.scatterers)

    def __iter__(self):
        return iter(self.scatterers)


@dataclass(frozen=True)
class Gecm:
    """A conditioning map: pose skeleton plus scatterer set on a canvas.

    Rendering the same record twice yields byte-identical rasters.
    """

    skeleton: PoseSkeleton2D
    scatterers: ScattererSet
    canvas_height: int
    canvas_width: int
    provenance: Provenance

    def __post_init__(self):
        if self.canvas_height <= 0 or self.canvas_width <= 0:
            raise OutOfRangeError("canvas", (self.canvas_height, self.canvas_width), "positive dims")


RGB = tuple[int, int, int]


@dataclass(frozen=True)
class Palette:
    """Fixed color semantics shared by the derivation and rendering paths.

    Scatterers draw as grayscale discs: white scaled by their rendered
    intensity. Line widths and radii are in pixels.
    """

    fuselage: RGB = (0, 255, 255)      # cyan
    left_wing: RGB = (0, 255, 0)       # green
    right_wing: RGB = (255, 105, 180)  # pink
    nose: RGB = (255, 0, 0)            # red
    tail: RGB = (0, 0, 255)            # blue
    wing_root: RGB = (255, 255, 0)     # yellow connector marker
    line_width: int = 2
    marker_radius: int = 3
    scatterer_radius: int = 2

    def scatterer_gray(self, intensity: float) -> RGB:
        v = int(round(255.0 * min(max(intensity, 0.0), 1.0)))
        return (v, v, v)


# The one palette instance both pipelines must reference.
PALETTE = Palette()
