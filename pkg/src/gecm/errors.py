"""Exception hierarchy for the GECM pipelines.

Every error carries a stable ``code`` string so embedding layers can map
failures without parsing messages.
"""

from __future__ import annotations


class GecmError(Exception):
    """Base class for all pipeline errors."""

    @property
    def code(self) -> str:
        name = type(self).__name__
        return name[:-5] if name.endswith("Error") else name


class OutOfRangeError(GecmError):
    def __init__(self, field: str, value: object, bound: str):
        super().__init__(f"{field}={value!r} outside {bound}")
        self.field = field
        self.value = value
        self.bound = bound


class UnknownPolarizationError(GecmError):
    def __init__(self, token: object):
        super().__init__(f"unknown polarization token {token!r} (expected HH/HV/VH/VV)")
        self.token = token


class EmptyImageError(GecmError):
    pass


class NoForegroundError(GecmError):
    pass


class DegenerateMaskError(GecmError):
    pass


class CollinearMaskError(GecmError):
    pass


class MeshParseError(GecmError):
    def __init__(self, path: object, detail: str, line: int | None = None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {detail}")
        self.path = path
        self.line = line


class EmptyMeshError(GecmError):
    pass


class DegenerateGeometryError(GecmError):
    pass


class ZeroPathLengthError(GecmError):
    pass


class EmptySkeletonError(GecmError):
    pass


class ManifestParseError(GecmError):
    pass


class GridSpecError(GecmError):
    pass


class ConfigError(GecmError):
    pass
