"""
Run configuration.

A RunConfig is read from JSON (``--config file``), checked field by field
and then overridden by explicit command-line flags. Unknown keys are
rejected so a typo never silently falls back to a default.
"""

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Union

from .errors import ConfigurationError
from .forward import (
    ACCURATE_POINTS_PER_WAVELENGTH, POINTS_PER_WAVELENGTH, accurate_grid, interior_wavelength,
)
from .geometry import (
    BUILTIN_MEDIA, Grid, MediumSpec, builtin_medium, geometry_from_dict,
)
from .oracle import SearchWindow, bound_window
from .spectral import DEFAULT_DIP_THRESHOLD, DEFAULT_ORDER_MARGIN, DEFAULT_WEIGHTING, SIDES, WEIGHTINGS
from .utils import load_json

Window = Union[str, List[float]]


@dataclass
class MediumConfig:
    builtin: Optional[str] = "square"
    n: float = 16.0
    geometry: Optional[Dict[str, Any]] = None
    corners: List[List[float]] = field(default_factory=list)

    def validate(self) -> None:
        if self.geometry is None and self.builtin not in BUILTIN_MEDIA:
            raise ConfigurationError(
                f"medium.builtin must be one of {', '.join(BUILTIN_MEDIA)}, got {self.builtin!r}"
            )
        _positive("medium.n", self.n)
        if self.n == 1:
            raise ConfigurationError("medium.n must differ from 1")

    def build(self) -> MediumSpec:
        if self.geometry is not None:
            geometry = geometry_from_dict(self.geometry)
            corners = [tuple(c) for c in self.corners]
            return MediumSpec(geometry=geometry, n=float(self.n), corners=corners,
                              name=self.geometry.get("name", "custom"))
        return builtin_medium(self.builtin, self.n)


@dataclass
class SolverConfig:
    """
    Forward-solver grid and tolerance.

    ``resolution`` None sizes the grid from ``points_per_wavelength`` at the
    top of the k window.
    """

    resolution: Optional[int] = None
    points_per_wavelength: float = ACCURATE_POINTS_PER_WAVELENGTH
    tol: float = 1e-7
    n_jobs: int = 1

    def validate(self) -> None:
        if self.resolution is not None and self.resolution < 32:
            raise ConfigurationError(f"solver.resolution must be >= 32, got {self.resolution}")
        if self.points_per_wavelength < POINTS_PER_WAVELENGTH:
            raise ConfigurationError(
                f"solver.points_per_wavelength must be >= {POINTS_PER_WAVELENGTH}, "
                f"got {self.points_per_wavelength}"
            )
        if not (1e-10 <= self.tol <= 1e-4):
            raise ConfigurationError(f"solver.tol {self.tol} outside [1e-10, 1e-4]")
        if self.n_jobs == 0:
            raise ConfigurationError("solver.n_jobs must be nonzero")


@dataclass
class MeasurementConfig:
    m: int = 64
    n_inc: int = 128
    noise_level: float = 0.0
    noise_seed: int = 0

    def validate(self) -> None:
        if self.m < 3 or self.n_inc < 3:
            raise ConfigurationError("measurement.m and measurement.n_inc must be >= 3")
        if self.noise_level < 0:
            raise ConfigurationError("measurement.noise_level must be non-negative")


@dataclass
class ScanConfig:
    """
    Wavenumber grid and indicator settings.

    ``window`` is "auto" (eigenvalue lower bound, widened by
    ``window_factor``) or an explicit [k_lo, k_hi].
    """

    window: Window = "auto"
    window_factor: float = 4.0
    step: float = 0.01
    order: Optional[int] = None
    margin: int = DEFAULT_ORDER_MARGIN
    radius: Optional[float] = None
    weighting: str = DEFAULT_WEIGHTING
    side: str = "incident"
    cost: str = "l2"
    dip_threshold: float = DEFAULT_DIP_THRESHOLD
    refine: bool = False
    refine_tol: float = 1e-3

    def validate(self) -> None:
        if self.window != "auto":
            if not isinstance(self.window, (list, tuple)) or len(self.window) != 2:
                raise ConfigurationError("scan.window must be 'auto' or [k_lo, k_hi]")
            if not self.window[0] > 0:
                raise ConfigurationError("scan.window k_lo must be positive")
        _positive("scan.step", self.step)
        if self.window_factor <= 1:
            raise ConfigurationError("scan.window_factor must exceed 1")
        if self.weighting not in WEIGHTINGS:
            raise ConfigurationError(f"scan.weighting must be one of {WEIGHTINGS}")
        if self.side not in SIDES:
            raise ConfigurationError("scan.side must be 'incident' or 'observation'")
        if self.cost not in ("l2", "l1"):
            raise ConfigurationError("scan.cost must be 'l2' or 'l1'")
        if not 0 < self.dip_threshold < 1:
            raise ConfigurationError("scan.dip_threshold must lie in (0, 1)")
        if self.radius is not None:
            _positive("scan.radius", self.radius)


@dataclass
class ReconstructConfig:
    search_box: List[float] = field(default_factory=lambda: [-4.0, 4.0, -4.0, 4.0])
    resolution: int = 256
    mode: str = "auto"
    tau_v: float = 0.05
    tau_l: float = 0.95
    cluster_radius: Optional[float] = None
    region: Optional[List[float]] = None
    detection_index: int = 0

    def validate(self) -> None:
        if len(self.search_box) != 4:
            raise ConfigurationError("reconstruct.search_box must be [xmin, xmax, ymin, ymax]")
        if self.mode not in ("auto", "vanishing", "localizing"):
            raise ConfigurationError("reconstruct.mode must be auto, vanishing or localizing")
        if not 0 < self.tau_v < 1 or not 0 < self.tau_l <= 1:
            raise ConfigurationError("reconstruct thresholds must satisfy 0 < tau_v < 1, 0 < tau_l <= 1")
        if self.resolution < 32:
            raise ConfigurationError("reconstruct.resolution must be >= 32")


SECTIONS = {
    "medium": MediumConfig,
    "solver": SolverConfig,
    "measurement": MeasurementConfig,
    "scan": ScanConfig,
    "reconstruct": ReconstructConfig,
}


@dataclass
class RunConfig:
    medium: MediumConfig = field(default_factory=MediumConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    reconstruct: ReconstructConfig = field(default_factory=ReconstructConfig)
    output_dir: str = "app/output"

    def validate(self) -> "RunConfig":
        for name in SECTIONS:
            try:
                getattr(self, name).validate()
            except TypeError as e:
                raise ConfigurationError(f"invalid value in '{name}' section: {e}")
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a JSON object")
        unknown = set(data) - set(SECTIONS) - {"output_dir"}
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        kwargs: Dict[str, Any] = {}
        for name, section_cls in SECTIONS.items():
            kwargs[name] = _section_from_dict(name, section_cls, data.get(name, {}))
        if "output_dir" in data:
            kwargs["output_dir"] = str(data["output_dir"])
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, file_path: str) -> "RunConfig":
        try:
            data = load_json(file_path)
        except (FileNotFoundError, ValueError) as e:
            raise ConfigurationError(str(e))
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """
        Copy with ``{"section.field": value}`` overrides applied.

        ``None`` values mean "flag not given" and are skipped.
        """
        sections = {name: getattr(self, name) for name in SECTIONS}
        output_dir = self.output_dir
        for dotted, value in overrides.items():
            if value is None:
                continue
            if dotted == "output_dir":
                output_dir = str(value)
                continue
            section, _, key = dotted.partition(".")
            if section not in sections or key not in _field_names(SECTIONS[section]):
                raise ConfigurationError(f"unknown configuration key {dotted}")
            sections[section] = replace(sections[section], **{key: value})
        return RunConfig(output_dir=output_dir, **sections).validate()

    def build_medium(self) -> MediumSpec:
        return self.medium.build()

    def search_window(self, medium: MediumSpec) -> SearchWindow:
        if self.scan.window == "auto":
            return bound_window(medium, self.scan.window_factor)
        k_lo, k_hi = (float(v) for v in self.scan.window)
        if k_hi < k_lo:
            raise ConfigurationError("empty k grid")
        if k_hi == k_lo:
            return SearchWindow(k_lo, k_lo + self.scan.step / 2.0)
        return SearchWindow(k_lo, k_hi)

    def k_grid(self, window: SearchWindow) -> List[float]:
        """Uniform grid k_lo, k_lo + h, ... <= k_hi, rounded to 12 decimals."""
        count = int(math.floor((window.k_hi - window.k_lo) / self.scan.step + 1e-9)) + 1
        if count < 1:
            raise ConfigurationError("empty k grid")
        return [round(window.k_lo + i * self.scan.step, 12) for i in range(count)]

    def solver_grid(self, medium: MediumSpec, k_max: float) -> Grid:
        """Accuracy-sized grid around the medium at ``k_max`` unless the resolution is fixed."""
        if self.solver.resolution is None:
            return accurate_grid(medium, k_max, self.solver.points_per_wavelength)
        wavelength = interior_wavelength(k_max, medium.n)
        coarse = Grid.around(medium.geometry, wavelength / 10.0, min_resolution=32)
        half = 0.5 * (coarse.xmax - coarse.xmin)
        center = (0.5 * (coarse.xmin + coarse.xmax), 0.5 * (coarse.ymin + coarse.ymax))
        return Grid.square(half, self.solver.resolution, center)

    def prior_radius(self, medium: Optional[MediumSpec] = None) -> float:
        """R of the disk B(0, R) assumed to contain the scatterer."""
        if self.scan.radius is not None:
            return float(self.scan.radius)
        if medium is not None:
            return medium.geometry.origin_radius()
        xmin, xmax, ymin, ymax = self.reconstruct.search_box
        return 0.5 * min(xmax - xmin, ymax - ymin)


def _field_names(section_cls) -> List[str]:
    return [f.name for f in fields(section_cls)]


def _section_from_dict(name: str, section_cls, data: Any):
    if not isinstance(data, dict):
        raise ConfigurationError(f"configuration section '{name}' must be an object")
    allowed = _field_names(section_cls)
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown keys in '{name}': {', '.join(sorted(unknown))}"
        )
    try:
        return section_cls(**data)
    except TypeError as e:
        raise ConfigurationError(f"invalid '{name}' section: {e}")


def _positive(name: str, value: Optional[float]) -> None:
    if value is None or not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")


def load_config(file_path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Defaults, then ``file_path`` if given, then ``overrides``."""
    config = RunConfig.from_file(file_path) if file_path else RunConfig().validate()
    return config.with_overrides(overrides or {})
