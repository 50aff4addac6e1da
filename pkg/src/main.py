"""
Main entry point for the cusp recovery pipeline.
Orchestrates far-field synthesis, the eigenvalue scan and corner reconstruction.
"""

import logging
import math
import os
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np

from .config import RunConfig
from .errors import ArchiveError, CuspToolkitError, ReconstructionError, SolverError
from .forward import FarFieldMatrix, synthesize_matrix
from .geometry import Grid, MediumSpec
from .reconstruct import (
    CuspParams, CuspReport, HerglotzField, detect_cusps, herglotz_eval, polygon_from_cusps,
)
from .spectral import EigenDetection, ScanResult, add_noise, scan
from .utils import (
    FarFieldArchive, get_timestamp, load_json, save_csv, save_json,
)

logger = logging.getLogger(__name__)

ARCHIVE_FILE = "farfield_archive.json"
INDICATOR_FILE = "indicator.csv"
DETECTIONS_FILE = "detections.json"
FIELD_FILE = "herglotz_field.csv"
REPORT_FILE = "cusp_report.json"
CONFIG_FILE = "run_config.json"
REFINE_SEED_OFFSET = 100_000


class CuspRecoveryPipeline:
    """Synthesize -> scan -> reconstruct, each stage readable from disk."""

    def __init__(self, config: RunConfig, archive_path: Optional[str] = None):
        """
        Initialize the pipeline.

        Args:
            config: validated run configuration
            archive_path: far-field archive location (defaults to output_dir)
        """
        self.config = config
        self.output_dir = config.output_dir
        self.archive_path = archive_path or os.path.join(self.output_dir, ARCHIVE_FILE)
        self.processing_stats = {
            "wavenumbers_synthesized": 0,
            "wavenumbers_resumed": 0,
            "detections": 0,
            "corners": 0,
            "processing_time": 0.0,
        }
        self._medium: Optional[MediumSpec] = None
        self._solver_grid: Optional[Grid] = None

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    @property
    def medium(self) -> MediumSpec:
        if self._medium is None:
            self._medium = self.config.build_medium()
        return self._medium

    def k_grid(self) -> List[float]:
        window = self.config.search_window(self.medium)
        return self.config.k_grid(window)

    def solver_grid(self, k_max: float) -> Grid:
        if self._solver_grid is None:
            self._solver_grid = self.config.solver_grid(self.medium, k_max)
        return self._solver_grid

    def run(self) -> Dict[str, Any]:
        """
        Execute all three stages.

        Returns:
            Summary with the detections, the corner report (if any) and stats
        """
        start = time.perf_counter()
        logger.info("Starting cusp recovery pipeline", extra={"medium": self.medium.name})

        archive = self.synthesize()
        result = self.scan(archive)
        report = None
        if result.detections:
            report = self.reconstruct(result.detections)

        self.processing_stats["processing_time"] = time.perf_counter() - start
        summary = {
            "metadata": {
                "medium": self.medium.to_dict(),
                "processing_timestamp": get_timestamp(),
            },
            "detections": [d.to_dict() for d in result.detections],
            "report": None if report is None else report.to_dict(),
            "diagnostic": result.diagnostic,
            "stats": dict(self.processing_stats),
        }
        logger.info("Pipeline completed", extra=self.processing_stats)
        return summary

    def synthesize(self) -> FarFieldArchive:
        """Fill the archive for every k of the grid, skipping k already stored."""
        logger.info("Synthesizing far-field archive...", extra={"path": self.archive_path})
        measurement = self.config.measurement
        ks = self.k_grid()
        grid = self.solver_grid(ks[-1])
        archive = FarFieldArchive.load_or_create(self.archive_path, measurement.m, measurement.n_inc)
        save_json(self.config.to_dict(), self.path(CONFIG_FILE))

        for k in ks:
            if archive.has(k):
                self.processing_stats["wavenumbers_resumed"] += 1
                continue
            A = self._synthesize_one(k, grid)
            archive.add(k, A.values)
            archive.save(self.archive_path)
            self.processing_stats["wavenumbers_synthesized"] += 1
        return archive

    def _synthesize_one(self, k: float, grid: Grid) -> FarFieldMatrix:
        measurement = self.config.measurement
        try:
            return synthesize_matrix(self.medium, grid, k, measurement.m, measurement.n_inc,
                                     tol=self.config.solver.tol, n_jobs=self.config.solver.n_jobs)
        except SolverError as e:
            raise SolverError(f"at k={k}: {e.message}", e.residuals)
        except CuspToolkitError as e:
            e.message = f"at k={k}: {e.message}"
            e.args = (e.message,)
            raise

    def _measured(self, archive: FarFieldArchive) -> List[FarFieldMatrix]:
        noise = self.config.measurement
        matrices = []
        for i, k in enumerate(archive.k_list):
            A = FarFieldMatrix(k=k, values=archive.get(k))
            matrices.append(add_noise(A, noise.noise_level, noise.noise_seed + i))
        return matrices

    def scan(self, archive: Optional[FarFieldArchive] = None) -> ScanResult:
        """Indicator curve and eigenvalue detections from the archive."""
        logger.info("Scanning indicator...")
        if archive is None:
            if not os.path.exists(self.archive_path):
                raise ArchiveError(f"far-field archive not found: {self.archive_path}")
            archive = FarFieldArchive.load(self.archive_path)
        settings = self.config.scan
        provider = self._refinement_provider(archive) if settings.refine else None

        result = scan(
            self._measured(archive),
            radius=self.config.prior_radius(self.medium),
            dip_threshold=settings.dip_threshold,
            margin=settings.margin,
            order=settings.order,
            weighting=settings.weighting,
            side=settings.side,
            cost=settings.cost,
            provider=provider,
            refine_tol=settings.refine_tol,
        )
        save_csv(["k", "sigma"], result.curve.rows(), self.path(INDICATOR_FILE))
        save_json({
            "detections": [d.to_dict() for d in result.detections],
            "median_sigma": result.curve.median,
            "diagnostic": result.diagnostic,
        }, self.path(DETECTIONS_FILE))
        self.processing_stats["detections"] = len(result.detections)
        return result

    def _refinement_provider(self, archive: FarFieldArchive):
        measurement = self.config.measurement
        ks = archive.k_list
        grid = self.solver_grid(ks[-1])

        def provider(k: float) -> FarFieldMatrix:
            A = self._synthesize_one(k, grid)
            seed = measurement.noise_seed + REFINE_SEED_OFFSET
            return add_noise(A, measurement.noise_level, seed)

        return provider

    def load_detections(self) -> List[EigenDetection]:
        path = self.path(DETECTIONS_FILE)
        if not os.path.exists(path):
            raise ArchiveError(f"detections file not found: {path}")
        data = load_json(path)
        return [EigenDetection.from_dict(d) for d in data.get("detections", [])]

    def evaluation_grid(self, k: float) -> Grid:
        """Search-box grid fine enough for λ/10 at ``k``."""
        settings = self.config.reconstruct
        xmin, xmax, ymin, ymax = settings.search_box
        wavelength = 2.0 * math.pi / k
        needed = int(math.ceil(10.0 * max(xmax - xmin, ymax - ymin) / wavelength)) + 1
        return Grid.from_box(settings.search_box, max(settings.resolution, needed))

    def reconstruct(self, detections: Optional[List[EigenDetection]] = None) -> CuspReport:
        """Herglotz wave at one detection, its corner report and polygon."""
        logger.info("Reconstructing corners...")
        settings = self.config.reconstruct
        detections = self.load_detections() if detections is None else detections
        if not detections:
            raise ReconstructionError("no eigenvalue detection to reconstruct from")
        if not 0 <= settings.detection_index < len(detections):
            raise ReconstructionError(
                f"detection_index {settings.detection_index} out of range for "
                f"{len(detections)} detections"
            )
        detection = detections[settings.detection_index]

        wave = herglotz_eval(detection.kernel, self.evaluation_grid(detection.k_star))
        params = CuspParams(tau_v=settings.tau_v, tau_l=settings.tau_l,
                            cluster_radius=settings.cluster_radius, region=settings.region)
        report = detect_cusps(wave, settings.mode, params)
        if report.corners:
            try:
                polygon_from_cusps(report)
            except ReconstructionError as e:
                logger.warning("Polygon not reconstructed", extra={"reason": e.message})

        self.processing_stats["corners"] = len(report.corners)
        self._save_reconstruction(wave, report, detection)
        return report

    def _save_reconstruction(self, wave: HerglotzField, report: CuspReport,
                             detection: EigenDetection) -> None:
        save_csv(["x", "y", "re", "im", "abs"], wave.rows(), self.path(FIELD_FILE))
        output = report.to_dict()
        output["detection"] = detection.to_dict()
        output["corner_errors"] = corner_errors(report, self.medium)
        save_json(output, self.path(REPORT_FILE))
        logger.info("Results saved", extra={"path": self.path(REPORT_FILE)})


def corner_errors(report: CuspReport, medium: MediumSpec) -> List[Optional[float]]:
    """Distance from each declared corner of ``medium`` to the nearest detected one."""
    found = np.asarray(report.corners, dtype=float).reshape(-1, 2)
    errors: List[Optional[float]] = []
    for corner in medium.corners:
        if len(found) == 0:
            errors.append(None)
            continue
        errors.append(float(np.min(np.hypot(*(found - np.asarray(corner)).T))))
    return errors


def main():
    """Run the full pipeline through the command-line interface."""
    from .cli import main as cli_main
    return cli_main(["pipeline"] + sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
