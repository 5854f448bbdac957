import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import psutil

from fractal_search.core import export
from fractal_search.core.analysis import (
    MIN_DECAY_POINTS,
    MIN_POWER_LAW_POINTS,
    ScalingFit,
    dimension_comparison,
    exponent_relation_check,
    fit_constant,
    fit_constant_plus_decay,
    fit_power_law,
    with_systematic,
)
from fractal_search.core.config import ConfigManager, ExperimentConfig, MarkedPolicy
from fractal_search.core.errors import StageOverflowError
from fractal_search.core.lattice import (
    FractalLattice,
    StageConfig,
    build_gasket,
    center_vertex,
    corner_vertex,
    hausdorff_dimension,
    lower_bounds,
    vertex_count_closed_form,
)
from fractal_search.core.records import StageResult, SweepResult
from fractal_search.core.runner import StageRunner
from fractal_search.core.search import (
    SearchParams,
    calibrate_cos_delta,
    predicted_complexity,
    run_plain,
    run_tulsi,
)
from fractal_search.core.settings import RuntimeSettings

logger = logging.getLogger(__name__)

_BYTES_PER_AMPLITUDE = 16


class ExperimentController:
    """
    Runs searches on gasket stages and turns a stage sweep into scaling fits.
    """

    def __init__(self, config: ExperimentConfig, settings: Optional[RuntimeSettings] = None):
        self.config = config
        self.settings = settings or RuntimeSettings()

    @property
    def workers(self) -> int:
        return self.config.workers or self.settings.workers

    def build_lattice(self, stage: int) -> FractalLattice:
        """
        Build the gasket for ``stage`` after checking the state allocation
        against ``max_amplitudes``.

        Raises:
            StageOverflowError: the stage needs more amplitudes than allowed.
        """
        cfg = StageConfig(self.config.embedding_dim, stage)
        n = vertex_count_closed_form(cfg)
        layers = 2 if self.config.ancilla else 1
        amplitudes = n * 2 * cfg.embedding_dim * layers
        if amplitudes > self.settings.max_amplitudes:
            raise StageOverflowError(
                f"Stage {stage} needs {amplitudes} amplitudes, limit is {self.settings.max_amplitudes}"
            )
        available = psutil.virtual_memory().available
        logger.debug(
            f"Stage {stage}: ~{3 * amplitudes * _BYTES_PER_AMPLITUDE / 2**20:.1f} MiB of state buffers, "
            f"{available / 2**20:.0f} MiB available"
        )
        return build_gasket(cfg)

    def resolve_marked(self, lattice: FractalLattice) -> int:
        policy = self.config.marked_vertex_policy
        if policy == MarkedPolicy.CENTER:
            return center_vertex(lattice)
        if policy == MarkedPolicy.CORNER:
            return corner_vertex(lattice)
        return lattice.check_vertex(self.config.marked_vertex)

    def run_stage(self, stage: int, capture_peak_state: bool = False) -> StageResult:
        """
        Plain search on ``stage``; with ancilla control the plain peak
        calibrates ``cos_delta`` for a controlled run on the same lattice.
        """
        cfg = self.config
        lattice = self.build_lattice(stage)
        marked = self.resolve_marked(lattice)
        n = lattice.n_vertices
        result = StageResult(
            d_E=cfg.embedding_dim,
            S=stage,
            N=n,
            t1=cfg.t1,
            lower_bounds=lower_bounds(n, hausdorff_dimension(cfg.embedding_dim)),
        )

        params = SearchParams.for_lattice(
            lattice, marked, t1=cfg.t1,
            horizon=cfg.horizon_plain, horizon_factor=cfg.horizon_factor_plain,
        )
        result.plain = run_plain(lattice, params, capture_peak_state=capture_peak_state)

        if cfg.ancilla:
            p0 = result.plain.P
            cos_delta = calibrate_cos_delta(p0)
            B = 1.0 / math.sqrt(p0)
            logger.debug(
                f"Stage {stage}: P0={p0:.6g}, B={B:.6g}, cos_delta={cos_delta:.6g}, "
                f"predicted Q/sqrt(P)={predicted_complexity(B, n):.6g}"
            )
            tulsi_params = SearchParams.for_lattice(
                lattice, marked, t1=cfg.t1, cos_delta=cos_delta,
                horizon=cfg.horizon_tulsi, horizon_factor=cfg.horizon_factor_tulsi,
            )
            result.cos_delta = cos_delta
            result.tulsi = run_tulsi(
                lattice, tulsi_params,
                capture_peak_state=capture_peak_state, track_trap=True, B=B,
            )

        logger.info(f"Stage {stage} done (N={n})")
        return result

    def scan_t1(self, stage: int, values: Sequence[int] = (1, 2, 3)) -> List[StageResult]:
        """Repeat one stage for several walk-step counts per oracle call."""
        results = []
        for t1 in values:
            controller = ExperimentController(self.config.model_copy(update={"t1": t1}), self.settings)
            results.append(controller.run_stage(stage))
        return results

    def run_sweep(self) -> SweepResult:
        """Run every configured stage on the worker pool and fit the survivors."""
        d_e = self.config.embedding_dim

        def failed(stage: int, error: Exception) -> StageResult:
            return StageResult(d_E=d_e, S=stage, t1=self.config.t1, error=str(error))

        runner = StageRunner(self.workers)
        stages = runner.run(self.config.stage_range, self.run_stage, failed)
        sweep = SweepResult(d_E=d_e, stages=stages)
        for stage in sweep.failed_stages:
            logger.warning(f"Stage {stage} failed and is excluded from the fits")
        sweep.fit_report = self.fit_sweep(sweep)
        return sweep

    def _power_fit(self, label: str, points: List[Tuple[int, float, float]]) -> Optional[ScalingFit]:
        """Fit ``(S, N, value)`` triples over the fit stages, with the one-stage-trimmed range as systematic error."""
        fit_from = self.config.fit_from
        selected = [p for p in points if fit_from is None or p[0] >= fit_from]
        if len(selected) < MIN_POWER_LAW_POINTS:
            logger.warning(f"Skipping {label} fit: {len(selected)} usable stages")
            return None
        fit = fit_power_law([(n, v) for _, n, v in selected], fit_range=[s for s, _, _ in selected])
        trimmed = selected[1:]
        if len(trimmed) >= MIN_POWER_LAW_POINTS:
            other = fit_power_law([(n, v) for _, n, v in trimmed], fit_range=[s for s, _, _ in trimmed])
            fit = with_systematic(fit, other)
        logger.info(
            f"{label}: slope={fit.slope:.4f} intercept={fit.intercept:.4f} rms={fit.rms_err:.4g}"
        )
        return fit

    def fit_sweep(self, sweep: SweepResult) -> Dict[str, Any]:
        """Assemble the fit report for a finished sweep."""
        d_e = sweep.d_E
        done = sweep.completed
        plain = [(r.S, r.N, r.plain) for r in done if r.plain is not None]
        tulsi = [(r.S, r.N, r.tulsi) for r in done if r.tulsi is not None]

        fits = {
            "q_plain": self._power_fit("Q0", [(s, n, run.Q) for s, n, run in plain]),
            "p_plain": self._power_fit("P0", [(s, n, run.P) for s, n, run in plain]),
            "complexity_plain": self._power_fit("Q0/sqrt(P0)", [(s, n, run.complexity) for s, n, run in plain]),
        }
        if self.config.ancilla:
            fits["q_tulsi"] = self._power_fit("Q_delta", [(s, n, run.Q) for s, n, run in tulsi])
            fits["complexity_tulsi"] = self._power_fit(
                "Q_delta/sqrt(P_delta)", [(s, n, run.complexity) for s, n, run in tulsi]
            )

        report: Dict[str, Any] = {
            "format_version": export.FORMAT_VERSION,
            "d_E": d_e,
            "t1": self.config.t1,
            "stages": [r.S for r in sweep.stages],
            "fit_stages": self.config.fit_stages(),
            "failed_stages": sweep.failed_stages,
            "fits": {name: fit.to_dict() if fit else None for name, fit in fits.items()},
            "lower_bounds": [{"S": r.S, "N": r.N, **r.lower_bounds} for r in done],
            "runs": [r.to_dict() for r in sweep.stages],
        }

        q_fit, p_fit = fits["q_plain"], fits["p_plain"]
        if q_fit is not None and p_fit is not None:
            a, b = -p_fit.slope, q_fit.slope
            report["exponents"] = {"a": a, "b": b, "relation_residual": exponent_relation_check(a, b)}

        comparisons = {}
        for name in ("q_plain", "q_tulsi"):
            if fits.get(name) is not None:
                comparisons[name] = dimension_comparison(fits[name].slope, d_e).to_dict()
        report["dimension_comparison"] = comparisons

        if tulsi:
            p_delta = [run.P for _, _, run in tulsi]
            report["p_delta_constant"] = fit_constant(p_delta).to_dict()
            if len(tulsi) >= MIN_DECAY_POINTS:
                decay = fit_constant_plus_decay([(2 ** s, run.P) for s, _, run in tulsi])
                report["p_delta_decay"] = decay.to_dict()
            else:
                logger.warning(f"Skipping P_delta decay fit: {len(tulsi)} controlled runs")
                report["p_delta_decay"] = None
        return report

    def write_search(self, result: StageResult, snapshot: bool = False) -> List[Path]:
        """Write series, summary and optional peak snapshots for one stage."""
        out = Path(self.config.output_dir)
        stem = f"search_d{result.d_E}_S{result.S}_t{result.t1}"
        written = []
        for tag, run in (("plain", result.plain), ("tulsi", result.tulsi)):
            if run is None:
                continue
            path = out / f"{stem}_{tag}_series.csv"
            export.write_series(path, run.probability_series)
            written.append(path)
            if snapshot and run.peak_state is not None:
                path = out / f"{stem}_{tag}_snapshot.csv"
                export.write_snapshot(path, run.peak_state)
                written.append(path)
                path = out / f"{stem}_{tag}_state.txt"
                with open(path, "w") as f:
                    export.write_state_dump(f, run.peak_state)
                written.append(path)
        path = out / f"{stem}_summary.csv"
        export.write_summary(path, result.summary_rows())
        written.append(path)
        return written

    def write_sweep(self, sweep: SweepResult) -> List[Path]:
        """Write the summary table, the fit report and the config that reproduces them."""
        out = Path(self.config.output_dir)
        stem = f"sweep_d{sweep.d_E}_t{self.config.t1}"
        summary = out / f"{stem}_summary.csv"
        fits = out / f"{stem}_fits.json"
        export.write_summary(summary, sweep.summary_rows())
        export.write_fit_report(fits, sweep.fit_report)
        config = ConfigManager(str(out / f"{stem}_config.json")).save_config(
            self.config, exclude={"output_dir"}
        )
        return [summary, fits, config]
