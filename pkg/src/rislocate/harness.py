"""Monte Carlo experiments: noiseless trajectory, error vs SNR, error vs RIS
size, and the proposed estimator against a single-antenna reference.

Every trial draws its noise from ``SeedSequence([master_seed, group, trial])``
so results do not depend on execution order or on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import Scene
from .geometry import GeometryError, Position3
from .localizer import (
    EstimationError,
    EstimatorKnowledge,
    localize,
    localize_fixed_phase,
)
from .simulate import MeasurementSimulator

PROPOSED = "proposed"
BASELINE = "baseline"


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo settings around a template scene.

    ``baseline_mode`` runs the SNR/element sweeps with the single-antenna
    reference estimator instead of the proposed one. ``baseline_sweep=False``
    makes that reference skip the ramp search and range from the zero-phase
    calibration response.
    """

    scene: Scene
    snr_grid: tuple[float, ...] = (0.0, 6.0, 12.0, 18.0, 24.0)
    n_ris_grid: tuple[int, ...] = (25, 50, 100, 200)
    trials: int = 500
    master_seed: int = 0
    sweep_points_per_element: int = 16
    repeats: int = 1
    baseline_mode: bool = False
    baseline_sweep: bool = True
    elements_snr_db: float = 12.0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_grid or not self.n_ris_grid:
            raise ValueError("experiment grids must be non-empty")
        if self.sweep_points_per_element < 1 or self.repeats < 1 or self.workers < 1:
            raise ValueError("sweep density, repeats and workers must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    snr_db: float
    n_ris: int
    distance_errors: tuple[float, float, float]
    position_error: float
    actual: tuple[float, float]
    estimate: tuple[float, float]
    variant: str = PROPOSED
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class SummaryRow:
    key: float
    mean: float
    median: float
    p90: float
    trials: int


@dataclass(frozen=True)
class PairedRow:
    snr_db: float
    proposed_median: float
    baseline_median: float
    trials: int


@dataclass(frozen=True)
class TrajectoryPoint:
    actual: tuple[float, float]
    estimate: tuple[float, float]
    error: float
    failure: str | None = None


def trial_seed(master_seed: int, group: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(group), int(trial)])


def snr_to_sigma(scene_or_sim, snr_db: float) -> float:
    """Noise std giving ``snr_db`` relative to the all-zero-phase received power."""
    sim = scene_or_sim
    if isinstance(sim, Scene):
        sim = MeasurementSimulator(sim, sweep_points_per_element=1)
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return math.sqrt(sim.reference_power() / 10 ** (snr_db / 10))


def baseline_scene(scene: Scene) -> Scene:
    return replace(scene, n_bs=1)


def default_trajectory(n: int = 20) -> list[Position3]:
    """A gently curving MS path across the deployment (height 0)."""
    t = np.linspace(0.0, 1.0, n)
    xs = 50.0 + 30.0 * t
    ys = 20.0 + 10.0 * np.sin(2 * math.pi * t)
    return [Position3(float(x), float(y), 0.0) for x, y in zip(xs, ys)]


# -- trial execution ----------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    scene: Scene
    sigma: float
    seeds: tuple[tuple[int, int, int], ...]
    snr_db: float
    variant: str
    per_element: int
    repeats: int
    fixed_phase: bool


def _run_job(job: _Job) -> list[TrialResult]:
    scene = job.scene
    baseline = job.variant == BASELINE
    sim = MeasurementSimulator(scene, sweep_points_per_element=job.per_element,
                               repeats=job.repeats)
    knowledge = EstimatorKnowledge.from_scene(scene, departure_correction=not baseline)
    estimator = localize_fixed_phase if (baseline and job.fixed_phase) else localize
    g = scene.geometry
    truth = np.array([g.ms_true.x, g.ms_true.y])
    true_d = [math.dist(g.ms_true.as_array(), r.as_array()) for r in g.ris]
    out = []
    for master, group, trial in job.seeds:
        rng = np.random.default_rng(trial_seed(master, group, trial))
        res = estimator(sim.measure(job.sigma, rng), knowledge)
        est = np.array([res.position.x, res.position.y])
        out.append(TrialResult(
            trial=trial,
            snr_db=job.snr_db,
            n_ris=scene.n_ris[0],
            distance_errors=tuple(abs(d - t) for d, t in zip(res.distances, true_d)),
            position_error=float(np.hypot(*(est - truth))),
            actual=(float(truth[0]), float(truth[1])),
            estimate=(float(est[0]), float(est[1])),
            variant=job.variant,
            warnings=res.warnings,
        ))
    return out


def _jobs_for(config: ExperimentConfig, scene: Scene, sigma: float, group: int,
              snr_db: float, variant: str) -> list[_Job]:
    seeds = [(config.master_seed, group, t) for t in range(config.trials)]
    n_chunks = min(config.workers, len(seeds))
    chunks = np.array_split(np.arange(len(seeds)), n_chunks)
    return [
        _Job(scene, sigma, tuple(seeds[i] for i in idx), snr_db, variant,
             config.sweep_points_per_element, config.repeats, not config.baseline_sweep)
        for idx in chunks if len(idx)
    ]


def _execute(jobs: Sequence[_Job], workers: int) -> list[TrialResult]:
    if workers <= 1:
        results = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    return [r for chunk in results for r in chunk]


def summarize(trials: Sequence[TrialResult], key: str) -> list[SummaryRow]:
    groups: dict[float, list[float]] = {}
    for t in trials:
        groups.setdefault(getattr(t, key), []).append(t.position_error)
    rows = []
    for k, errs in groups.items():
        e = np.asarray(errs)
        rows.append(SummaryRow(k, float(e.mean()), float(np.median(e)),
                               float(np.percentile(e, 90)), int(e.size)))
    return rows


def _variant(config: ExperimentConfig) -> str:
    return BASELINE if config.baseline_mode else PROPOSED


def _variant_scene(config: ExperimentConfig, scene: Scene) -> Scene:
    return baseline_scene(scene) if config.baseline_mode else scene


# -- experiments --------------------------------------------------------------


def run_noiseless(scene: Scene, ms_path: Sequence[Position3],
                  sweep_points_per_element: int = 16) -> list[TrajectoryPoint]:
    """Noise-free estimate at each point of ``ms_path``; failures are recorded."""
    if not ms_path:
        raise ValueError("ms_path must not be empty")
    out = []
    for ms in ms_path:
        sc = scene.with_ms(ms)
        actual = (ms.x, ms.y)
        try:
            sim = MeasurementSimulator(sc, sweep_points_per_element=sweep_points_per_element)
            res = localize(sim.measure(0.0), EstimatorKnowledge.from_scene(sc))
        except (EstimationError, GeometryError) as exc:
            out.append(TrajectoryPoint(actual, (math.nan, math.nan), math.nan, str(exc)))
            continue
        est = (res.position.x, res.position.y)
        out.append(TrajectoryPoint(actual, est, math.hypot(est[0] - ms.x, est[1] - ms.y)))
    return out


def run_snr_sweep(config: ExperimentConfig) -> tuple[list[SummaryRow], list[TrialResult]]:
    scene = config.scene
    ref = MeasurementSimulator(scene, sweep_points_per_element=1)
    target = _variant_scene(config, scene)
    jobs = []
    for gi, snr in enumerate(config.snr_grid):
        jobs += _jobs_for(config, target, snr_to_sigma(ref, snr), gi, snr, _variant(config))
    trials = _execute(jobs, config.workers)
    return summarize(trials, "snr_db"), trials


def run_elements_sweep(config: ExperimentConfig) -> tuple[list[SummaryRow], list[TrialResult]]:
    """Error vs RIS size; each size is its own scene with its own noise level
    at ``elements_snr_db``."""
    jobs = []
    for gi, n in enumerate(config.n_ris_grid):
        scene = replace(config.scene, n_ris=(n, n, n))
        sigma = snr_to_sigma(scene, config.elements_snr_db)
        jobs += _jobs_for(config, _variant_scene(config, scene), sigma, gi,
                          config.elements_snr_db, _variant(config))
    trials = _execute(jobs, config.workers)
    return summarize(trials, "n_ris"), trials


def run_baseline_comparison(config: ExperimentConfig) -> tuple[list[PairedRow], list[TrialResult]]:
    """Proposed estimator vs the single-antenna reference without departure
    correction, trial-paired on identical seeds.

    Both runs see the same noise level: the one that gives the proposed
    (multi-antenna) scene the requested SNR.
    """
    scene = config.scene
    ref = MeasurementSimulator(scene, sweep_points_per_element=1)
    base = baseline_scene(scene)
    jobs = []
    for gi, snr in enumerate(config.snr_grid):
        sigma = snr_to_sigma(ref, snr)
        jobs += _jobs_for(config, scene, sigma, gi, snr, PROPOSED)
        jobs += _jobs_for(config, base, sigma, gi, snr, BASELINE)
    trials = _execute(jobs, config.workers)
    rows = []
    for snr in config.snr_grid:
        p = [t.position_error for t in trials if t.snr_db == snr and t.variant == PROPOSED]
        b = [t.position_error for t in trials if t.snr_db == snr and t.variant == BASELINE]
        rows.append(PairedRow(snr, float(np.median(p)), float(np.median(b)), len(p)))
    return rows, trials
