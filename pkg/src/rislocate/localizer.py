"""RIS-assisted localization from a log of received pilot samples.

The estimator sees only a :class:`MeasurementLog` and an
:class:`EstimatorKnowledge`; nothing that depends on the MS position is
reachable from either.

Measurement protocol
--------------------
1. Four calibration slots with every RIS at a uniform phase of 0 or pi:
   ``(0, 0, 0)``, ``(0, pi, 0)``, ``(pi, pi, 0)``, ``(0, 0, pi)``.
2. For each RIS in turn, ``S`` slots where that RIS carries a linear phase
   ramp ``2 pi s / S`` (s = 0..S-1) and the others stay at 0.

RIS indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from . import channel as ch
from .channel import LinearRamp, PhaseProfile, Uniform
from .geometry import Position2, Position3, distance, path_loss, trilaterate

FLAT_SWEEP = "flat_sweep"


class EstimationError(ValueError):
    pass


class MalformedLogError(EstimationError):
    pass


class DegenerateDepartureError(EstimationError):
    """The BS departure sum is too small to invert the magnitude model."""


class InvalidMeasurementError(EstimationError):
    pass


@dataclass(frozen=True)
class SlotConfig:
    profiles: tuple[PhaseProfile, PhaseProfile, PhaseProfile]
    repeats: int = 1

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if len(self.profiles) != 3:
            raise ch.ConfigurationError("a slot configures exactly three RISs")
        if self.repeats < 1:
            raise ch.ConfigurationError("repeats must be >= 1")


def calibration_schedule(repeats: int = 1) -> list[SlotConfig]:
    z, p = Uniform(0.0), Uniform(math.pi)
    return [
        SlotConfig((z, z, z), repeats),
        SlotConfig((z, p, z), repeats),
        SlotConfig((p, p, z), repeats),
        SlotConfig((z, z, p), repeats),
    ]


def sweep_grid(sweep_points: int) -> np.ndarray:
    return 2 * math.pi * np.arange(sweep_points) / sweep_points


def sweep_schedule(ris: int, sweep_points: int, repeats: int = 1) -> list[SlotConfig]:
    if sweep_points < 2:
        raise ch.ConfigurationError("a sweep needs at least two points")
    if ris not in (0, 1, 2):
        raise ch.ConfigurationError(f"RIS index {ris} not in 0..2")
    out = []
    for step in sweep_grid(sweep_points):
        profiles = [Uniform(0.0)] * 3
        profiles[ris] = LinearRamp(float(step))
        out.append(SlotConfig(tuple(profiles), repeats))
    return out


@dataclass(frozen=True)
class _SweepBlock:
    ris: int
    start: int
    stop: int
    grid: np.ndarray


@dataclass(frozen=True)
class _Layout:
    sweeps: tuple[_SweepBlock, _SweepBlock, _SweepBlock]


def _swept_index(cfg: SlotConfig) -> int | None:
    ramps = [i for i, p in enumerate(cfg.profiles) if isinstance(p, LinearRamp)]
    if len(ramps) != 1:
        return None
    others = [p for i, p in enumerate(cfg.profiles) if i != ramps[0]]
    if any(not (isinstance(p, Uniform) and p.value == 0.0) for p in others):
        return None
    return ramps[0]


@dataclass(frozen=True, eq=False)
class Schedule:
    """Ordered slot configurations; shared by every log measured with it."""

    configs: tuple[SlotConfig, ...]

    def __len__(self):
        return len(self.configs)

    @property
    def transmissions(self) -> int:
        return sum(c.repeats for c in self.configs)

    @cached_property
    def layout(self) -> _Layout:
        cfgs = self.configs
        cal = [c.profiles for c in calibration_schedule()]
        if len(cfgs) < 4 or [c.profiles for c in cfgs[:4]] != cal:
            raise MalformedLogError("log does not start with the calibration block")
        blocks: list[_SweepBlock] = []
        i = 4
        while i < len(cfgs):
            ris = _swept_index(cfgs[i])
            if ris is None:
                raise MalformedLogError(f"entry {i} is not a single-RIS ramp sweep")
            j = i
            while j < len(cfgs) and _swept_index(cfgs[j]) == ris:
                j += 1
            grid = np.array([cfgs[t].profiles[ris].rho_step for t in range(i, j)])
            blocks.append(_SweepBlock(ris, i, j, np.mod(grid, 2 * math.pi)))
            i = j
        found = sorted(b.ris for b in blocks)
        if found != [0, 1, 2]:
            raise MalformedLogError(
                f"expected one sweep block per RIS, found blocks for {found}"
            )
        return _Layout(tuple(sorted(blocks, key=lambda b: b.ris)))


def full_schedule(sweep_points: Sequence[int], repeats: int = 1) -> Schedule:
    cfgs = list(calibration_schedule(repeats))
    for ris, s in enumerate(sweep_points):
        cfgs.extend(sweep_schedule(ris, s, repeats))
    return Schedule(tuple(cfgs))


@dataclass(frozen=True, eq=False)
class MeasurementLog:
    """Slot configurations paired with (repeat-averaged) received samples."""

    schedule: Schedule
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (len(self.schedule),):
            raise MalformedLogError(
                f"{v.shape[0] if v.ndim else 0} samples for {len(self.schedule)} slots"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def from_pairs(cls, pairs) -> "MeasurementLog":
        pairs = list(pairs)
        return cls(Schedule(tuple(c for c, _ in pairs)), np.array([v for _, v in pairs]))

    def __iter__(self) -> Iterator[tuple[SlotConfig, complex]]:
        return zip(self.schedule.configs, (complex(v) for v in self.values))

    def __len__(self):
        return len(self.schedule)

    @property
    def transmissions(self) -> int:
        return self.schedule.transmissions


@dataclass(frozen=True)
class EstimatorKnowledge:
    """What the receiver may legitimately know about the deployment.

    ``departure_correction=False`` replaces the BS departure sum by 1, which
    is how the single-antenna reference estimator operates.
    """

    bs: Position3
    ris: tuple[Position3, Position3, Position3]
    rho_b_r: tuple[float, float, float]
    theta_b_r: tuple[float, float, float]
    n_bs: int
    n_ris: tuple[int, int, int]
    k_bs: float
    k_ris: float
    mu: float
    pilot: complex = 1 + 0j
    ms_height: float = 0.0
    departure_correction: bool = True

    @classmethod
    def from_scene(
        cls, scene: ch.Scene, ms_height: float | None = None, departure_correction: bool = True
    ) -> "EstimatorKnowledge":
        g = scene.geometry
        if scene.angle_mode == "derived":
            theta_br = tuple(ch._angle_between(scene.axes.bs, g.bs, r) for r in g.ris)
        else:
            theta_br = tuple(scene.angles.theta_br)
        return cls(
            bs=g.bs,
            ris=tuple(g.ris),
            rho_b_r=tuple(path_loss(distance(g.bs, r), g.mu) for r in g.ris),
            theta_b_r=theta_br,
            n_bs=scene.n_bs,
            n_ris=tuple(scene.n_ris),
            k_bs=g.k_bs,
            k_ris=g.k_ris,
            mu=g.mu,
            pilot=scene.pilot,
            ms_height=g.ms_true.z if ms_height is None else ms_height,
            departure_correction=departure_correction,
        )

    def departure_sum(self, ris: int) -> complex:
        if not self.departure_correction:
            return 1 + 0j
        return ch.xi(self.n_bs, self.k_bs, self.theta_b_r[ris])


@dataclass(frozen=True)
class Components:
    direct: complex
    ris: tuple[complex, complex, complex]


def separate_components(y1: complex, y2: complex, y3: complex, y4: complex) -> Components:
    """Split the four calibration samples into direct and per-RIS terms."""
    return Components(
        direct=(y3 + y4) / 2,
        ris=((y2 - y3) / 2, (y1 - y2) / 2, (y1 - y4) / 2),
    )


def residual(y_sweep, y0: complex, y_a: complex, y_b: complex):
    """Swept-RIS contribution left after removing the other three terms."""
    return y_sweep - y0 - y_a - y_b


@dataclass(frozen=True)
class Peak:
    rho_star: float
    peak_mag: float
    index: int
    warnings: tuple[str, ...] = ()


def peak_search(magnitudes, grid) -> Peak:
    """Locate the maximum of a cyclic sweep over a uniform ``[0, 2 pi)`` grid.

    The grid maximum (lowest index on ties) is refined with a parabola
    through it and its two cyclic neighbours.
    """
    mags = np.asarray(magnitudes, dtype=float)
    grid = np.asarray(grid, dtype=float)
    n = mags.size
    if n < 3 or grid.shape != mags.shape:
        raise ValueError("peak search needs >= 3 magnitudes with a matching grid")
    step = 2 * math.pi / n
    expected = np.mod(grid[0] + step * np.arange(n), 2 * math.pi)
    off = np.abs(np.angle(np.exp(1j * (np.mod(grid, 2 * math.pi) - expected))))
    if off.max() > 1e-9:
        raise ValueError("sweep grid is not uniform over [0, 2 pi)")

    top = float(mags.max())
    if mags.min() == top or np.ptp(mags) <= 1e-12 * top:
        return Peak(float(grid[0]), top, 0, (FLAT_SWEEP,))
    i = int(np.argmax(mags))
    a, b, c = mags[(i - 1) % n], mags[i], mags[(i + 1) % n]
    den = a - 2 * b + c
    shift = 0.0 if den == 0 else 0.5 * (a - c) / den
    vertex = b - 0.25 * (a - c) * shift
    rho = float(np.mod(grid[i] + shift * step, 2 * math.pi))
    return Peak(rho, float(max(vertex, b)), i)


def estimate_distance(peak_mag: float, ris: int, knowledge: EstimatorKnowledge) -> float:
    """Invert ``peak = rho_BR * Delta**(-mu/2) * N_R * |x Xi|`` for ``Delta``."""
    n_bs = knowledge.n_bs if knowledge.departure_correction else 1
    xi_val = knowledge.departure_sum(ris)
    if abs(xi_val) <= 1e-6 * n_bs:
        raise DegenerateDepartureError(
            f"|Xi| = {abs(xi_val):.3g} for RIS {ris}; departure geometry is degenerate"
        )
    if not peak_mag > 0:
        raise InvalidMeasurementError(f"peak magnitude must be positive, got {peak_mag}")
    gain = knowledge.rho_b_r[ris] * knowledge.n_ris[ris] * abs(knowledge.pilot * xi_val)
    return (peak_mag / gain) ** (-2.0 / knowledge.mu)


def coherent_average(samples) -> complex:
    s = np.asarray(samples, dtype=complex)
    if s.size < 1:
        raise ValueError("need at least one sample")
    return complex(s.mean())


@dataclass(frozen=True)
class LocalizationResult:
    distances: tuple[float, float, float]
    rho_star: tuple[float, float, float]
    peak_mags: tuple[float, float, float]
    position: Position2
    residual: float
    warnings: tuple[str, ...] = field(default=())


def _calibrate(log: MeasurementLog) -> Components:
    v = log.values
    return separate_components(v[0], v[1], v[2], v[3])


def _finish(distances, rho_star, peaks, knowledge, warnings) -> LocalizationResult:
    tri = trilaterate(distances, knowledge.ris, knowledge.ms_height)
    return LocalizationResult(
        distances=tuple(distances),
        rho_star=tuple(rho_star),
        peak_mags=tuple(peaks),
        position=tri.position,
        residual=tri.residual,
        warnings=tuple(dict.fromkeys([*warnings, *tri.warnings])),
    )


def localize(log: MeasurementLog, knowledge: EstimatorKnowledge) -> LocalizationResult:
    layout = log.schedule.layout
    comps = _calibrate(log)
    distances, rho_star, peaks, warnings = [], [], [], []
    for block in layout.sweeps:
        raw = log.values[block.start:block.stop]
        if block.stop - block.start < 3:
            raise MalformedLogError(f"sweep block of RIS {block.ris} has < 3 points")
        if not np.any(raw):
            raise MalformedLogError(f"sweep block of RIS {block.ris} is all zeros")
        others = [comps.ris[i] for i in range(3) if i != block.ris]
        mags = np.abs(residual(raw, comps.direct, *others))
        peak = peak_search(mags, block.grid)
        if FLAT_SWEEP in peak.warnings and knowledge.n_ris[block.ris] > 1:
            raise MalformedLogError(f"sweep of RIS {block.ris} carries no ramp response")
        warnings.extend(peak.warnings)
        distances.append(estimate_distance(peak.peak_mag, block.ris, knowledge))
        rho_star.append(peak.rho_star)
        peaks.append(peak.peak_mag)
    return _finish(distances, rho_star, peaks, knowledge, warnings)


def localize_fixed_phase(log: MeasurementLog, knowledge: EstimatorKnowledge) -> LocalizationResult:
    """Range from the calibration block alone, taking the uniform-phase RIS
    response as if it were already at its peak (no ramp search)."""
    if len(log) < 4 or [c.profiles for c in log.schedule.configs[:4]] != [
        c.profiles for c in calibration_schedule()
    ]:
        raise MalformedLogError("log does not start with the calibration block")
    comps = _calibrate(log)
    distances = [
        estimate_distance(abs(y), i, knowledge) for i, y in enumerate(comps.ris)
    ]
    return _finish(distances, (0.0, 0.0, 0.0), [abs(y) for y in comps.ris], knowledge, [])
