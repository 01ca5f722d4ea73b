"""Node positions, distance-based link primitives and planar trilateration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

CLAMPED_RANGE = "clamped_range"


class GeometryError(ValueError):
    """Degenerate or inconsistent node geometry."""


class SingularConfigurationError(GeometryError):
    """Anchors whose horizontal projections are (nearly) collinear."""


@dataclass(frozen=True)
class Position3:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise GeometryError(f"non-finite coordinate in {self!r}")

    @classmethod
    def of(cls, values: Sequence[float]) -> "Position3":
        if len(values) == 2:
            return cls(float(values[0]), float(values[1]), 0.0)
        if len(values) != 3:
            raise GeometryError(f"expected 2 or 3 coordinates, got {len(values)}")
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class Position2:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class ScenarioGeometry:
    """Ground-truth node layout plus the carrier/array constants of a scene.

    ``bs_spacing`` and ``ris_spacing`` are the inter-element spacings of the
    BS antenna array and of every RIS, in meters; left unset they default to
    a quarter wavelength.
    """

    bs: Position3
    ris: tuple[Position3, Position3, Position3]
    ms_true: Position3
    carrier_freq: float = 2e9
    bs_spacing: float | None = None
    ris_spacing: float | None = None
    mu: float = 2.0
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if len(self.ris) != 3:
            raise GeometryError("exactly three RIS positions are required")
        object.__setattr__(self, "ris", tuple(self.ris))
        if not self.carrier_freq > 0:
            raise GeometryError("carrier_freq must be positive")
        for name in ("bs_spacing", "ris_spacing"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, self.wavelength / 4)
        if not (self.bs_spacing > 0 and self.ris_spacing > 0):
            raise GeometryError("array spacings must be positive")
        if not self.mu > 0:
            raise GeometryError("mu must be positive")
        nodes = [self.bs, *self.ris, self.ms_true]
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if distance(nodes[i], nodes[j]) <= 0:
                    raise GeometryError(f"nodes {i} and {j} coincide: {nodes[i]}")

    @property
    def wavelength(self) -> float:
        return self.speed_of_light / self.carrier_freq

    @property
    def k_bs(self) -> float:
        """Wavenumber-spacing product 2*pi*d/lambda of the BS array."""
        return 2 * math.pi * self.bs_spacing / self.wavelength

    @property
    def k_ris(self) -> float:
        return 2 * math.pi * self.ris_spacing / self.wavelength


def distance(a: Position3, b: Position3) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def path_loss(dist: float, mu: float) -> float:
    """Amplitude attenuation ``dist ** (-mu / 2)``."""
    if not dist > 0:
        raise GeometryError(f"path loss undefined for distance {dist}")
    return dist ** (-mu / 2)


def propagation_delay(dist: float, c: float = SPEED_OF_LIGHT) -> float:
    return dist / c


@dataclass(frozen=True)
class TrilaterationResult:
    position: Position2
    residual: float
    initial_residual: float
    iterations: int
    warnings: tuple[str, ...] = field(default=())


def _horizontal_ranges(distances, anchors, ms_height):
    flags = []
    out = np.empty(3)
    for i, (d, a) in enumerate(zip(distances, anchors)):
        dz = a.z - ms_height
        sq = d * d - dz * dz
        if sq < 0:
            sq = 0.0
            flags.append(CLAMPED_RANGE)
        out[i] = math.sqrt(sq)
    return out, tuple(dict.fromkeys(flags))


def _range_residuals(p, xy, ranges):
    return np.linalg.norm(xy - p, axis=1) - ranges


def trilaterate(
    distances: Sequence[float],
    anchors: Sequence[Position3],
    ms_height: float = 0.0,
    max_iter: int = 50,
    step_tol: float = 1e-9,
) -> TrilaterationResult:
    """Planar position of a node at known height from three 3-D ranges.

    The 3-D ranges are projected onto the plane ``z = ms_height``. A linear
    solve of the pairwise-differenced circle equations gives the starting
    point, which is then refined by backtracking Gauss-Newton on the planar
    range residuals. The returned ``residual`` is the Euclidean norm of those
    residuals at the final estimate.
    """
    if len(distances) != 3 or len(anchors) != 3:
        raise GeometryError("trilateration needs exactly three ranges and anchors")
    if any(d < 0 for d in distances):
        raise GeometryError(f"negative range in {list(distances)}")
    ranges, flags = _horizontal_ranges(distances, anchors, ms_height)
    xy = np.array([[a.x, a.y] for a in anchors], dtype=float)

    A = 2.0 * (xy[1:] - xy[0])
    scale = max(np.abs(A).max(), 1.0)
    if abs(np.linalg.det(A)) <= 1e-9 * scale * scale:
        raise SingularConfigurationError("anchor projections are collinear")
    b = (
        ranges[0] ** 2
        - ranges[1:] ** 2
        + np.sum(xy[1:] ** 2, axis=1)
        - np.sum(xy[0] ** 2)
    )
    p = np.linalg.solve(A, b)

    res = _range_residuals(p, xy, ranges)
    cost = float(res @ res)
    initial = math.sqrt(cost)
    it = 0
    for it in range(1, max_iter + 1):
        diff = p - xy
        norms = np.linalg.norm(diff, axis=1)
        if np.any(norms == 0):
            break
        J = diff / norms[:, None]
        step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        # Halve the step until the cost stops growing.
        t = 1.0
        while t > 1e-6:
            cand = p + t * step
            cres = _range_residuals(cand, xy, ranges)
            ccost = float(cres @ cres)
            if ccost <= cost:
                break
            t *= 0.5
        else:
            break
        moved = t * float(np.linalg.norm(step))
        p, res, cost = cand, cres, ccost
        if moved < step_tol:
            break
    return TrilaterationResult(
        position=Position2(float(p[0]), float(p[1])),
        residual=math.sqrt(cost),
        initial_residual=initial,
        iterations=it,
        warnings=flags,
    )
