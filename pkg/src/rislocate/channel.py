"""Complex baseband model of a BS -> {direct, 3 x RIS} -> MS MISO link.

Conventions
-----------
* ULA steering entries are ``exp(j (i-1) k cos(angle))`` with ``k = 2 pi d / lambda``.
* Every link carries the prefactor ``rho * exp(-j 2 pi f tau)``.
* Complex noise of variance ``sigma**2`` splits evenly over I and Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .geometry import (
    Position3,
    ScenarioGeometry,
    distance,
    path_loss,
    propagation_delay,
)

TWO_PI = 2 * math.pi


class ConfigurationError(ValueError):
    """Inconsistent dimensions or phase configuration."""


@dataclass(frozen=True)
class LinkParams:
    """Parameters of one propagation link.

    ``aoa_phi`` is unused when the receiver is the single-antenna MS.
    """

    rho: float
    tau: float
    aod_theta: float
    aoa_phi: float = math.pi / 2
    k_tx: float = math.pi / 2
    k_rx: float = math.pi / 2

    def __post_init__(self):
        if not self.rho >= 0:
            raise ConfigurationError(f"rho must be non-negative, got {self.rho}")
        if not self.tau >= 0:
            raise ConfigurationError(f"tau must be non-negative, got {self.tau}")
        for name in ("aod_theta", "aoa_phi"):
            v = getattr(self, name)
            if not 0 <= v <= math.pi:
                raise ConfigurationError(f"{name}={v} outside [0, pi]")

    def prefactor(self, freq: float) -> complex:
        return self.rho * np.exp(-1j * TWO_PI * freq * self.tau)


# -- RIS phase profiles -------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    value: float = 0.0

    def phases(self, n: int) -> np.ndarray:
        return np.full(n, float(self.value))


@dataclass(frozen=True)
class LinearRamp:
    """Element ``t`` (1-based) gets phase ``(t - 1) * rho_step``."""

    rho_step: float

    def phases(self, n: int) -> np.ndarray:
        return np.arange(n) * float(self.rho_step)


@dataclass(frozen=True)
class Explicit:
    values: tuple[float, ...]

    def phases(self, n: int) -> np.ndarray:
        if len(self.values) != n:
            raise ConfigurationError(
                f"explicit profile has {len(self.values)} phases, RIS has {n} elements"
            )
        return np.asarray(self.values, dtype=float)


PhaseProfile = Union[Uniform, LinearRamp, Explicit]


# -- array primitives ---------------------------------------------------------


def steering(n_elems: int, k: float, angle: float) -> np.ndarray:
    if n_elems < 1:
        raise ConfigurationError("steering vector needs at least one element")
    return np.exp(1j * np.arange(n_elems) * k * math.cos(angle))


def channel_bs_ris(params: LinkParams, n_ris: int, n_bs: int, freq: float) -> np.ndarray:
    """``N_R x N_B`` matrix ``rho e^{-j2pi f tau} a_r(phi) a_t(theta)^H``."""
    a_r = steering(n_ris, params.k_rx, params.aoa_phi)
    a_t = steering(n_bs, params.k_tx, params.aod_theta)
    return params.prefactor(freq) * np.outer(a_r, a_t.conj())


def channel_ris_ms(params: LinkParams, n_ris: int, freq: float) -> np.ndarray:
    """``1 x N_R`` row toward a single-antenna MS."""
    a_t = steering(n_ris, params.k_tx, params.aod_theta)
    return params.prefactor(freq) * a_t.conj()[None, :]


def channel_bs_ms(params: LinkParams, n_bs: int, freq: float) -> np.ndarray:
    a_t = steering(n_bs, params.k_tx, params.aod_theta)
    return params.prefactor(freq) * a_t.conj()[None, :]


def omega_matrix(profile: PhaseProfile, n_ris: int) -> np.ndarray:
    return np.diag(np.exp(1j * profile.phases(n_ris)))


def cascade(h_rm: np.ndarray, omega: np.ndarray, h_br: np.ndarray) -> np.ndarray:
    """RIS-reflected channel ``H_RM @ Omega @ H_BR`` as a ``1 x N_B`` row."""
    h_rm = np.atleast_2d(h_rm)
    if h_rm.shape[1] != omega.shape[0] or omega.shape[1] != h_br.shape[0]:
        raise ConfigurationError(
            f"cannot cascade {h_rm.shape} x {omega.shape} x {h_br.shape}"
        )
    return h_rm @ omega @ h_br


def lambda_closed_form(rho_step, k: float, phi_br: float, theta_rm: float, n_ris: int):
    """Geometric sum ``sum_t exp(j (t-1) [k (cos phi - cos theta) + rho_step])``.

    Evaluated as ``exp(j (N-1) psi / 2) sin(N psi / 2) / sin(psi / 2)``; where
    the denominator vanishes the limit ``N`` (times the unit phase) is used.
    Accepts a scalar or an array of ramp steps.
    """
    if n_ris < 1:
        raise ConfigurationError("n_ris must be >= 1")
    psi = k * (math.cos(phi_br) - math.cos(theta_rm)) + np.asarray(rho_step, dtype=float)
    psi = psi - TWO_PI * np.round(psi / TWO_PI)
    half = psi / 2
    den = np.sin(half)
    singular = np.abs(den) < 1e-12
    safe = np.where(singular, 1.0, den)
    ratio = np.where(singular, float(n_ris), np.sin(n_ris * half) / safe)
    out = np.exp(1j * (n_ris - 1) * half) * ratio
    return out if out.ndim else complex(out)


def xi(n_bs: int, k: float, theta_br: float) -> complex:
    """Departure sum ``sum_t exp(-j (t-1) k cos theta)`` over the BS array."""
    if n_bs < 1:
        raise ConfigurationError("n_bs must be >= 1")
    return complex(np.sum(np.exp(-1j * np.arange(n_bs) * k * math.cos(theta_br))))


# -- scenes -------------------------------------------------------------------


@dataclass(frozen=True)
class AngleSet:
    """Per-RIS AoA/AoD triplets (radians) plus the direct-link AoD."""

    phi_br: tuple[float, float, float] = (math.pi / 6, math.pi / 3, math.pi / 4)
    theta_br: tuple[float, float, float] = (math.pi / 6, math.pi / 3, math.pi / 4)
    theta_rm: tuple[float, float, float] = (math.pi / 6, math.pi / 3, math.pi / 4)
    theta_bm: float = math.pi / 3


@dataclass(frozen=True)
class ArrayAxes:
    """Unit directions of the BS array and each RIS array (derived-angle mode)."""

    bs: tuple[float, float, float] = (1.0, 0.0, 0.0)
    ris: tuple[tuple[float, float, float], ...] = ((1.0, 0.0, 0.0),) * 3


def _angle_between(axis, src: Position3, dst: Position3) -> float:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    u = dst.as_array() - src.as_array()
    u = u / np.linalg.norm(u)
    return float(np.arccos(np.clip(a @ u, -1.0, 1.0)))


def derive_angles(geometry: ScenarioGeometry, axes: ArrayAxes) -> AngleSet:
    """Angles from array-axis unit vectors: ``cos(angle) = axis . u`` where
    ``u`` points from the array toward the other node of the link."""
    b, m = geometry.bs, geometry.ms_true
    return AngleSet(
        phi_br=tuple(_angle_between(ax, r, b) for ax, r in zip(axes.ris, geometry.ris)),
        theta_br=tuple(_angle_between(axes.bs, b, r) for r in geometry.ris),
        theta_rm=tuple(_angle_between(ax, r, m) for ax, r in zip(axes.ris, geometry.ris)),
        theta_bm=_angle_between(axes.bs, b, m),
    )


@dataclass(frozen=True)
class Scene:
    """Everything the simulator needs to synthesize received samples."""

    geometry: ScenarioGeometry
    n_bs: int = 20
    n_ris: tuple[int, int, int] = (100, 100, 100)
    angles: AngleSet = field(default_factory=AngleSet)
    pilot: complex = 1 + 0j
    direct_link: bool = True
    angle_mode: str = "explicit"
    axes: ArrayAxes = field(default_factory=ArrayAxes)

    def __post_init__(self):
        object.__setattr__(self, "n_ris", tuple(int(n) for n in self.n_ris))
        if self.n_bs < 1 or len(self.n_ris) != 3 or min(self.n_ris) < 1:
            raise ConfigurationError("n_bs and every n_ris must be >= 1")
        if self.angle_mode not in ("explicit", "derived"):
            raise ConfigurationError(f"unknown angle_mode {self.angle_mode!r}")
        if self.pilot == 0:
            raise ConfigurationError("pilot must be non-zero")

    def effective_angles(self) -> AngleSet:
        if self.angle_mode == "derived":
            return derive_angles(self.geometry, self.axes)
        return self.angles

    def with_ms(self, ms: Position3) -> "Scene":
        return replace(self, geometry=replace(self.geometry, ms_true=ms))

    def pilot_vector(self) -> np.ndarray:
        return np.full(self.n_bs, complex(self.pilot))


@dataclass(frozen=True)
class SceneLinks:
    bs_ms: LinkParams
    bs_ris: tuple[LinkParams, LinkParams, LinkParams]
    ris_ms: tuple[LinkParams, LinkParams, LinkParams]


def scene_links(scene: Scene) -> SceneLinks:
    g = scene.geometry
    ang = scene.effective_angles()
    c = g.speed_of_light

    def link(a, b, theta, phi, k_tx, k_rx):
        dist = distance(a, b)
        return LinkParams(
            rho=path_loss(dist, g.mu),
            tau=propagation_delay(dist, c),
            aod_theta=theta,
            aoa_phi=phi,
            k_tx=k_tx,
            k_rx=k_rx,
        )

    bs_ris = tuple(
        link(g.bs, r, ang.theta_br[i], ang.phi_br[i], g.k_bs, g.k_ris)
        for i, r in enumerate(g.ris)
    )
    ris_ms = tuple(
        link(r, g.ms_true, ang.theta_rm[i], math.pi / 2, g.k_ris, g.k_ris)
        for i, r in enumerate(g.ris)
    )
    bs_ms = link(g.bs, g.ms_true, ang.theta_bm, math.pi / 2, g.k_bs, g.k_bs)
    return SceneLinks(bs_ms=bs_ms, bs_ris=bs_ris, ris_ms=ris_ms)


@dataclass(frozen=True)
class SceneChannels:
    """Channel matrices of a scene; the RIS phase state is applied later."""

    h_bm: np.ndarray
    h_br: tuple[np.ndarray, np.ndarray, np.ndarray]
    h_rm: tuple[np.ndarray, np.ndarray, np.ndarray]
    pilot: np.ndarray

    @property
    def n_ris(self) -> tuple[int, ...]:
        return tuple(h.shape[0] for h in self.h_br)


def build_channels(scene: Scene) -> SceneChannels:
    links = scene_links(scene)
    f = scene.geometry.carrier_freq
    h_bm = channel_bs_ms(links.bs_ms, scene.n_bs, f)
    if not scene.direct_link:
        h_bm = np.zeros_like(h_bm)
    h_br = tuple(
        channel_bs_ris(lk, n, scene.n_bs, f) for lk, n in zip(links.bs_ris, scene.n_ris)
    )
    h_rm = tuple(channel_ris_ms(lk, n, f) for lk, n in zip(links.ris_ms, scene.n_ris))
    return SceneChannels(h_bm=h_bm, h_br=h_br, h_rm=h_rm, pilot=scene.pilot_vector())


def total_channel(channels: SceneChannels, profiles: Sequence[PhaseProfile]) -> np.ndarray:
    """Direct row plus the three RIS cascades (no RIS-to-RIS cross links)."""
    if len(profiles) != 3:
        raise ConfigurationError("one phase profile per RIS is required")
    h = channels.h_bm.copy()
    for h_rm, h_br, prof in zip(channels.h_rm, channels.h_br, profiles):
        h = h + cascade(h_rm, omega_matrix(prof, h_br.shape[0]), h_br)
    return h


def complex_noise(rng: np.random.Generator, sigma: float, shape=()) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with ``E|n|^2 = sigma**2``."""
    z = rng.standard_normal((*shape, 2))
    return sigma * (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2)


def receive(h: np.ndarray, x: np.ndarray, sigma: float, rng: np.random.Generator | None) -> complex:
    if sigma < 0:
        raise ConfigurationError("sigma must be non-negative")
    y = complex((np.atleast_2d(h) @ np.asarray(x)).item())
    if sigma == 0:
        return y
    return y + complex(complex_noise(rng, sigma))
