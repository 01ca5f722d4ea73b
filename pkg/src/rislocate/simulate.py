"""Synthesize measurement logs for a scene under a transmission schedule."""

from __future__ import annotations

import numpy as np

from .channel import Scene, SceneChannels, Uniform, build_channels, complex_noise, total_channel
from .localizer import MeasurementLog, Schedule, full_schedule


def default_sweep_points(n_ris, per_element: int = 16) -> tuple[int, ...]:
    return tuple(per_element * n for n in n_ris)


class MeasurementSimulator:
    """Noiseless received samples of a schedule, cached for repeated trials.

    Noise for the whole log is drawn in one block of shape
    ``(slots, repeats)`` so a given generator state always maps to the same
    log.
    """

    def __init__(self, scene: Scene, schedule: Schedule | None = None,
                 sweep_points_per_element: int = 16, repeats: int = 1):
        self.scene = scene
        self.channels: SceneChannels = build_channels(scene)
        if schedule is None:
            schedule = full_schedule(
                default_sweep_points(scene.n_ris, sweep_points_per_element), repeats
            )
        self.schedule = schedule
        self.clean = self._noiseless()

    def _noiseless(self) -> np.ndarray:
        chans = self.channels
        x = chans.pilot
        out = np.empty(len(self.schedule), dtype=complex)
        # Per-RIS reflected row weights: y_G(w) = sum_t (h_rm * e^{jw} * (H_br x))_t.
        weights = [h_rm[0] * (h_br @ x) for h_rm, h_br in zip(chans.h_rm, chans.h_br)]
        direct = complex((chans.h_bm @ x).item())
        for i, cfg in enumerate(self.schedule.configs):
            y = direct
            for w, prof in zip(weights, cfg.profiles):
                y += complex(np.exp(1j * prof.phases(w.size)) @ w)
            out[i] = y
        return out

    def reference_power(self) -> float:
        """Noiseless received power with every RIS at zero phase."""
        h = total_channel(self.channels, (Uniform(0.0),) * 3)
        return float(abs(complex((h @ self.channels.pilot).item())) ** 2)

    def measure(self, sigma: float, rng: np.random.Generator | None = None) -> MeasurementLog:
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        if sigma == 0:
            return MeasurementLog(self.schedule, self.clean.copy())
        reps = np.array([c.repeats for c in self.schedule.configs])
        if np.all(reps == reps[0]):
            noise = complex_noise(rng, sigma, (len(self.schedule), int(reps[0]))).mean(axis=1)
        else:
            noise = np.array([complex_noise(rng, sigma, (int(r),)).mean() for r in reps])
        return MeasurementLog(self.schedule, self.clean + noise)
