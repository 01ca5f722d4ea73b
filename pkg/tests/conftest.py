import cmath
import math

import numpy as np
import pytest

from rislocate.channel import AngleSet, Scene
from rislocate.geometry import Position3, ScenarioGeometry

RIS_POSITIONS = (Position3(30, 20, 20), Position3(20, 40, 20), Position3(40, 40, 20))


def cross2(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def reference_scene(ms=(60.0, 20.0), **kw) -> Scene:
    geometry = ScenarioGeometry(
        bs=Position3(0, 0, 10), ris=RIS_POSITIONS, ms_true=Position3(ms[0], ms[1], 0.0)
    )
    return Scene(geometry, **kw)


def random_scene(rng: np.random.Generator, n_ris=None, n_bs=None) -> Scene:
    """Random but non-degenerate scene with explicit angles."""
    while True:
        ris = [Position3(*rng.uniform([-50, -50, 5], [50, 50, 30])) for _ in range(3)]
        xy = np.array([[r.x, r.y] for r in ris])
        area = abs(cross2(xy[1] - xy[0], xy[2] - xy[0]))
        if area > 200:
            break
    geometry = ScenarioGeometry(
        bs=Position3(*rng.uniform([-60, -60, 0], [60, 60, 15])),
        ris=tuple(ris),
        ms_true=Position3(*rng.uniform(-40, 40, 2), 0.0),
        carrier_freq=float(rng.uniform(1e9, 6e9)),
        bs_spacing=None,
        ris_spacing=None,
        mu=float(rng.uniform(1.5, 4.0)),
    )
    angles = AngleSet(
        phi_br=tuple(rng.uniform(0, math.pi, 3)),
        theta_br=tuple(rng.uniform(0, math.pi, 3)),
        theta_rm=tuple(rng.uniform(0, math.pi, 3)),
        theta_bm=float(rng.uniform(0, math.pi)),
    )
    return Scene(
        geometry,
        n_bs=int(n_bs or rng.integers(1, 9)),
        n_ris=tuple(int(n) for n in (n_ris or rng.integers(2, 17, 3))),
        angles=angles,
        pilot=complex(*rng.normal(size=2)),
    )


def brute_components(scene: Scene, phases):
    """Direct and per-RIS received terms by explicit element loops.

    ``phases[g]`` is the list of RIS-g element phases. Independent of the
    matrix code in ``rislocate.channel``: it follows the per-entry formulas
    directly with ``cmath``.
    """
    g = scene.geometry
    c, f, mu = g.speed_of_light, g.carrier_freq, g.mu
    lam = c / f
    kb = 2 * math.pi * g.bs_spacing / lam
    kr = 2 * math.pi * g.ris_spacing / lam
    ang = scene.effective_angles()
    x = scene.pilot

    def dist(a, b):
        return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)

    direct = 0j
    if scene.direct_link:
        d = dist(g.bs, g.ms_true)
        pre = d ** (-mu / 2) * cmath.exp(-2j * math.pi * f * d / c)
        for n in range(scene.n_bs):
            direct += pre * cmath.exp(-1j * n * kb * math.cos(ang.theta_bm)) * x
    ris_terms = []
    for r in range(3):
        d1, d2 = dist(g.bs, g.ris[r]), dist(g.ris[r], g.ms_true)
        pre = (d1 * d2) ** (-mu / 2) * cmath.exp(-2j * math.pi * f * (d1 + d2) / c)
        y = 0j
        for n in range(scene.n_bs):
            for t in range(scene.n_ris[r]):
                y += (
                    pre
                    * cmath.exp(-1j * t * kr * math.cos(ang.theta_rm[r]))
                    * cmath.exp(1j * phases[r][t])
                    * cmath.exp(1j * (t * kr * math.cos(ang.phi_br[r]) - n * kb * math.cos(ang.theta_br[r])))
                    * x
                )
        ris_terms.append(y)
    return direct, ris_terms


def max_link_phase(scene) -> float:
    """Largest propagation phase 2*pi*f*d/c over the links of a scene, in radians.

    Float64 rounding of a distance perturbs this phase by about ``eps * phase``,
    which bounds how closely two independent forward evaluations can agree.
    """
    g = scene.geometry
    dists = [math.dist(g.bs.as_array(), g.ms_true.as_array())]
    for r in g.ris:
        dists.append(math.dist(g.bs.as_array(), r.as_array()) + math.dist(r.as_array(), g.ms_true.as_array()))
    return 2 * math.pi * g.carrier_freq * max(dists) / g.speed_of_light


def zero_phases(scene):
    return [[0.0] * n for n in scene.n_ris]


@pytest.fixture
def scene():
    return reference_scene()
