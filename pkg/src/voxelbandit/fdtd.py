# src/voxelbandit/fdtd.py
"""
2D TM-mode FDTD (Ez, Hx, Hy) on a Yee grid.

Layout, with x along the first array axis and y along the second:

    Ez[i, j]   at (i,       j)        integer time steps
    Hx[i, j]   at (i,       j + 1/2)  half time steps, shape (nx, ny - 1)
    Hy[i, j]   at (i + 1/2, j)        half time steps, shape (nx - 1, ny)

The outermost Ez ring is a perfect electric conductor. Absorption uses a
split-field PML (Ez = Ezx + Ezy) with polynomially graded conductivity; the
magnetic conductivity is matched (sigma_m / mu0 = sigma / eps0) and the
electric one is scaled by eps_r so the layer stays matched inside dielectrics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Mapping, Optional, Sequence

import numpy as np
from scipy import constants
from scipy.optimize import brentq

from .errors import ConfigError, NotSteadyState, ShapeMismatch, SimulationDiverged

logger = logging.getLogger(__name__)

C0 = constants.c
EPS0 = constants.epsilon_0
MU0 = constants.mu_0
ETA0 = math.sqrt(MU0 / EPS0)


def cfl_time_step(dx: float, courant: float = 0.99) -> float:
    """dt = S * dx / (c0 * sqrt(2)); S <= 1 keeps the 2D scheme stable."""
    if not 0.0 < courant <= 1.0:
        raise ConfigError(f"Courant factor must lie in (0, 1], got {courant}")
    return courant * dx / (C0 * math.sqrt(2.0))


def sigma_max_for(cells: int, dx: float, order: float = 3.0, reflection: float = 1e-6) -> float:
    """Peak conductivity giving the target normal-incidence reflection."""
    thickness = cells * dx
    return -(order + 1.0) * math.log(reflection) / (2.0 * ETA0 * thickness)


def pml_profile(
    n: int, cells: int, sigma_max: float, order: float = 3.0, offset: float = 0.0
) -> np.ndarray:
    """
    sigma(d) = sigma_max * (d / L)^order sampled at k + offset, k = 0..n-1.

    d is the depth into the layer at either end of the axis; the axis spans
    n - 1 + 2 * offset cells, so integer and half-integer nodes of the same
    grid see the same layer.
    """
    if cells <= 0:
        return np.zeros(n)
    pos = np.arange(n) + offset
    extent = n - 1 + 2 * offset
    depth = np.maximum(cells - pos, pos - (extent - cells))
    depth = np.clip(depth, 0.0, None) / cells
    return sigma_max * depth ** order


@dataclass
class YeeGrid2D:
    nx: int
    ny: int
    dx: float
    dt: float
    eps_r: np.ndarray
    pml_cells: int = 0
    pml_order: float = 3.0
    pml_reflection: float = 1e-6
    sigma_max: Optional[float] = None
    time_step: int = 0
    ez_x: np.ndarray = field(init=False, repr=False)
    ez_y: np.ndarray = field(init=False, repr=False)
    hx: np.ndarray = field(init=False, repr=False)
    hy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.nx < 3 or self.ny < 3:
            raise ConfigError(f"Grid must be at least 3x3, got {self.nx}x{self.ny}")
        limit = cfl_time_step(self.dx, 1.0)
        if self.dt > limit * (1.0 + 1e-12):
            raise ConfigError(f"dt={self.dt:.4e} violates the CFL bound {limit:.4e}")
        self.eps_r = np.asarray(self.eps_r, dtype=float)
        if self.eps_r.shape != (self.nx, self.ny):
            raise ShapeMismatch(
                f"eps_r has shape {self.eps_r.shape}, grid is {(self.nx, self.ny)}"
            )
        if np.any(self.eps_r < 1.0):
            raise ConfigError("Relative permittivity must be >= 1 everywhere")
        if self.pml_cells and 2 * self.pml_cells >= min(self.nx, self.ny):
            raise ConfigError(f"PML of {self.pml_cells} cells does not fit a "
                             f"{self.nx}x{self.ny} grid")
        self.ez_x = np.zeros((self.nx, self.ny))
        self.ez_y = np.zeros((self.nx, self.ny))
        self.hx = np.zeros((self.nx, self.ny - 1))
        self.hy = np.zeros((self.nx - 1, self.ny))
        self._build_coefficients()

    @classmethod
    def create(
        cls,
        nx: int,
        ny: int,
        dx: float,
        eps_r: np.ndarray | float = 1.0,
        courant: float = 0.99,
        dt: Optional[float] = None,
        **pml,
    ) -> "YeeGrid2D":
        eps = np.broadcast_to(np.asarray(eps_r, dtype=float), (nx, ny)).copy()
        step = cfl_time_step(dx, courant) if dt is None else dt
        return cls(nx=nx, ny=ny, dx=dx, dt=step, eps_r=eps, **pml)

    @property
    def courant(self) -> float:
        return self.dt * C0 * math.sqrt(2.0) / self.dx

    @property
    def ez(self) -> np.ndarray:
        return self.ez_x + self.ez_y

    def set_ez(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.nx, self.ny):
            raise ShapeMismatch(f"Ez must have shape {(self.nx, self.ny)}, got {values.shape}")
        self.ez_x = values.copy()
        self.ez_y = np.zeros_like(values)
        self._pec()

    def _build_coefficients(self) -> None:
        smax = self.sigma_max
        if smax is None and self.pml_cells:
            smax = sigma_max_for(self.pml_cells, self.dx, self.pml_order, self.pml_reflection)
        smax = smax or 0.0
        p, m = self.pml_cells, self.pml_order
        # electric nodes on integers, magnetic nodes on half-integers
        se_x = pml_profile(self.nx, p, smax, m)
        se_y = pml_profile(self.ny, p, smax, m)
        sh_x = pml_profile(self.nx - 1, p, smax, m, offset=0.5)
        sh_y = pml_profile(self.ny - 1, p, smax, m, offset=0.5)

        def loss(s: np.ndarray) -> np.ndarray:
            return s * self.dt / (2.0 * EPS0)

        ex, ey = loss(se_x)[:, None], loss(se_y)[None, :]
        hxl, hyl = loss(sh_x)[:, None], loss(sh_y)[None, :]
        e_scale = self.dt / (EPS0 * self.dx) / self.eps_r
        h_scale = self.dt / (MU0 * self.dx)

        self._ca_x = (1.0 - ex) / (1.0 + ex)
        self._cb_x = e_scale / (1.0 + ex)
        self._ca_y = (1.0 - ey) / (1.0 + ey)
        self._cb_y = e_scale / (1.0 + ey)
        # Hy is damped by sigma_x, Hx by sigma_y
        self._da_hy = (1.0 - hxl) / (1.0 + hxl)
        self._db_hy = h_scale / (1.0 + hxl)
        self._da_hx = (1.0 - hyl) / (1.0 + hyl)
        self._db_hx = h_scale / (1.0 + hyl)

    def _pec(self) -> None:
        for arr in (self.ez_x, self.ez_y):
            arr[0, :] = arr[-1, :] = 0.0
            arr[:, 0] = arr[:, -1] = 0.0

    def next_h(self) -> tuple[np.ndarray, np.ndarray]:
        """H one half step ahead of the stored H, computed from the current Ez."""
        ez = self.ez
        hx = self._da_hx * self.hx - self._db_hx * (ez[:, 1:] - ez[:, :-1])
        hy = self._da_hy * self.hy + self._db_hy * (ez[1:, :] - ez[:-1, :])
        return hx, hy


def fdtd_step(grid: YeeGrid2D, source: Optional["ModeSource"] = None) -> YeeGrid2D:
    """Leapfrog: H from curl Ez, then Ez from curl H, then the soft source."""
    grid.hx, grid.hy = grid.next_h()

    d_hy = grid.hy[1:, 1:-1] - grid.hy[:-1, 1:-1]
    d_hx = grid.hx[1:-1, 1:] - grid.hx[1:-1, :-1]
    inner = (slice(1, -1), slice(1, -1))
    grid.ez_x[inner] = grid._ca_x[1:-1] * grid.ez_x[inner] + grid._cb_x[inner] * d_hy
    grid.ez_y[inner] = grid._ca_y[:, 1:-1] * grid.ez_y[inner] - grid._cb_y[inner] * d_hx

    grid.time_step += 1
    if source is not None:
        source.inject(grid)
    grid._pec()
    return grid


def discrete_energy(grid: YeeGrid2D) -> float:
    """
    eps |E^n|^2 + mu H^(n-1/2) . H^(n+1/2), summed over the grid (times dx^2 / 2).

    Exactly conserved by the lossless leapfrog update.
    """
    hx_next, hy_next = grid.next_h()
    ez = grid.ez
    electric = EPS0 * float(np.sum(grid.eps_r * ez * ez))
    magnetic = MU0 * (float(np.sum(grid.hx * hx_next)) + float(np.sum(grid.hy * hy_next)))
    return 0.5 * grid.dx ** 2 * (electric + magnetic)


# ---------------------------------------------------------------------------
# Flux detectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Detector:
    """
    Line detector. normal="x" is a vertical line at i=index covering
    j in [start, stop); normal="y" a horizontal line at j=index covering
    i in [start, stop). direction=+1 counts flux along +normal as positive.
    """
    normal: Literal["x", "y"]
    index: int
    start: int
    stop: int
    direction: int = 1

    def __post_init__(self) -> None:
        if self.normal not in ("x", "y"):
            raise ConfigError(f"Detector normal must be 'x' or 'y', got {self.normal!r}")
        if self.direction not in (1, -1):
            raise ConfigError("Detector direction must be +1 or -1")
        if self.stop <= self.start:
            raise ConfigError(f"Empty detector span [{self.start}, {self.stop})")

    def reversed(self) -> "Detector":
        return Detector(self.normal, self.index, self.start, self.stop, -self.direction)

    def inside(self, nx: int, ny: int, pml_cells: int) -> bool:
        lo_i, hi_i = pml_cells, nx - pml_cells
        lo_j, hi_j = pml_cells, ny - pml_cells
        if self.normal == "x":
            return lo_i < self.index < hi_i - 1 and lo_j <= self.start and self.stop <= hi_j
        return lo_j < self.index < hi_j - 1 and lo_i <= self.start and self.stop <= hi_i


@dataclass(frozen=True)
class FieldFrame:
    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    step: int = 0

    @classmethod
    def of(cls, grid: YeeGrid2D) -> "FieldFrame":
        return cls(grid.ez, grid.hx.copy(), grid.hy.copy(), grid.time_step)


def instantaneous_flux(ez: np.ndarray, hx: np.ndarray, hy: np.ndarray, det: Detector,
                       dx: float = 1.0) -> float:
    """Sum along the line of Sx = -Ez Hy or Sy = Ez Hx, with H averaged onto Ez nodes."""
    k = det.index
    span = slice(det.start, det.stop)
    if det.normal == "x":
        h = 0.5 * (hy[k - 1, span] + hy[k, span])
        s = -ez[k, span] * h
    else:
        h = 0.5 * (hx[span, k - 1] + hx[span, k])
        s = ez[span, k] * h
    return det.direction * float(np.sum(s)) * dx


def poynting_flux(frames: Sequence[FieldFrame], detector: Detector, dx: float = 1.0,
                  ramp_steps: int = 0) -> float:
    """
    Time-averaged directed power through the detector over the given frames,
    which should cover exactly one optical period.

    Raises:
        NotSteadyState: no frames, or a frame recorded before the ramp ended.
    """
    if not frames:
        raise NotSteadyState("No field samples recorded")
    early = [f.step for f in frames if f.step < ramp_steps]
    if early:
        raise NotSteadyState(
            f"Frame at step {early[0]} precedes the end of the source ramp ({ramp_steps})"
        )
    return float(np.mean([instantaneous_flux(f.ez, f.hx, f.hy, detector, dx) for f in frames]))


class FluxMonitor:
    """Accumulates a detector's instantaneous flux over the final optical period."""

    def __init__(self, detector: Detector, record_from: int, period_steps: int) -> None:
        self.detector = detector
        self.record_from = record_from
        self.period_steps = period_steps
        self.samples: List[float] = []

    def record(self, grid: YeeGrid2D) -> None:
        if grid.time_step < self.record_from or len(self.samples) >= self.period_steps:
            return
        self.samples.append(
            instantaneous_flux(grid.ez, grid.hx, grid.hy, self.detector, grid.dx)
        )

    def flux(self) -> float:
        if len(self.samples) < self.period_steps:
            raise NotSteadyState(
                f"Only {len(self.samples)} of {self.period_steps} steady-state samples recorded"
            )
        return float(np.mean(self.samples))


# ---------------------------------------------------------------------------
# Source
# ---------------------------------------------------------------------------

def slab_mode(width: float, wavelength: float, n_core: float, n_clad: float = 1.0
              ) -> tuple[float, float, float]:
    """
    Fundamental even TE mode of a symmetric slab.

    Returns (n_eff, kx, gamma): transverse wavenumber in the core and decay
    rate in the cladding.
    """
    k0 = 2.0 * math.pi / wavelength
    half = width / 2.0
    v = k0 * half * math.sqrt(max(n_core ** 2 - n_clad ** 2, 0.0))
    if v <= 0.0:
        return n_clad, 0.0, 0.0

    def dispersion(u: float) -> float:
        return u * math.tan(u) - math.sqrt(max(v * v - u * u, 0.0))

    hi = min(v, math.pi / 2.0) * (1.0 - 1e-12)
    u = brentq(dispersion, 1e-12, hi, xtol=1e-14)
    kx = u / half
    gamma = math.sqrt(max(v * v - u * u, 0.0)) / half
    n_eff = math.sqrt(n_core ** 2 - (kx / k0) ** 2)
    return n_eff, kx, gamma


def mode_profile(offsets: np.ndarray, width: float, wavelength: float, n_core: float,
                 n_clad: float = 1.0) -> np.ndarray:
    """Ez profile of the fundamental mode at transverse offsets from the guide axis."""
    _, kx, gamma = slab_mode(width, wavelength, n_core, n_clad)
    y = np.abs(np.asarray(offsets, dtype=float))
    half = width / 2.0
    inside = np.cos(kx * y)
    outside = math.cos(kx * half) * np.exp(-gamma * (y - half))
    return np.where(y <= half, inside, outside)


@dataclass
class ModeSource:
    """
    Soft continuous-wave line source with a raised-cosine turn-on.

    Same geometry convention as Detector; `profile` holds one amplitude per
    cell along the span.
    """
    normal: Literal["x", "y"]
    index: int
    start: int
    profile: np.ndarray
    omega: float
    ramp_steps: int
    amplitude: float = 1.0

    def envelope(self, step: int) -> float:
        if step >= self.ramp_steps or self.ramp_steps == 0:
            return 1.0
        return 0.5 * (1.0 - math.cos(math.pi * step / self.ramp_steps))

    def inject(self, grid: YeeGrid2D) -> None:
        t = grid.time_step * grid.dt
        value = self.amplitude * self.envelope(grid.time_step) * math.sin(self.omega * t)
        stop = self.start + self.profile.size
        if self.normal == "x":
            grid.ez_x[self.index, self.start:stop] += value * self.profile
        else:
            grid.ez_y[self.start:stop, self.index] += value * self.profile


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimePlan:
    dt: float
    period_steps: int
    ramp_steps: int
    settle_steps: int

    @property
    def total_steps(self) -> int:
        return self.ramp_steps + self.settle_steps + self.period_steps

    @property
    def record_from(self) -> int:
        """First step whose fields enter the period average."""
        return self.total_steps - self.period_steps + 1


def plan_time(
    wavelength: float,
    dx: float,
    courant: float,
    extent_cells: int,
    n_max: float,
    ramp_periods: float = 3.0,
    transits: float = 3.0,
) -> TimePlan:
    """
    Choose dt so one optical period is an integer number of steps (lowering
    the Courant factor, never raising it), then size the run to cover the
    ramp plus `transits` crossings of extent_cells at speed c0 / n_max.
    """
    period = wavelength / C0
    period_steps = math.ceil(period / cfl_time_step(dx, courant))
    dt = period / period_steps
    ramp_steps = int(round(ramp_periods * period_steps))
    transit_time = extent_cells * dx * n_max / C0
    settle_steps = math.ceil(transits * transit_time / dt)
    return TimePlan(dt=dt, period_steps=period_steps, ramp_steps=ramp_steps,
                    settle_steps=settle_steps)


@dataclass
class SimScene:
    eps_r: np.ndarray
    dx: float
    wavelength: float
    plan: TimePlan
    source: ModeSource
    detectors: Dict[str, Detector]
    pml_cells: int = 15
    pml_order: float = 3.0
    pml_reflection: float = 1e-6
    sigma_max: Optional[float] = None
    divergence_factor: float = 1e6

    @property
    def nx(self) -> int:
        return self.eps_r.shape[0]

    @property
    def ny(self) -> int:
        return self.eps_r.shape[1]

    def validate(self) -> None:
        for name, det in self.detectors.items():
            if not det.inside(self.nx, self.ny, self.pml_cells):
                raise ConfigError(f"Detector {name!r} overlaps the PML or the grid edge")
        src = self.source
        src_line = Detector(src.normal, src.index, src.start, src.start + src.profile.size)
        if not src_line.inside(self.nx, self.ny, self.pml_cells):
            raise ConfigError("Source line overlaps the PML or the grid edge")
        core_n = math.sqrt(float(self.eps_r.max()))
        cells_per_wavelength = self.wavelength / (core_n * self.dx)
        if cells_per_wavelength < 10:
            logger.warning("coarse scene: %.1f cells per wavelength in the densest material",
                           cells_per_wavelength)

    def grid(self) -> YeeGrid2D:
        return YeeGrid2D(
            nx=self.nx, ny=self.ny, dx=self.dx, dt=self.plan.dt, eps_r=self.eps_r,
            pml_cells=self.pml_cells, pml_order=self.pml_order,
            pml_reflection=self.pml_reflection, sigma_max=self.sigma_max,
        )


@dataclass
class SimulationResult:
    fluxes: Dict[str, float]
    steps: int
    ez: Optional[np.ndarray] = None


def simulate(scene: SimScene, keep_field: bool = False, check_every: int = 50) -> SimulationResult:
    """
    Run the scene for plan.total_steps and return the period-averaged flux of
    every detector.

    Raises:
        SimulationDiverged: max|Ez| exceeds divergence_factor * source amplitude
            or becomes non-finite.
    """
    scene.validate()
    grid = scene.grid()
    plan = scene.plan
    monitors = {name: FluxMonitor(det, plan.record_from, plan.period_steps)
                for name, det in scene.detectors.items()}
    bound = scene.divergence_factor * scene.source.amplitude * max(
        1.0, float(np.max(np.abs(scene.source.profile)))
    )

    for _ in range(plan.total_steps):
        fdtd_step(grid, scene.source)
        if grid.time_step >= plan.record_from:
            for mon in monitors.values():
                mon.record(grid)
        if grid.time_step % check_every == 0 or grid.time_step == plan.total_steps:
            peak = float(np.max(np.abs(grid.ez)))
            if not math.isfinite(peak) or peak > bound:
                raise SimulationDiverged(
                    f"max|Ez|={peak:.3e} exceeds {bound:.3e} at step {grid.time_step}"
                )

    logger.debug("simulated %d steps on a %dx%d grid", plan.total_steps, grid.nx, grid.ny)
    fluxes = {name: mon.flux() for name, mon in monitors.items()}
    return SimulationResult(fluxes=fluxes, steps=plan.total_steps,
                            ez=grid.ez if keep_field else None)


def run_fields(grid: YeeGrid2D, steps: int, source: Optional[ModeSource] = None,
               probe: Optional[Mapping[str, tuple[int, int]]] = None) -> Dict[str, np.ndarray]:
    """Advance a bare grid, returning Ez time series at the probe points."""
    probe = dict(probe or {})
    series = {name: np.empty(steps) for name in probe}
    for n in range(steps):
        fdtd_step(grid, source)
        if probe:
            ez = grid.ez
            for name, (i, j) in probe.items():
                series[name][n] = ez[i, j]
    return series
