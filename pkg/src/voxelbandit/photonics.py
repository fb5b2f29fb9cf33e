# src/voxelbandit/photonics.py
"""
Photonic design tasks on top of the FDTD simulator.

A Design is a grid of voxels, each covering cells_per_voxel x cells_per_voxel
simulation cells of air (0) or waveguide material (1). Two tasks:

- bend: a horizontal input guide and a vertical output guide meet at the
  design region; payoff is output flux / input flux.
- splitter: one input guide and K output guides on the far side; payoff is
  1 - MSE between measured output fractions and the targets.

Geometry below uses i for x and j for y; design row 0 is the bottom (j) edge.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import ClassVar, Dict, List, Literal, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .core import Design, GridShape, PayoffEnvironment
from .errors import ShapeMismatch
from .fdtd import (
    C0,
    Detector,
    ModeSource,
    SimScene,
    SimulationResult,
    mode_profile,
    plan_time,
    simulate,
)
from .models import BendEnvConfig, SceneConfig, SplitterEnvConfig

logger = logging.getLogger(__name__)

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)

Anchor = Literal["bottom", "top", "left", "right"]


# ---------------------------------------------------------------------------
# Fabrication constraint
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FabricationConstraint:
    mode: Literal["none", "connected-no-cavities"] = "none"
    anchor: Anchor = "bottom"

    @classmethod
    def from_config(cls, cfg: SceneConfig) -> "FabricationConstraint":
        return cls(mode=cfg.fabrication_mode, anchor=cfg.anchor)


def _edge_mask(shape: Tuple[int, int], edge: Anchor | None) -> np.ndarray:
    """(ny, nx) mask of one region edge, or of the whole boundary when edge is None."""
    mask = np.zeros(shape, dtype=bool)
    if edge in (None, "bottom"):
        mask[0, :] = True
    if edge in (None, "top"):
        mask[-1, :] = True
    if edge in (None, "left"):
        mask[:, 0] = True
    if edge in (None, "right"):
        mask[:, -1] = True
    return mask


def _reachable(region: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Cells of `region` 4-connected to any seed cell inside the region."""
    labels, _ = ndimage.label(region, structure=_FOUR_CONNECTED)
    hit = np.unique(labels[seeds & region])
    return np.isin(labels, hit[hit > 0])


def connected_to_anchor(grid: np.ndarray, anchor: Anchor = "bottom") -> np.ndarray:
    material = np.asarray(grid).astype(bool)
    return _reachable(material, _edge_mask(material.shape, anchor))


def enclosed_air(grid: np.ndarray) -> np.ndarray:
    """Air cells with no 4-connected path to the region boundary."""
    air = ~np.asarray(grid).astype(bool)
    return air & ~_reachable(air, _edge_mask(air.shape, None))


def apply_fabrication(design: Design, constraint: FabricationConstraint) -> Design:
    """
    Remove material not 4-connected to the anchor edge, then fill every air
    pocket that cannot reach the region boundary. Idempotent.
    """
    if constraint.mode == "none":
        return design
    grid = design.grid2d().astype(bool)
    kept = connected_to_anchor(grid, constraint.anchor)
    filled = kept | enclosed_air(kept)
    return Design.from_grid(filled.astype(np.int8))


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    """Cell extents of a scene; x0/y0 is the lower-left cell of the design region."""
    nx: int
    ny: int
    x0: int
    y0: int
    design_cells_x: int
    design_cells_y: int


def guide_span(center: int, width: int) -> slice:
    lo = center - width // 2
    return slice(lo, lo + width)


def design_permittivity(design: Design, cfg: SceneConfig) -> np.ndarray:
    """(nx*k, ny*k) permittivity block of the design region, indexed [i, j]."""
    k = cfg.cells_per_voxel
    block = np.kron(design.grid2d().T.astype(float), np.ones((k, k)))
    return 1.0 + (cfg.permittivity - 1.0) * block


def _source_and_input(cfg: SceneConfig, ny: int, yc: int, omega: float, ramp_steps: int
                      ) -> Tuple[ModeSource, Detector]:
    p, s, w = cfg.pml_cells, cfg.stub_cells, cfg.guide_width_cells
    lo, hi = _clip_span(yc, 3 * w, p, ny - p)
    guide = guide_span(yc, w)
    axis = 0.5 * (guide.start + guide.stop - 1)
    offsets = (np.arange(lo, hi) - axis) * cfg.dx
    profile = mode_profile(offsets, w * cfg.dx, cfg.wavelength, math.sqrt(cfg.permittivity))
    source = ModeSource(normal="x", index=p + 2, start=lo, profile=profile, omega=omega,
                        ramp_steps=ramp_steps)
    dlo, dhi = _clip_span(yc, detector_half_span(w), p, ny - p)
    detector = Detector("x", p + s // 2 + 1, dlo, dhi)
    return source, detector


def detector_half_span(guide_width: int) -> int:
    """Guided-mode detectors reach a few cells past the core; radiation further out is ignored."""
    return guide_width // 2 + 3


def _clip_span(center: int, half: int, lo: int, hi: int) -> Tuple[int, int]:
    return max(center - half, lo), min(center + half + 1, hi)


def _finish_scene(eps: np.ndarray, cfg: SceneConfig, yc: int,
                  outputs: Dict[str, Detector]) -> SimScene:
    nx, ny = eps.shape
    plan = plan_time(cfg.wavelength, cfg.dx, cfg.courant, nx + ny,
                     math.sqrt(cfg.permittivity), cfg.ramp_periods, cfg.transits)
    omega = 2.0 * math.pi * C0 / cfg.wavelength
    source, input_det = _source_and_input(cfg, ny, yc, omega, plan.ramp_steps)
    detectors = {"input": input_det, **outputs}
    return SimScene(
        eps_r=eps, dx=cfg.dx, wavelength=cfg.wavelength, plan=plan, source=source,
        detectors=detectors, pml_cells=cfg.pml_cells, pml_order=cfg.pml_order,
        pml_reflection=cfg.pml_reflection, sigma_max=cfg.sigma_max,
        divergence_factor=cfg.divergence_factor,
    )


def bend_layout(cfg: SceneConfig) -> Layout:
    p, s, m, k = cfg.pml_cells, cfg.stub_cells, cfg.margin_cells, cfg.cells_per_voxel
    dx_cells, dy_cells = cfg.design_nx * k, cfg.design_ny * k
    return Layout(nx=p + s + dx_cells + m + p, ny=p + m + dy_cells + s + p,
                  x0=p + s, y0=p + m, design_cells_x=dx_cells, design_cells_y=dy_cells)


def bend_scene(design: Design, cfg: SceneConfig) -> SimScene:
    """Input guide enters the design region from the left, output leaves at the top."""
    lay = bend_layout(cfg)
    p, s, w = cfg.pml_cells, cfg.stub_cells, cfg.guide_width_cells
    eps = np.ones((lay.nx, lay.ny))
    yc = lay.y0 + lay.design_cells_y // 2
    xc = lay.x0 + lay.design_cells_x // 2
    eps[:lay.x0, guide_span(yc, w)] = cfg.permittivity
    eps[guide_span(xc, w), lay.y0 + lay.design_cells_y:] = cfg.permittivity
    eps[lay.x0:lay.x0 + lay.design_cells_x, lay.y0:lay.y0 + lay.design_cells_y] = \
        design_permittivity(design, cfg)

    lo, hi = _clip_span(xc, detector_half_span(w), p, lay.nx - p)
    out = Detector("y", lay.y0 + lay.design_cells_y + s // 2, lo, hi)
    return _finish_scene(eps, cfg, yc, {"output": out})


def output_centers(cfg: SceneConfig, count: int) -> List[int]:
    k = cfg.cells_per_voxel
    y0 = cfg.pml_cells + cfg.margin_cells
    height = cfg.design_ny * k
    return [y0 + int(round((n + 0.5) * height / count)) for n in range(count)]


def splitter_layout(cfg: SceneConfig) -> Layout:
    p, s, m, k = cfg.pml_cells, cfg.stub_cells, cfg.margin_cells, cfg.cells_per_voxel
    dx_cells, dy_cells = cfg.design_nx * k, cfg.design_ny * k
    return Layout(nx=p + s + dx_cells + s + p, ny=p + m + dy_cells + m + p,
                  x0=p + s, y0=p + m, design_cells_x=dx_cells, design_cells_y=dy_cells)


def splitter_scene(design: Design, cfg: SplitterEnvConfig) -> SimScene:
    """One input guide on the left, len(targets) output guides on the right."""
    lay = splitter_layout(cfg)
    p, s, w = cfg.pml_cells, cfg.stub_cells, cfg.guide_width_cells
    count = len(cfg.targets)
    eps = np.ones((lay.nx, lay.ny))
    yc = lay.y0 + lay.design_cells_y // 2
    x_end = lay.x0 + lay.design_cells_x
    eps[:lay.x0, guide_span(yc, w)] = cfg.permittivity
    centers = output_centers(cfg, count)
    for c in centers:
        eps[x_end:, guide_span(c, w)] = cfg.permittivity
    eps[lay.x0:x_end, lay.y0:lay.y0 + lay.design_cells_y] = design_permittivity(design, cfg)

    half = max(min(detector_half_span(w), lay.design_cells_y // (2 * count) - 1), w // 2 + 1)
    outputs = {}
    for n, c in enumerate(centers):
        lo, hi = _clip_span(c, half, p, lay.ny - p)
        outputs[f"output_{n}"] = Detector("x", x_end + s // 2, lo, hi)
    return _finish_scene(eps, cfg, yc, outputs)


def straight_guide_scene(cfg: SceneConfig, length_cells: int = 80) -> SimScene:
    """Reference scene: a straight guide with detectors near both ends."""
    p, s, m, w = cfg.pml_cells, cfg.stub_cells, cfg.margin_cells, cfg.guide_width_cells
    nx = p + s + length_cells + s + p
    ny = 2 * (p + m) + 4 * w
    yc = ny // 2
    eps = np.ones((nx, ny))
    eps[:, guide_span(yc, w)] = cfg.permittivity
    lo, hi = _clip_span(yc, detector_half_span(w), p, ny - p)
    out = Detector("x", nx - p - s // 2 - 1, lo, hi)
    return _finish_scene(eps, cfg, yc, {"output": out})


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def _clamp01(value: float, what: str) -> float:
    if not math.isfinite(value):
        logger.warning("%s is not finite; reporting 0", what)
        return 0.0
    if value < 0.0 or value > 1.0:
        logger.warning("%s %.6f clamped to [0, 1]", what, value)
    return min(max(value, 0.0), 1.0)


def transmission(result: SimulationResult, output: str = "output") -> float:
    incoming = result.fluxes["input"]
    if incoming <= 0.0:
        logger.warning("non-positive input flux %.3e; transmission set to 0", incoming)
        return 0.0
    return result.fluxes[output] / incoming


def splitter_payoff(measured: Sequence[float], targets: Sequence[float]) -> float:
    """1 - mean((measured_k - target_k)^2), clamped to [0, 1]."""
    m = np.asarray(measured, dtype=float)
    t = np.asarray(targets, dtype=float)
    if m.shape != t.shape:
        raise ShapeMismatch(f"{m.size} measured fractions for {t.size} targets")
    return _clamp01(1.0 - float(np.mean((m - t) ** 2)), "splitter payoff")


def evaluate_bend(design: Design, cfg: BendEnvConfig | None = None) -> float:
    """Transmission of the bend scene, after the configured fabrication mapping."""
    return BendEnv(cfg).evaluate(design)


def evaluate_splitter(design: Design, cfg: SplitterEnvConfig | None = None,
                      targets: Sequence[float] | None = None) -> float:
    cfg = cfg or SplitterEnvConfig()
    if targets is not None:
        cfg = SplitterEnvConfig.model_validate({**cfg.model_dump(), "targets": list(targets)})
    return SplitterEnv(cfg).evaluate(design)


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------

class PhotonicEnv(PayoffEnvironment):
    """Design grid of one photonic task; the fabrication mapping runs before every simulation."""
    differentiable: ClassVar[bool] = False
    cfg: SceneConfig

    def __init__(self, cfg: SceneConfig) -> None:
        self.cfg = cfg
        self.shape = GridShape(cfg.design_nx, cfg.design_ny, 1)
        self.constraint = FabricationConstraint.from_config(cfg)

    def constrain(self, design: Design) -> Design:
        return apply_fabrication(design, self.constraint)

    def scene(self, design: Design) -> SimScene:
        raise NotImplementedError

    def simulate(self, design: Design, keep_field: bool = False) -> SimulationResult:
        self.check_design(design)
        return simulate(self.scene(self.constrain(design)), keep_field=keep_field)


class BendEnv(PhotonicEnv):
    def __init__(self, cfg: BendEnvConfig | None = None) -> None:
        super().__init__(cfg or BendEnvConfig())

    def scene(self, design: Design) -> SimScene:
        return bend_scene(design, self.cfg)

    def evaluate(self, design: Design) -> float:
        return _clamp01(transmission(self.simulate(design)), "bend transmission")


class SplitterEnv(PhotonicEnv):
    cfg: SplitterEnvConfig

    def __init__(self, cfg: SplitterEnvConfig | None = None) -> None:
        super().__init__(cfg or SplitterEnvConfig())

    def scene(self, design: Design) -> SimScene:
        return splitter_scene(design, self.cfg)

    def evaluate(self, design: Design) -> float:
        result = self.simulate(design)
        fractions = [transmission(result, f"output_{n}") for n in range(len(self.cfg.targets))]
        return splitter_payoff(fractions, self.cfg.targets)
