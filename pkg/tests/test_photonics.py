import numpy as np
import pytest

from voxelbandit.core import Design, GridShape
from voxelbandit.errors import ShapeMismatch
from voxelbandit.fdtd import simulate
from voxelbandit.models import BendEnvConfig, SceneConfig, SplitterEnvConfig
from voxelbandit.photonics import (
    BendEnv,
    FabricationConstraint,
    SplitterEnv,
    apply_fabrication,
    bend_layout,
    bend_scene,
    connected_to_anchor,
    design_permittivity,
    enclosed_air,
    evaluate_bend,
    evaluate_splitter,
    splitter_payoff,
    splitter_scene,
    straight_guide_scene,
    transmission,
)

CONNECTED = FabricationConstraint(mode="connected-no-cavities", anchor="bottom")


# Fabrication

def test_solid_design_unchanged() -> None:
    design = Design.ones(GridShape(6, 6))
    assert apply_fabrication(design, CONNECTED) == design


def test_floating_voxel_removed() -> None:
    grid = np.zeros((7, 7), dtype=np.int8)
    grid[3, 3] = 1
    out = apply_fabrication(Design.from_grid(grid), CONNECTED)
    assert not out.bits.any()


def test_ring_on_anchor_gets_filled() -> None:
    grid = np.zeros((6, 6), dtype=np.int8)
    grid[0:4, 1:5] = 1
    grid[1:3, 2:4] = 0          # air pocket inside the ring
    out = apply_fabrication(Design.from_grid(grid), CONNECTED).grid2d()
    expected = np.zeros((6, 6), dtype=np.int8)
    expected[0:4, 1:5] = 1
    assert np.array_equal(out, expected)


def test_mode_none_is_identity() -> None:
    grid = np.zeros((5, 5), dtype=np.int8)
    grid[2, 2] = 1
    design = Design.from_grid(grid)
    assert apply_fabrication(design, FabricationConstraint()) == design


def test_anchor_edges() -> None:
    grid = np.zeros((5, 5), dtype=np.int8)
    grid[4, 1:4] = 1            # touches only the top edge
    design = Design.from_grid(grid)
    assert not apply_fabrication(design, CONNECTED).bits.any()
    top = FabricationConstraint(mode="connected-no-cavities", anchor="top")
    assert apply_fabrication(design, top) == design


def test_fabrication_invariants_and_idempotence() -> None:
    rng = np.random.default_rng(0)
    shape = GridShape(8, 8)
    for _ in range(10_000):
        design = Design.random(shape, rng)
        once = apply_fabrication(design, CONNECTED)
        assert apply_fabrication(once, CONNECTED) == once
        grid = once.grid2d().astype(bool)
        assert np.array_equal(connected_to_anchor(grid, "bottom"), grid)
        assert not enclosed_air(grid).any()


def test_diagonal_contact_is_not_connected() -> None:
    grid = np.zeros((4, 4), dtype=np.int8)
    grid[0, 0] = 1
    grid[1, 1] = 1
    out = apply_fabrication(Design.from_grid(grid), CONNECTED).grid2d()
    assert out[0, 0] == 1 and out[1, 1] == 0


# Scenes

def test_design_permittivity_tiles_region() -> None:
    cfg = SceneConfig(design_nx=3, design_ny=2, cells_per_voxel=2)
    grid = np.array([[1, 0, 0],
                     [0, 0, 1]], dtype=np.int8)
    eps = design_permittivity(Design.from_grid(grid), cfg)
    assert eps.shape == (6, 4)
    assert np.all(eps[0:2, 0:2] == cfg.permittivity)      # voxel x=0, y=0
    assert np.all(eps[4:6, 2:4] == cfg.permittivity)      # voxel x=2, y=1
    assert np.all(eps[2:4, :] == 1.0)


def test_bend_scene_layout() -> None:
    cfg = BendEnvConfig(design_nx=6, design_ny=6)
    design = Design.zeros(GridShape(6, 6))
    scene = bend_scene(design, cfg)
    lay = bend_layout(cfg)
    assert scene.eps_r.shape == (lay.nx, lay.ny)
    scene.validate()
    assert set(scene.detectors) == {"input", "output"}
    assert scene.detectors["output"].normal == "y"
    # design region is air for an all-air design
    region = scene.eps_r[lay.x0:lay.x0 + 24, lay.y0:lay.y0 + 24]
    assert np.all(region == 1.0)


def test_splitter_scene_outputs() -> None:
    cfg = SplitterEnvConfig(design_nx=8, design_ny=8, targets=[0.5, 0.3, 0.2])
    scene = splitter_scene(Design.ones(GridShape(8, 8)), cfg)
    scene.validate()
    assert set(scene.detectors) == {"input", "output_0", "output_1", "output_2"}
    spans = sorted((d.start, d.stop) for k, d in scene.detectors.items() if k != "input")
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


# Objectives

def test_splitter_payoff_examples() -> None:
    assert splitter_payoff([0.65, 0.35], [0.65, 0.35]) == 1.0
    assert splitter_payoff([0.0, 0.0], [0.65, 0.35]) == pytest.approx(0.72755, abs=1e-12)
    with pytest.raises(ShapeMismatch):
        splitter_payoff([0.1], [0.65, 0.35])


def test_splitter_targets_validated() -> None:
    with pytest.raises(ValueError):
        SplitterEnvConfig(targets=[0.8, 0.4])


def test_env_shape_check() -> None:
    env = BendEnv(BendEnvConfig(design_nx=4, design_ny=4))
    with pytest.raises(ShapeMismatch):
        env.simulate(Design.zeros(GridShape(5, 4)))


@pytest.mark.slow
def test_straight_guide_transmission() -> None:
    result = simulate(straight_guide_scene(BendEnvConfig()))
    assert 0.97 <= transmission(result) <= 1.005


@pytest.mark.slow
def test_straight_guide_grid_convergence() -> None:
    coarse = BendEnvConfig()
    fine = BendEnvConfig(dx=15e-9, guide_width_cells=14, pml_cells=30, stub_cells=40,
                         margin_cells=20)
    t_coarse = transmission(simulate(straight_guide_scene(coarse)))
    t_fine = transmission(simulate(straight_guide_scene(fine, length_cells=160)))
    assert abs(t_fine - t_coarse) < 0.02


@pytest.mark.slow
def test_bend_air_versus_solid() -> None:
    env = BendEnv(BendEnvConfig(design_nx=6, design_ny=6))
    air = env.evaluate(Design.zeros(env.shape))
    solid = env.evaluate(Design.ones(env.shape))
    assert 0.0 <= air < 0.1
    assert solid > air
    assert 0.0 <= solid <= 1.0


@pytest.mark.slow
def test_evaluation_is_deterministic() -> None:
    env = SplitterEnv(SplitterEnvConfig(design_nx=6, design_ny=6))
    design = Design.random(env.shape, np.random.default_rng(0))
    first = env.evaluate(design)
    assert env.evaluate(design) == first
    assert 0.0 <= first <= 1.0


@pytest.mark.slow
def test_evaluate_bend_matches_env() -> None:
    cfg = BendEnvConfig(design_nx=6, design_ny=6)
    design = Design.random(GridShape(6, 6), np.random.default_rng(2))
    assert evaluate_bend(design, cfg) == pytest.approx(BendEnv(cfg).evaluate(design), abs=1e-12)


@pytest.mark.slow
def test_evaluate_splitter_with_target_override() -> None:
    cfg = SplitterEnvConfig(design_nx=6, design_ny=6)
    design = Design.random(GridShape(6, 6), np.random.default_rng(4))
    result = SplitterEnv(cfg).simulate(design)
    fractions = [transmission(result, f"output_{n}") for n in range(2)]
    even = evaluate_splitter(design, cfg, targets=[0.5, 0.5])
    assert even == pytest.approx(splitter_payoff(fractions, [0.5, 0.5]), abs=1e-12)
    assert evaluate_splitter(design, cfg) == pytest.approx(
        splitter_payoff(fractions, cfg.targets), abs=1e-12)
