import math

import numpy as np
import pytest

from voxelbandit.errors import NotSteadyState, SimulationDiverged
from voxelbandit.fdtd import (
    C0,
    ETA0,
    Detector,
    FieldFrame,
    FluxMonitor,
    ModeSource,
    SimScene,
    YeeGrid2D,
    cfl_time_step,
    discrete_energy,
    fdtd_step,
    instantaneous_flux,
    mode_profile,
    plan_time,
    pml_profile,
    poynting_flux,
    run_fields,
    simulate,
    slab_mode,
)

DX = 30e-9


def test_cfl_bound() -> None:
    assert cfl_time_step(DX, 1.0) == pytest.approx(DX / (C0 * math.sqrt(2.0)))
    with pytest.raises(ValueError):
        cfl_time_step(DX, 1.2)
    with pytest.raises(ValueError):
        YeeGrid2D.create(10, 10, DX, dt=1.01 * cfl_time_step(DX, 1.0))


def test_grid_validation() -> None:
    with pytest.raises(ValueError):
        YeeGrid2D.create(10, 10, DX, eps_r=np.full((10, 10), 0.5))
    with pytest.raises(ValueError):
        YeeGrid2D.create(20, 20, DX, pml_cells=10)
    grid = YeeGrid2D.create(12, 9, DX)
    assert grid.hx.shape == (12, 8)
    assert grid.hy.shape == (11, 9)
    assert grid.courant == pytest.approx(0.99)


def test_pml_profile_is_symmetric_and_graded() -> None:
    s = pml_profile(40, 10, 2.0)
    assert np.allclose(s, s[::-1])
    assert s[0] == pytest.approx(2.0)
    assert np.all(s[10:30] == 0.0)
    assert np.all(np.diff(s[:11]) < 0)
    h = pml_profile(39, 10, 2.0, offset=0.5)
    assert np.allclose(h, h[::-1])


def test_zero_fields_stay_zero() -> None:
    grid = YeeGrid2D.create(20, 16, DX, pml_cells=4)
    for _ in range(50):
        fdtd_step(grid)
    assert not grid.ez.any() and not grid.hx.any() and not grid.hy.any()


def test_cavity_energy_is_conserved() -> None:
    rng = np.random.default_rng(0)
    eps = 1.0 + 3.0 * rng.random((40, 40))
    grid = YeeGrid2D.create(40, 40, DX, eps_r=eps)
    grid.set_ez(rng.normal(size=(40, 40)))
    start = discrete_energy(grid)
    assert start > 0
    drift = 0.0
    for _ in range(1000):
        fdtd_step(grid)
        drift = max(drift, abs(discrete_energy(grid) - start) / start)
    assert drift < 1e-9


def test_plane_pulse_speed() -> None:
    """A y-uniform pulse moves S/sqrt(2) cells per step along x."""
    nx, ny, i0 = 300, 300, 130
    grid = YeeGrid2D.create(nx, ny, DX)
    x = np.arange(nx)[:, None]
    grid.set_ez(np.broadcast_to(np.exp(-0.5 * ((x - i0) / 6.0) ** 2), (nx, ny)))
    steps = int(round(100 * math.sqrt(2.0) / grid.courant))
    run_fields(grid, steps)

    row = grid.ez[:, ny // 2] ** 2
    right = np.arange(i0 + 50, nx)
    centroid = float(np.sum(right * row[right]) / np.sum(row[right]))
    expected = i0 + steps * grid.courant / math.sqrt(2.0)
    assert centroid == pytest.approx(expected, abs=0.5)


def _point_pulse_run(n: int, pml: int, steps: int, offset: int) -> np.ndarray:
    grid = YeeGrid2D.create(n, n, DX, pml_cells=pml)
    c = n // 2
    tau, t0 = 6.0, 30.0
    probe = np.empty(steps)
    for k in range(steps):
        fdtd_step(grid)
        t = (grid.time_step - t0) / tau
        grid.ez_x[c, c] += -t * math.exp(-t * t)
        probe[k] = grid.ez[c + offset, c]
    return probe


@pytest.mark.slow
def test_pml_reflection_below_one_percent() -> None:
    small = _point_pulse_run(80, 15, 250, 10)
    reference = _point_pulse_run(400, 0, 250, 10)
    assert np.max(np.abs(small - reference)) < 0.01 * np.max(np.abs(reference))


def test_flux_sign_convention() -> None:
    ez = np.ones((6, 6))
    zeros_hx, zeros_hy = np.zeros((6, 5)), np.zeros((5, 6))
    det_x = Detector("x", 3, 1, 5)
    # +x travelling wave: Hy = -Ez / eta0
    assert instantaneous_flux(ez, zeros_hx, -ez[:5] / ETA0, det_x) > 0
    # +y travelling wave: Hx = +Ez / eta0
    det_y = Detector("y", 3, 1, 5)
    assert instantaneous_flux(ez, ez[:, :5] / ETA0, zeros_hy, det_y) > 0


def test_flux_antisymmetry_and_zero() -> None:
    rng = np.random.default_rng(1)
    frames = [FieldFrame(rng.normal(size=(8, 8)), rng.normal(size=(8, 7)),
                         rng.normal(size=(7, 8)), step=10 + k) for k in range(4)]
    for det in (Detector("x", 4, 1, 7), Detector("y", 3, 2, 6)):
        forward = poynting_flux(frames, det)
        assert poynting_flux(frames, det.reversed()) == pytest.approx(-forward)
    zero = [FieldFrame(np.zeros((8, 8)), np.zeros((8, 7)), np.zeros((7, 8)), step=10)]
    assert poynting_flux(zero, Detector("x", 4, 1, 7)) == 0.0


def test_flux_before_steady_state() -> None:
    det = Detector("x", 4, 1, 7)
    with pytest.raises(NotSteadyState):
        poynting_flux([], det)
    frame = FieldFrame(np.zeros((8, 8)), np.zeros((8, 7)), np.zeros((7, 8)), step=5)
    with pytest.raises(NotSteadyState):
        poynting_flux([frame], det, ramp_steps=10)
    with pytest.raises(NotSteadyState):
        FluxMonitor(det, record_from=100, period_steps=20).flux()


def test_detector_placement() -> None:
    assert Detector("x", 20, 16, 30).inside(50, 50, 15)
    assert not Detector("x", 10, 16, 30).inside(50, 50, 15)
    assert not Detector("y", 20, 10, 30).inside(50, 50, 15)
    with pytest.raises(ValueError):
        Detector("x", 5, 4, 4)


def test_slab_mode() -> None:
    width, wavelength, n_core = 210e-9, 1550e-9, 3.5
    n_eff, kx, gamma = slab_mode(width, wavelength, n_core)
    assert 1.0 < n_eff < n_core
    # even-mode dispersion: kx tan(kx w/2) = gamma
    assert kx * math.tan(kx * width / 2) == pytest.approx(gamma, rel=1e-8)
    profile = mode_profile(np.linspace(-300e-9, 300e-9, 61), width, wavelength, n_core)
    assert profile[30] == 1.0
    assert np.allclose(profile, profile[::-1])
    assert np.all(np.diff(profile[30:]) <= 0)


def test_plan_time() -> None:
    plan = plan_time(1550e-9, DX, 0.99, 200, 3.5)
    period = 1550e-9 / C0
    assert plan.dt * plan.period_steps == pytest.approx(period, rel=1e-12)
    assert plan.dt <= cfl_time_step(DX, 0.99)
    assert plan.ramp_steps == 3 * plan.period_steps
    assert plan.settle_steps * plan.dt >= 3 * 200 * DX * 3.5 / C0
    assert plan.record_from == plan.total_steps - plan.period_steps + 1


def _tiny_scene(divergence_factor: float) -> SimScene:
    n = 60
    plan = plan_time(1550e-9, DX, 0.99, 2 * n, 1.0, ramp_periods=1.0, transits=1.0)
    source = ModeSource("x", 20, 25, np.ones(10), 2 * math.pi * C0 / 1550e-9, plan.ramp_steps)
    return SimScene(eps_r=np.ones((n, n)), dx=DX, wavelength=1550e-9, plan=plan, source=source,
                    detectors={"input": Detector("x", 30, 20, 40)}, pml_cells=12,
                    divergence_factor=divergence_factor)


def test_simulate_records_one_period() -> None:
    result = simulate(_tiny_scene(1e6), keep_field=True)
    assert result.ez is not None and result.ez.shape == (60, 60)
    assert result.fluxes["input"] > 0.0


def test_divergence_guard() -> None:
    with pytest.raises(SimulationDiverged):
        simulate(_tiny_scene(1e-9))


def test_scene_rejects_detector_in_pml() -> None:
    scene = _tiny_scene(1e6)
    scene.detectors["bad"] = Detector("x", 5, 20, 40)
    with pytest.raises(ValueError):
        simulate(scene)
