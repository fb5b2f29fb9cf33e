import numpy as np
import pytest

from voxelbandit.baselines import RandomSearch
from voxelbandit.core import Budget, Design, GridShape, SyntheticSeparableEnv, run_optimization
from voxelbandit.visualize import (
    mean_curve,
    plot_learning_curves,
    plot_robustness,
    plot_variance,
    render_design,
    render_field,
)


@pytest.fixture
def results():
    env = SyntheticSeparableEnv(np.array([1, 0, 1, 1, 0, 1]))
    return {s: run_optimization(env, RandomSearch(), Budget(30), seed=s) for s in range(3)}


def _is_svg(path) -> bool:
    return path.exists() and "<svg" in path.read_text()


def test_learning_curves(tmp_path, results) -> None:
    assert _is_svg(plot_learning_curves(results, tmp_path / "curves.svg"))


def test_mean_curve(results) -> None:
    curve = mean_curve(list(results.values()))
    assert curve.shape == (30,)
    assert np.all(np.diff(curve) >= 0)


def test_robustness_and_variance_plots(tmp_path) -> None:
    curves = {0: [(0.0, 0.9), (0.1, 0.7)], 1: [(0.0, 0.8), (0.1, 0.75)]}
    assert _is_svg(plot_robustness(curves, tmp_path / "rob.svg"))
    assert _is_svg(plot_variance({0: np.linspace(0.25, 0.0, 20)}, 50, tmp_path / "var.svg"))


def test_render_design_2d_and_3d(tmp_path) -> None:
    rng = np.random.default_rng(0)
    assert _is_svg(render_design(Design.random(GridShape(8, 6), rng), tmp_path / "d2.svg",
                                 title="random"))
    assert _is_svg(render_design(Design.random(GridShape(4, 4, 3), rng), tmp_path / "d3.svg"))


def test_render_field(tmp_path) -> None:
    ez = np.sin(np.linspace(0, 6, 40))[:, None] * np.ones((40, 30))
    assert _is_svg(render_field(ez, tmp_path / "ez.svg", dx=3e-8))
    assert _is_svg(render_field(np.zeros((10, 10)), tmp_path / "zero.svg"))
