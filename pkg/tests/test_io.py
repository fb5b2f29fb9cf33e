import json

import numpy as np
import pytest

from voxelbandit.core import Budget, Design, GridShape, SyntheticSeparableEnv, run_optimization
from voxelbandit.baselines import RandomSearch
from voxelbandit.errors import ConfigError, DesignFormatError, IoError
from voxelbandit.io import (
    DATA_DIR,
    TRACE_COLUMNS,
    format_pbd,
    load_checkpoint,
    load_config,
    parse_config,
    parse_pbd,
    read_design_pbd,
    read_field_snapshot,
    read_trace_csv,
    save_checkpoint,
    sniff_kind,
    write_design_pbd,
    write_field_snapshot,
    write_trace_csv,
)
from voxelbandit.models import EaConfig, ExperimentConfig, GolEnvConfig
from voxelbandit.tinynn import AdamState, MlpModel, adam_step


def test_pbd_text_layout() -> None:
    grid = np.array([[1, 0, 0],
                     [0, 1, 1]])
    text = format_pbd(Design.from_grid(grid))
    assert text == "PBD 3 2 1\n100\n011\n"
    assert parse_pbd(text) == Design.from_grid(grid)


def test_pbd_file_round_trip_3d(tmp_path) -> None:
    design = Design.random(GridShape(4, 3, 2), np.random.default_rng(0))
    path = write_design_pbd(design, tmp_path / "nested" / "d.pbd")
    assert read_design_pbd(path) == design
    assert sniff_kind(path) == "design"


@pytest.mark.parametrize("text", [
    "",
    "PBX 2 2 1\n00\n00\n",
    "PBD 2 two 1\n00\n00\n",
    "PBD 2 2 1\n00\n",
    "PBD 2 2 1\n00\n0a\n",
    "PBD 2 2 1\n000\n00\n",
])
def test_pbd_errors(text: str) -> None:
    with pytest.raises(DesignFormatError):
        parse_pbd(text)


def test_missing_design_file(tmp_path) -> None:
    with pytest.raises(IoError):
        read_design_pbd(tmp_path / "none.pbd")


def test_field_snapshot(tmp_path) -> None:
    ez = np.random.default_rng(1).normal(size=(5, 7))
    path = write_field_snapshot(tmp_path / "ez.field", ez, 3e-8)
    assert path.read_bytes().startswith(b"FIELD 5 7 ")
    back, dx = read_field_snapshot(path)
    assert np.array_equal(back, ez)
    assert dx == 3e-8
    assert sniff_kind(path) == "field"

    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DesignFormatError):
        read_field_snapshot(path)


def test_checkpoint_with_adam(tmp_path) -> None:
    model = MlpModel.create([3, 4, 1], seed=0, output_head="sigmoid")
    adam = AdamState.zeros_like(model.parameters(), nesterov=True)
    grads, _ = model.backward(np.ones((2, 3)), np.ones((2, 1)))
    adam_step(model.parameters(), grads, adam, lr=0.01)

    path = save_checkpoint(tmp_path / "policy.bin", model, adam)
    meta = json.loads((tmp_path / "policy.bin.json").read_text())
    assert meta["layer_sizes"] == [3, 4, 1]
    assert meta["output_head"] == "sigmoid"

    loaded, loaded_adam = load_checkpoint(path)
    assert np.array_equal(loaded.flat_parameters(), model.flat_parameters())
    assert loaded.output_head == "sigmoid"
    assert loaded_adam is not None and loaded_adam.step == 1 and loaded_adam.nesterov
    for a, b in zip(loaded_adam.v, adam.v):
        assert np.array_equal(a, b)


def test_checkpoint_checksum(tmp_path) -> None:
    model = MlpModel.create([2, 2], seed=0)
    path = save_checkpoint(tmp_path / "c.bin", model)
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(DesignFormatError):
        load_checkpoint(path)


def test_trace_csv(tmp_path) -> None:
    env = SyntheticSeparableEnv(np.array([1, 0, 1]))
    result = run_optimization(env, RandomSearch(), Budget(5), seed=0, wall_clock=False)
    path = write_trace_csv(result, tmp_path / "trace_0.csv")
    assert path.read_text().splitlines()[0] == ",".join(TRACE_COLUMNS)
    frame = read_trace_csv(path)
    assert frame["step"].tolist() == [1, 2, 3, 4, 5]
    assert frame["best"].is_monotonic_increasing


def test_parse_config_defaults() -> None:
    cfg = parse_config({"environment": {"kind": "gol"}, "algorithm": {"kind": "ea"}})
    assert isinstance(cfg, ExperimentConfig)
    assert isinstance(cfg.environment, GolEnvConfig)
    assert isinstance(cfg.algorithm, EaConfig)
    assert cfg.run.seeds == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("raw", [
    {"environment": {"kind": "gol", "widht": 8}, "algorithm": {"kind": "ea"}},
    {"environment": {"kind": "gol"}, "algorithm": {"kind": "sgd"}},
    {"environment": {"kind": "gol"}, "algorithm": {"kind": "ea"}, "run": {"seeds": []}},
    {"environment": {"kind": "gol"}, "algorithm": {"kind": "ea"}, "extra": 1},
    {"environment": {"kind": "synthetic", "nx": 4, "target": "101"}, "algorithm": {"kind": "ea"}},
])
def test_parse_config_rejects(raw) -> None:
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_config_error_names_location() -> None:
    with pytest.raises(ConfigError, match="widht"):
        parse_config({"environment": {"kind": "gol", "widht": 8}, "algorithm": {"kind": "ea"}})


def test_shipped_configs_load() -> None:
    paths = sorted(DATA_DIR.glob("*.toml"))
    assert paths
    for path in paths:
        cfg = load_config(path)
        assert cfg.run.budget >= 1


def test_load_config_by_name_and_errors(tmp_path) -> None:
    assert load_config("gol_bppo.toml").algorithm.kind == "bppo"
    with pytest.raises(IoError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[environment\nkind = 'gol'\n")
    with pytest.raises(ConfigError):
        load_config(bad)
