# src/voxelbandit/io.py
"""
Files on disk: PBD design text, Ez field snapshots, MLP checkpoints with a
sha256 checksum, TOML experiment configs and CSV run traces.

Every writer goes through a temp file in the target directory plus rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .core import Design, GridShape, RunResult
from .errors import ConfigError, DesignFormatError, IoError
from .models import ExperimentConfig
from .tinynn import AdamState, MlpModel

ROOT_DIR = Path(__file__).resolve().parents[2]
DATA_DIR = ROOT_DIR / "data"

TRACE_COLUMNS = ["step", "payoff", "best", "wall_ms"]
FIELD_MAGIC = "FIELD"


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------

def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    """Write to a temporary file next to `path`, then rename over it."""
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, p)
    except OSError as exc:
        raise IoError(f"Could not write {p}: {exc}") from exc
    return p


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# PBD design files
# ---------------------------------------------------------------------------

def format_pbd(design: Design) -> str:
    """
    Portable binary design text:

        PBD <nx> <ny> <nz>
        nz blocks of ny lines of nx characters in {0,1}

    Lines run over y within a block; characters run over x.
    """
    s = design.shape
    lines = [f"PBD {s.nx} {s.ny} {s.nz}"]
    for layer in design.grid():
        for row in layer:
            lines.append("".join("1" if b else "0" for b in row))
    return "\n".join(lines) + "\n"


def parse_pbd(text: str) -> Design:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DesignFormatError("Empty PBD file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "PBD":
        raise DesignFormatError(f"Bad PBD header: {lines[0]!r}")
    try:
        nx, ny, nz = (int(v) for v in header[1:])
        shape = GridShape(nx, ny, nz)
    except ValueError as exc:
        raise DesignFormatError(f"Bad PBD dimensions: {lines[0]!r}") from exc

    rows = lines[1:]
    if len(rows) != ny * nz:
        raise DesignFormatError(f"PBD body has {len(rows)} rows, expected {ny * nz}")
    for idx, row in enumerate(rows):
        if len(row) != nx or set(row) - {"0", "1"}:
            raise DesignFormatError(f"PBD row {idx} must be {nx} characters of 0/1: {row!r}")
    bits = np.array([c == "1" for row in rows for c in row], dtype=np.int8)
    return Design(bits=bits, shape=shape)


def write_design_pbd(design: Design, path: str | Path) -> Path:
    return atomic_write_text(path, format_pbd(design))


def read_design_pbd(path: str | Path) -> Design:
    p = Path(path)
    if not p.is_file():
        raise IoError(f"Design file not found: {p}")
    return parse_pbd(p.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Field snapshots
# ---------------------------------------------------------------------------

def write_field_snapshot(path: str | Path, ez: np.ndarray, dx: float) -> Path:
    """ASCII header `FIELD <nx> <ny> <dx>` then nx*ny little-endian float64, [i, j] order."""
    ez = np.asarray(ez, dtype="<f8")
    if ez.ndim != 2:
        raise DesignFormatError(f"Field snapshot must be 2D, got shape {ez.shape}")
    header = f"{FIELD_MAGIC} {ez.shape[0]} {ez.shape[1]} {dx!r}\n".encode("ascii")
    return atomic_write_bytes(path, header + np.ascontiguousarray(ez).tobytes())


def read_field_snapshot(path: str | Path) -> Tuple[np.ndarray, float]:
    p = Path(path)
    if not p.is_file():
        raise IoError(f"Snapshot file not found: {p}")
    raw = p.read_bytes()
    head, sep, body = raw.partition(b"\n")
    parts = head.decode("ascii", errors="replace").split()
    if not sep or len(parts) != 4 or parts[0] != FIELD_MAGIC:
        raise DesignFormatError(f"{p} is not a field snapshot")
    try:
        nx, ny, dx = int(parts[1]), int(parts[2]), float(parts[3])
    except ValueError as exc:
        raise DesignFormatError(f"Bad snapshot header in {p}") from exc
    if len(body) != nx * ny * 8:
        raise DesignFormatError(f"Snapshot body has {len(body)} bytes, expected {nx * ny * 8}")
    return np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(float), dx


def sniff_kind(path: str | Path) -> Literal["design", "field"]:
    """Tell a PBD design from a field snapshot by the first token of the file."""
    p = Path(path)
    if not p.is_file():
        raise IoError(f"File not found: {p}")
    with p.open("rb") as f:
        head = f.read(8)
    if head.startswith(b"PBD"):
        return "design"
    if head.startswith(FIELD_MAGIC.encode("ascii")):
        return "field"
    raise DesignFormatError(f"{p} is neither a PBD design nor a field snapshot")


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, model: MlpModel, adam: Optional[AdamState] = None) -> Path:
    """
    `<path>` holds little-endian float64 parameters, followed by the Adam
    first and second moments when given; `<path>.json` is the sidecar.
    """
    p = Path(path)
    arrays = [model.flat_parameters()]
    if adam is not None:
        arrays += [np.concatenate([m.ravel() for m in adam.m]),
                   np.concatenate([v.ravel() for v in adam.v])]
    data = np.concatenate(arrays).astype("<f8").tobytes()
    sidecar: dict[str, Any] = {
        "layer_sizes": list(model.layer_sizes),
        "activation": model.activation,
        "output_head": model.output_head,
        "num_parameters": model.num_parameters(),
        "sha256": hashlib.sha256(data).hexdigest(),
        "adam": None if adam is None else {
            "step": adam.step, "b1": adam.b1, "b2": adam.b2,
            "eps": adam.eps, "nesterov": adam.nesterov,
        },
    }
    atomic_write_bytes(p, data)
    atomic_write_text(p.with_name(p.name + ".json"), json.dumps(sidecar, indent=2) + "\n")
    return p


def load_checkpoint(path: str | Path) -> Tuple[MlpModel, Optional[AdamState]]:
    p = Path(path)
    side = p.with_name(p.name + ".json")
    if not p.is_file() or not side.is_file():
        raise IoError(f"Checkpoint {p} or its sidecar {side.name} is missing")
    data = p.read_bytes()
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DesignFormatError(f"Malformed checkpoint sidecar {side}") from exc
    if hashlib.sha256(data).hexdigest() != meta.get("sha256"):
        raise DesignFormatError(f"Checksum mismatch for checkpoint {p}")

    flat = np.frombuffer(data, dtype="<f8").astype(float)
    count = int(meta["num_parameters"])
    model = MlpModel.from_flat(meta["layer_sizes"], flat[:count],
                               output_head=meta["output_head"], activation=meta["activation"])
    adam_meta = meta.get("adam")
    if adam_meta is None:
        return model, None
    if flat.size != 3 * count:
        raise DesignFormatError(f"Checkpoint {p} has {flat.size} values, expected {3 * count}")
    m_model = MlpModel.from_flat(meta["layer_sizes"], flat[count:2 * count])
    v_model = MlpModel.from_flat(meta["layer_sizes"], flat[2 * count:])
    adam = AdamState(m=m_model.parameters(), v=v_model.parameters(), step=adam_meta["step"],
                     b1=adam_meta["b1"], b2=adam_meta["b2"], eps=adam_meta["eps"],
                     nesterov=adam_meta["nesterov"])
    return model, adam


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def resolve_config_path(file_path: str | Path) -> Path:
    """
    Allow calling with either:
      - "data/gol_bppo.toml"
      - "gol_bppo.toml"
    """
    p = Path(file_path)
    if p.is_file():
        return p
    candidate = DATA_DIR / p.name
    if candidate.is_file():
        return candidate
    return DATA_DIR / p


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(raw: dict[str, Any], source: str = "<config>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration in {source}: {_format_validation(exc)}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML experiment file with [environment], [algorithm], [run], [analysis]."""
    p = resolve_config_path(path)
    if not p.is_file():
        raise IoError(f"Config file not found: {path}")
    try:
        with p.open("rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"Config {p} is not valid TOML: {exc}") from exc
    return parse_config(raw, str(p))


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def trace_frame(result: RunResult) -> pd.DataFrame:
    rows = [(r.step, r.payoff, r.best_so_far, r.wall_ms) for r in result.trace]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def write_trace_csv(result: RunResult, path: str | Path) -> Path:
    return write_frame_csv(trace_frame(result), path)


def read_trace_csv(path: str | Path) -> pd.DataFrame:
    p = Path(path)
    if not p.is_file():
        raise IoError(f"Trace file not found: {p}")
    frame = pd.read_csv(p)
    if list(frame.columns) != TRACE_COLUMNS:
        raise DesignFormatError(f"{p} has columns {list(frame.columns)}, expected {TRACE_COLUMNS}")
    return frame


def write_frame_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    return atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def save_json(report: Any, path: str | Path) -> Path:
    return atomic_write_text(path, json.dumps(report, indent=2, default=str) + "\n")

