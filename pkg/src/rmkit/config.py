"""Experiment configuration files: versioned, line-oriented ``key = value``.

Two sections mirror the runtime dataclasses, with the task and agent at the
top level::

    experiment v1
    task = 1
    agent = nrm
    [train]
    episodes = 3000
    seeds = 0,1,2
    [grid]
    width = 5
    height = 5
    start = 0,0
    items = a@2,0 b@4,1 c@2,2 d@0,3

Unknown keys are rejected so a typo cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import fields, replace

from .errors import MachineFormatError
from .gridworld import GridConfig
from .training import TrainConfig

CONFIG_HEADER = "experiment v1"

_TRAIN_KEYS = {f.name: f.type for f in fields(TrainConfig)}
_GRID_SIMPLE_KEYS = ("width", "height", "t_max", "empty_symbol")


def _parse_scalar(raw: str, like) -> object:
    if isinstance(like, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def _parse_items(raw: str):
    items = []
    for chunk in raw.split():
        try:
            symbol, cell = chunk.split("@")
            x, y = cell.split(",")
            items.append(((int(x), int(y)), symbol))
        except ValueError as exc:
            raise MachineFormatError(f"bad items entry {chunk!r} (want sym@x,y)") from exc
    return tuple(items)


def parse_experiment_config(text: str) -> dict:
    """Parse config text into {'task', 'agent', 'train': TrainConfig, 'grid': GridConfig}."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != CONFIG_HEADER:
        raise MachineFormatError(f"expected header {CONFIG_HEADER!r}")
    section = ""
    top: dict[str, str] = {}
    train_kv: dict[str, str] = {}
    grid_kv: dict[str, str] = {}
    for ln in lines[1:]:
        if ln.startswith("[") and ln.endswith("]"):
            section = ln[1:-1]
            if section not in ("train", "grid"):
                raise MachineFormatError(f"unknown section [{section}]")
            continue
        if "=" not in ln:
            raise MachineFormatError(f"expected 'key = value', got {ln!r}")
        key, _, value = ln.partition("=")
        key, value = key.strip(), value.strip()
        target = {"": top, "train": train_kv, "grid": grid_kv}[section]
        if key in target:
            raise MachineFormatError(f"duplicate key {key!r}")
        target[key] = value

    unknown_top = set(top) - {"task", "agent"}
    if unknown_top:
        raise MachineFormatError(f"unknown top-level keys {sorted(unknown_top)}")

    train = TrainConfig()
    for key, raw in train_kv.items():
        if key not in _TRAIN_KEYS:
            raise MachineFormatError(f"unknown [train] key {key!r}")
        current = getattr(train, key)
        if key == "seeds":
            value = tuple(int(v) for v in raw.split(","))
        else:
            value = _parse_scalar(raw, current)
        train = replace(train, **{key: value})

    grid = GridConfig()
    grid_updates = {}
    for key, raw in grid_kv.items():
        if key in _GRID_SIMPLE_KEYS:
            grid_updates[key] = _parse_scalar(raw, getattr(grid, key))
        elif key == "start":
            x, y = raw.split(",")
            grid_updates["start"] = (int(x), int(y))
        elif key == "items":
            grid_updates["items"] = _parse_items(raw)
        elif key == "alphabet":
            grid_updates["alphabet"] = tuple(raw.split(","))
        else:
            raise MachineFormatError(f"unknown [grid] key {key!r}")
    grid = replace(grid, **grid_updates)

    return {
        "task": top.get("task"),
        "agent": top.get("agent"),
        "train": train,
        "grid": grid,
    }


def format_experiment_config(task, agent, train: TrainConfig, grid: GridConfig) -> str:
    """Inverse of :func:`parse_experiment_config` for the non-default fields."""
    lines = [CONFIG_HEADER]
    if task is not None:
        lines.append(f"task = {task}")
    if agent is not None:
        lines.append(f"agent = {agent}")
    default_train = TrainConfig()
    train_lines = []
    for f in fields(TrainConfig):
        value = getattr(train, f.name)
        if value != getattr(default_train, f.name):
            text = ",".join(str(s) for s in value) if f.name == "seeds" else str(value)
            train_lines.append(f"{f.name} = {text}")
    if train_lines:
        lines.append("[train]")
        lines.extend(train_lines)
    default_grid = GridConfig()
    grid_lines = []
    for name in _GRID_SIMPLE_KEYS:
        if getattr(grid, name) != getattr(default_grid, name):
            grid_lines.append(f"{name} = {getattr(grid, name)}")
    if grid.start != default_grid.start:
        grid_lines.append(f"start = {grid.start[0]},{grid.start[1]}")
    if grid.items != default_grid.items:
        items = " ".join(f"{sym}@{x},{y}" for (x, y), sym in grid.items)
        grid_lines.append(f"items = {items}")
    if grid.alphabet != default_grid.alphabet:
        grid_lines.append("alphabet = " + ",".join(grid.alphabet))
    if grid_lines:
        lines.append("[grid]")
        lines.extend(grid_lines)
    return "\n".join(lines) + "\n"
