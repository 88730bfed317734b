"""Versioned JSON checkpoints; arrays are stored as nested number lists."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .loop import ExperimentConfig, RunState
from .models import PolicyParams, ValueParams

FORMAT = "bigworld-checkpoint"
VERSION = 1


def _opt_state_to_json(state):
    if state is None:
        return None
    out = {"kind": state["kind"], "t": state["t"]}
    for key in ("m", "v"):
        if key in state:
            out[key] = [a.tolist() for a in state[key]]
    return out


def _opt_state_from_json(data):
    if data is None:
        return None
    out = {"kind": data["kind"], "t": int(data["t"])}
    for key in ("m", "v"):
        if key in data:
            out[key] = [np.asarray(a, dtype=np.float64) for a in data[key]]
    return out


def checkpoint_dict(state: RunState, cfg: ExperimentConfig) -> dict:
    pol = state.policy
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": cfg.to_dict(),
        "step": state.step,
        "seed": state.seed,
        "smoothed": state.smoothed,
        "policy_updates": state.policy_updates,
        "value_updates": state.value_updates,
        "behaviour": state.behaviour.tolist(),
        "policy": {
            "weights": [w.tolist() for w in pol.weights],
            "biases": None if pol.biases is None else [c.tolist() for c in pol.biases],
            "opt_state": _opt_state_to_json(pol.opt_state),
        },
        "value": {"W": state.value.W.tolist(), "opt_state": _opt_state_to_json(state.value.opt_state)},
    }


def save_checkpoint(path, state: RunState, cfg: ExperimentConfig):
    Path(path).write_text(json.dumps(checkpoint_dict(state, cfg)))


def load_checkpoint(path) -> tuple[RunState, ExperimentConfig]:
    data = json.loads(Path(path).read_text())
    if data.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    if data.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {data.get('version')}")
    cfg = ExperimentConfig.from_dict(data["config"])
    p = data["policy"]
    policy = PolicyParams(cfg.policy_spec, p["weights"], p["biases"], _opt_state_from_json(p["opt_state"]))
    value = ValueParams(data["value"]["W"], _opt_state_from_json(data["value"]["opt_state"]))
    state = RunState(np.asarray(data["behaviour"], dtype=np.float64), policy, value, data["step"], data["seed"],
                     data["smoothed"], data["policy_updates"], data["value_updates"])
    return state, cfg
