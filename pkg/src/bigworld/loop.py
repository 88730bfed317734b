"""Online self-prediction experiment: one policy step and one value step per timestep."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .interactivity import policy_objective
from .models import (
    NonFiniteError,
    OptimizerConfig,
    PolicyParams,
    PolicySpec,
    ValueParams,
    init_policy,
    init_value,
    policy_forward,
    policy_step,
    td_error,
    value_update_committed,
)

N_LOGGED_COMPONENTS = 8
CSV_COLUMNS = (
    ["step", "interactivity", "static", "dynamic", "smoothed", "delta_norm"]
    + [f"b{i}" for i in range(N_LOGGED_COMPONENTS)]
    + ["bnorm", "wall_ms"]
)
CONTROL_MODES = ("freeze_policy", "freeze_value", "freeze_both")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class PolicyConfig:
    width: int = 64
    depth: int = 2
    activation: str = "linear"
    bias: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 64
    horizon: int = 10
    steps: int = 10000
    gamma: float = 0.9
    eta_inner: float = 0.01
    seed: int = 0
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    policy_opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    value_opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    freeze_policy_at: Optional[int] = None
    freeze_value_at: Optional[int] = None
    log_every: int = 1
    smoothing_half_life: float = 200.0
    detach_bootstrap: bool = False
    record_wall_time: bool = False

    def validate(self) -> list[str]:
        errors = []
        for name in ("d", "horizon", "log_every"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.steps < 0:
            errors.append(f"steps must be >= 0, got {self.steps}")
        if not 0.0 <= self.gamma <= 1.0:
            errors.append(f"gamma must be in [0, 1], got {self.gamma}")
        if self.eta_inner < 0:
            errors.append(f"eta_inner must be >= 0, got {self.eta_inner}")
        if not self.smoothing_half_life > 0:
            errors.append(f"smoothing_half_life must be > 0, got {self.smoothing_half_life}")
        for name in ("freeze_policy_at", "freeze_value_at"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= self.steps:
                errors.append(f"{name} must be in [0, steps], got {v}")
        try:
            self.policy_spec
        except ValueError as exc:
            errors.append(f"policy: {exc}")
        return errors

    @property
    def policy_spec(self) -> PolicySpec:
        p = self.policy
        return PolicySpec(self.d, p.width, p.depth, p.activation, p.bias)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build and validate; unknown keys and bad values raise :class:`ConfigError`."""
        errors = []
        kwargs = {}
        sub = {"policy": PolicyConfig, "policy_opt": OptimizerConfig, "value_opt": OptimizerConfig}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                errors.append(f"unknown key {key!r}")
            elif key in sub:
                if not isinstance(value, dict):
                    errors.append(f"{key} must be a mapping")
                    continue
                sub_known = {f.name for f in fields(sub[key])}
                bad = [k for k in value if k not in sub_known]
                errors.extend(f"unknown key '{key}.{k}'" for k in bad)
                if not bad:
                    try:
                        kwargs[key] = sub[key](**value)
                    except (TypeError, ValueError) as exc:
                        errors.append(f"{key}: {exc}")
            else:
                kwargs[key] = value
        if errors:
            raise ConfigError(errors)
        try:
            cfg = cls(**kwargs)
            errors = cfg.validate()
        except TypeError as exc:
            errors = [str(exc)]
        if errors:
            raise ConfigError(errors)
        return cfg

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply flat dotted overrides such as ``{"policy.depth": 4}``."""
        data = self.to_dict()
        for key, value in overrides.items():
            parts = key.split(".")
            target = data
            for p in parts[:-1]:
                if not isinstance(target.get(p), dict):
                    raise ConfigError([f"unknown key {key!r}"])
                target = target[p]
            target[parts[-1]] = value
        return ExperimentConfig.from_dict(data)


@dataclass
class RunState:
    behaviour: np.ndarray
    policy: PolicyParams
    value: ValueParams
    step: int = 0
    seed: int = 0
    smoothed: Optional[float] = None
    policy_updates: int = 0
    value_updates: int = 0


@dataclass(frozen=True)
class MetricsRecord:
    step: int
    interactivity: float
    static_complexity: float
    dynamic_complexity: float
    smoothed_interactivity: float
    delta_norm: float
    components: tuple
    behaviour_norm: float
    wall_ms: float = 0.0

    def csv_row(self) -> list[str]:
        comps = [_fmt(c) for c in self.components]
        comps += [""] * (N_LOGGED_COMPONENTS - len(comps))
        return (
            [str(self.step)]
            + [_fmt(x) for x in (self.interactivity, self.static_complexity, self.dynamic_complexity,
                                 self.smoothed_interactivity, self.delta_norm)]
            + comps
            + [_fmt(self.behaviour_norm), _fmt(self.wall_ms)]
        )


def _fmt(x) -> str:
    return repr(float(x))


@dataclass
class RunResult:
    records: list
    state: RunState
    diverged: bool = False
    error: Optional[str] = None


def init_run(cfg: ExperimentConfig) -> RunState:
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    policy_seed, value_seed, b_seed = np.random.SeedSequence(cfg.seed).spawn(3)
    policy = init_policy(cfg.policy_spec, policy_seed)
    value = init_value(cfg.d, value_seed)
    b0 = np.random.default_rng(b_seed).normal(0.0, 1.0 / math.sqrt(cfg.d), size=cfg.d)
    return RunState(b0, policy, value, 0, cfg.seed)


def _ema_alpha(half_life: float) -> float:
    return 1.0 - 0.5 ** (1.0 / half_life)


def run_step(state: RunState, cfg: ExperimentConfig) -> tuple[RunState, MetricsRecord]:
    t0 = time.perf_counter()
    t = state.step
    freeze_policy = cfg.freeze_policy_at is not None and t >= cfg.freeze_policy_at
    freeze_value = cfg.freeze_value_at is not None and t >= cfg.freeze_value_at
    eta = 0.0 if freeze_value else cfg.eta_inner
    b = state.behaviour

    try:
        obj = policy_objective(state.policy, b, cfg.horizon, state.value.W, cfg.gamma, eta,
                               detach_bootstrap=cfg.detach_bootstrap)
    except NonFiniteError as exc:
        raise NonFiniteError(f"rollout {exc.what}", t) from None
    est = obj.estimate

    policy, policy_updates = state.policy, state.policy_updates
    if not freeze_policy:
        try:
            policy = policy_step(policy, obj.gradient(), cfg.policy_opt)
        except NonFiniteError as exc:
            raise NonFiniteError(exc.what, t) from None
        policy_updates += 1

    b_next = policy_forward(policy, b)
    if not np.all(np.isfinite(b_next)):
        raise NonFiniteError("behaviour", t)

    value, value_updates = state.value, state.value_updates
    if freeze_value:
        delta = td_error(value.W, b, b_next, cfg.gamma)
    else:
        try:
            value, delta = value_update_committed(value, b, b_next, cfg.gamma, cfg.value_opt)
        except NonFiniteError as exc:
            raise NonFiniteError(exc.what, t) from None
        value_updates += 1

    if state.smoothed is None:
        smoothed = est.interactivity
    else:
        smoothed = state.smoothed + _ema_alpha(cfg.smoothing_half_life) * (est.interactivity - state.smoothed)

    wall = (time.perf_counter() - t0) * 1000.0 if cfg.record_wall_time else 0.0
    record = MetricsRecord(
        step=t,
        interactivity=est.interactivity,
        static_complexity=est.static_complexity,
        dynamic_complexity=est.dynamic_complexity,
        smoothed_interactivity=smoothed,
        delta_norm=float(np.linalg.norm(delta)),
        components=tuple(float(x) for x in b[:N_LOGGED_COMPONENTS]),
        behaviour_norm=float(np.linalg.norm(b)),
        wall_ms=wall,
    )
    new_state = RunState(b_next, policy, value, t + 1, state.seed, smoothed, policy_updates, value_updates)
    return new_state, record


def run_experiment(cfg: ExperimentConfig, on_record: Optional[Callable[[MetricsRecord], None]] = None,
                   state: Optional[RunState] = None) -> RunResult:
    """Iterate :func:`run_step` until ``cfg.steps``; divergence ends the run early.

    Records are kept every ``log_every`` steps. On divergence the records
    collected so far are returned with ``diverged=True``.
    """
    if state is None:
        state = init_run(cfg)
    records = []
    while state.step < cfg.steps:
        try:
            state, rec = run_step(state, cfg)
        except NonFiniteError as exc:
            return RunResult(records, state, True, str(exc))
        if rec.step % cfg.log_every == 0:
            records.append(rec)
            if on_record is not None:
                on_record(rec)
    return RunResult(records, state)


def run_control(cfg: ExperimentConfig, mode: str, freeze_at: Optional[int] = None, **kwargs) -> RunResult:
    """Same loop with policy and/or value learning switched off from ``freeze_at``."""
    if mode not in CONTROL_MODES:
        raise ValueError(f"mode must be one of {CONTROL_MODES}, got {mode!r}")
    at = 0 if freeze_at is None else freeze_at
    changes = {}
    if mode in ("freeze_policy", "freeze_both"):
        changes["freeze_policy_at"] = at
    if mode in ("freeze_value", "freeze_both"):
        changes["freeze_value_at"] = at
    return run_experiment(replace(cfg, **changes), **kwargs)


def final_window_mean(records: Iterable[MetricsRecord], fraction: float = 0.2,
                      key: str = "smoothed_interactivity") -> float:
    recs = list(records)
    if not recs:
        return float("nan")
    n = max(1, int(round(len(recs) * fraction)))
    return float(np.mean([getattr(r, key) for r in recs[-n:]]))


def records_to_csv(records: Iterable[MetricsRecord], stream=None) -> str:
    buf = stream if stream is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue() if stream is None else ""


def read_metrics_csv(path) -> dict:
    """Columns of a metrics CSV as float lists; checks the header first."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        missing = [c for c in ("step", "interactivity", "smoothed") if c not in header]
        if missing:
            raise ValueError(f"{path}: missing column {missing[0]!r}")
        cols = {h: [] for h in header}
        for row in reader:
            for h, v in zip(header, row):
                cols[h].append(float(v) if v != "" else float("nan"))
    return cols
