"""Experiment configuration documents: loading, validation, resolution.

Configs are JSON key-value trees mirroring :class:`ExperimentSpec` plus
output options. Validation is strict: unknown keys are rejected with the
offending path, and every reported problem carries its location so a config
error names exactly what to fix.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .experiments import (
    ExperimentSpec,
    InputSpec,
    SWEEPABLE,
    _error_model_from_dict,
)
from .protocols import GateSpec
from .statespace import BlochAxis

ENV_OUT_DIR = "HERALDSIM_OUT"


class ConfigError(Exception):
    """Invalid configuration; carries the JSON path of the problem."""

    def __init__(self, message: str, path: str = "$"):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class OutputOptions:
    directory: str
    prefix: str
    write_trajectories: bool = False
    write_branches: bool = False

    def to_dict(self) -> dict:
        return {
            "dir": self.directory,
            "prefix": self.prefix,
            "write_trajectories": self.write_trajectories,
            "write_branches": self.write_branches,
        }


@dataclass(frozen=True)
class SweepSettings:
    parameter: str
    values: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "values": list(self.values)}


@dataclass(frozen=True)
class ResolvedConfig:
    spec: ExperimentSpec
    output: OutputOptions
    sweep: SweepSettings | None = None

    def to_dict(self) -> dict:
        doc = self.spec.to_dict()
        doc["output"] = self.output.to_dict()
        if self.sweep is not None:
            doc["sweep"] = self.sweep.to_dict()
        return doc


def load_config(path: str | Path) -> dict:
    """Parse a JSON config file; syntax errors keep their line and column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def _reject_unknown(doc: dict, allowed: set[str], path: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", f"{path}.{key}")


def _get(doc: dict, key: str, kinds, path: str, default=None, required: bool = False):
    if key not in doc:
        if required:
            raise ConfigError(f"missing required key {key!r}", path)
        return default
    value = doc[key]
    kinds_t = kinds if isinstance(kinds, tuple) else (kinds,)
    # bool subclasses int; only accept it where bool is listed explicitly.
    ok = isinstance(value, kinds_t) and not (
        isinstance(value, bool) and bool not in kinds_t
    )
    if not ok:
        names = "/".join(k.__name__ for k in kinds_t)
        raise ConfigError(f"expected {names}, got {type(value).__name__}", f"{path}.{key}")
    return value


_ERROR_MODEL_KEYS = {
    "constant": {"kind", "delta_pi"},
    "gaussian_iid": {"kind", "sigma"},
    "linear_drift": {"kind", "start", "slope"},
    "random_walk": {"kind", "start", "sigma_step"},
}


def _parse_error_model(doc, path: str):
    if not isinstance(doc, dict):
        raise ConfigError("error_model must be an object", path)
    kind = _get(doc, "kind", str, path, required=True)
    if kind not in _ERROR_MODEL_KEYS:
        raise ConfigError(
            f"unknown error model kind {kind!r}; "
            f"choose from {sorted(_ERROR_MODEL_KEYS)}",
            f"{path}.kind",
        )
    _reject_unknown(doc, _ERROR_MODEL_KEYS[kind], path)
    for key, value in doc.items():
        if key != "kind" and not isinstance(value, (int, float)):
            raise ConfigError("expected a number", f"{path}.{key}")
    try:
        return _error_model_from_dict(doc)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc


def _parse_gate(doc, path: str) -> GateSpec:
    if not isinstance(doc, dict):
        raise ConfigError("gate must be an object", path)
    _reject_unknown(doc, {"theta", "phi", "theta_gate"}, path)
    theta = _get(doc, "theta", (int, float), path, required=True)
    phi = _get(doc, "phi", (int, float), path, default=0.0)
    theta_gate = _get(doc, "theta_gate", (int, float), path, required=True)
    try:
        return GateSpec(BlochAxis(float(theta), float(phi)), float(theta_gate))
    except ValueError as exc:
        raise ConfigError(str(exc), path) from exc


def _parse_input_state(doc, path: str) -> InputSpec:
    if not isinstance(doc, dict):
        raise ConfigError("input_state must be an object", path)
    _reject_unknown(doc, {"kind", "label", "amplitudes"}, path)
    kind = _get(doc, "kind", str, path, required=True)
    label = _get(doc, "label", str, path, default="")
    amps = None
    if "amplitudes" in doc:
        raw = doc["amplitudes"]
        if not isinstance(raw, list):
            raise ConfigError("amplitudes must be a list of [re, im] pairs", f"{path}.amplitudes")
        amps = []
        for i, pair in enumerate(raw):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(v, (int, float)) for v in pair)
            ):
                raise ConfigError(
                    "each amplitude must be a [re, im] pair", f"{path}.amplitudes[{i}]"
                )
            amps.append(complex(pair[0], pair[1]))
    try:
        return InputSpec(kind, label, tuple(amps) if amps is not None else None)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from exc


def _parse_crosstalk(doc, path: str) -> tuple[float, ...]:
    if not isinstance(doc, dict):
        raise ConfigError("crosstalk must be an object", path)
    _reject_unknown(doc, {"ratios"}, path)
    ratios = _get(doc, "ratios", list, path, required=True)
    out = []
    for i, r in enumerate(ratios):
        if not isinstance(r, (int, float)):
            raise ConfigError("expected a number", f"{path}.ratios[{i}]")
        out.append(float(r))
    return tuple(out)


def _parse_output(doc, path: str, command: str) -> OutputOptions:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("output must be an object", path)
    _reject_unknown(doc, {"dir", "prefix", "write_trajectories", "write_branches"}, path)
    directory = _get(doc, "dir", str, path, default=os.environ.get(ENV_OUT_DIR, "."))
    prefix = _get(doc, "prefix", str, path, default=command)
    write_traj = _get(doc, "write_trajectories", bool, path, default=False)
    write_branches = _get(doc, "write_branches", bool, path, default=False)
    return OutputOptions(directory, prefix, bool(write_traj), bool(write_branches))


def _parse_sweep(doc, path: str) -> SweepSettings:
    if not isinstance(doc, dict):
        raise ConfigError("sweep must be an object", path)
    _reject_unknown(doc, {"parameter", "values"}, path)
    parameter = _get(doc, "parameter", str, path, required=True)
    if parameter not in SWEEPABLE:
        raise ConfigError(
            f"unknown sweep parameter {parameter!r}; choose from {list(SWEEPABLE)}",
            f"{path}.parameter",
        )
    values = _get(doc, "values", list, path, required=True)
    if not values:
        raise ConfigError("values must be a non-empty list", f"{path}.values")
    out = []
    for i, v in enumerate(values):
        if not isinstance(v, (int, float)):
            raise ConfigError("expected a number", f"{path}.values[{i}]")
        out.append(float(v))
    return SweepSettings(parameter, tuple(out))


_TOP_KEYS = {
    "protocol",
    "gate",
    "error_model",
    "selectivity",
    "input_state",
    "trials",
    "master_seed",
    "mode",
    "fock_cutoff",
    "crosstalk",
    "target",
    "sweep",
    "output",
}

_DEFAULT_INPUT = {
    "single": InputSpec("basis", "0"),
    "cz": InputSpec("basis", "gg"),
}


def parse_config(doc: dict, command: str) -> ResolvedConfig:
    """Validate a raw config tree against a CLI command and resolve defaults.

    ``command`` is one of single/cz/addressing/sweep; for sweep the protocol
    comes from the config itself.
    """
    _reject_unknown(doc, _TOP_KEYS, "$")
    protocol = _get(doc, "protocol", str, "$", default=None)
    if command == "sweep":
        if protocol is None:
            raise ConfigError("sweep configs must name a protocol", "$")
        if "sweep" not in doc:
            raise ConfigError("missing required key 'sweep'", "$")
    else:
        if protocol is None:
            protocol = command
        elif protocol != command:
            raise ConfigError(
                f"protocol {protocol!r} does not match command {command!r}",
                "$.protocol",
            )
    if protocol not in ("single", "cz", "addressing"):
        raise ConfigError(f"unknown protocol {protocol!r}", "$.protocol")

    gate = None
    if protocol in ("single", "addressing"):
        if "gate" not in doc:
            raise ConfigError(f"protocol {protocol!r} requires a gate", "$")
        gate = _parse_gate(doc["gate"], "$.gate")
    elif "gate" in doc:
        raise ConfigError("the cz protocol takes no gate", "$.gate")

    if "error_model" not in doc:
        raise ConfigError("missing required key 'error_model'", "$")
    error_model = _parse_error_model(doc["error_model"], "$.error_model")

    selectivity = float(_get(doc, "selectivity", (int, float), "$", default=1.0))
    if not 0.0 <= selectivity <= 1.0:
        raise ConfigError(
            f"selectivity must lie in [0, 1], got {selectivity}", "$.selectivity"
        )

    trials = _get(doc, "trials", int, "$", required=True)
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}", "$.trials")
    master_seed = _get(doc, "master_seed", int, "$", required=True)
    mode = _get(doc, "mode", str, "$", default="branch")
    if mode not in ("branch", "mc"):
        raise ConfigError(f"mode must be 'branch' or 'mc', got {mode!r}", "$.mode")

    fock_cutoff = 3
    if protocol == "cz":
        fock_cutoff = _get(doc, "fock_cutoff", int, "$", default=3)
        if fock_cutoff < 2:
            raise ConfigError(
                f"fock_cutoff {fock_cutoff} is too small: the entangling protocol "
                "populates Fock 1 and needs headroom above it; use at least 2",
                "$.fock_cutoff",
            )
    elif "fock_cutoff" in doc:
        raise ConfigError("fock_cutoff applies to the cz protocol only", "$.fock_cutoff")

    crosstalk = None
    target = 0
    if protocol == "addressing":
        if "crosstalk" not in doc:
            raise ConfigError("the addressing protocol requires crosstalk ratios", "$")
        crosstalk = _parse_crosstalk(doc["crosstalk"], "$.crosstalk")
        target = _get(doc, "target", int, "$", default=0)
        if not 0 <= target < len(crosstalk):
            raise ConfigError(
                f"target {target} out of range for {len(crosstalk)} ions", "$.target"
            )
        if crosstalk[target] != 1.0:
            raise ConfigError(
                "the addressed ion must have crosstalk ratio 1.0", "$.crosstalk.ratios"
            )
        for j, r in enumerate(crosstalk):
            if j != target and not 0.0 <= r < 1.0:
                raise ConfigError(
                    f"neighbor ratio must lie in [0, 1), got {r}",
                    f"$.crosstalk.ratios[{j}]",
                )
    else:
        for key in ("crosstalk", "target"):
            if key in doc:
                raise ConfigError(
                    f"{key} applies to the addressing protocol only", f"$.{key}"
                )

    if "input_state" in doc:
        input_state = _parse_input_state(doc["input_state"], "$.input_state")
    elif protocol == "addressing":
        input_state = InputSpec("basis", "0" * len(crosstalk))
    else:
        input_state = _DEFAULT_INPUT[protocol]

    sweep_settings = None
    if "sweep" in doc:
        if command != "sweep":
            raise ConfigError("sweep settings are only used by the sweep command", "$.sweep")
        sweep_settings = _parse_sweep(doc["sweep"], "$.sweep")

    try:
        spec = ExperimentSpec(
            protocol=protocol,
            error_model=error_model,
            input_state=input_state,
            trials=trials,
            master_seed=master_seed,
            gate=gate,
            selectivity=selectivity,
            mode=mode,
            fock_cutoff=fock_cutoff,
            crosstalk=crosstalk,
            target=target,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "$") from exc

    output = _parse_output(doc.get("output"), "$.output", command)
    return ResolvedConfig(spec, output, sweep_settings)


def format_float(x: float) -> str:
    """Fixed 17-significant-digit text form; round-trips float64 exactly."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.17g}"
