"""Ensemble runner and analytics for the certified protocols.

An :class:`ExperimentSpec` fixes everything about a run: protocol, gate,
error model, selectivity, input preparation, trial count, master seed and
execution mode. Trajectories draw their own error sequences (and, in mc
mode, herald samples) from per-index generators split off the master seed,
so results are bit-identical for a given spec regardless of how trajectories
are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .noise import AmplitudeErrorModel, sample_errors_counted, trajectory_rng
from .protocols import (
    CrosstalkProfile,
    GateSpec,
    addressed_steps,
    bare_single_qubit,
    certified_addressed_gate,
    certified_cz,
    certified_single_qubit,
    cz_space,
    cz_steps,
    ideal_addressed_output,
    ideal_cz_output,
    ideal_single_qubit_output,
    no_flag_branch,
    run_protocol,
    single_qubit_steps,
)
from .statespace import (
    BlochAxis,
    IonLevel,
    PureState,
    StateSpace,
    fidelity_up_to_global_phase,
    make_state,
    plus_minus_n_vectors,
)

PROTOCOLS = ("single", "cz", "addressing")
N_STEPS = {"single": 2, "cz": 4, "addressing": 2}

_WILSON_Z = 1.96  # 95% interval


@dataclass(frozen=True)
class InputSpec:
    """Named input preparation.

    Kinds: ``basis`` (label names the product basis state), ``plus_n``
    (every ion in the +1 eigenstate of the gate axis), ``bell`` (two-qubit
    gg + ee superposition), ``amplitudes`` (explicit qubit-manifold
    amplitudes, ion-major).
    """

    kind: str
    label: str = ""
    amplitudes: tuple[complex, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("basis", "plus_n", "bell", "amplitudes"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.amplitudes is not None:
            object.__setattr__(
                self, "amplitudes", tuple(complex(a) for a in self.amplitudes)
            )


@dataclass(frozen=True)
class ExperimentSpec:
    """Full, serializable description of one ensemble run."""

    protocol: str
    error_model: AmplitudeErrorModel
    input_state: InputSpec
    trials: int
    master_seed: int
    gate: GateSpec | None = None
    selectivity: float = 1.0
    mode: str = "branch"
    fock_cutoff: int = 3
    crosstalk: tuple[float, ...] | None = None
    target: int = 0

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.mode not in ("branch", "mc"):
            raise ValueError(f"mode must be 'branch' or 'mc', got {self.mode!r}")
        if not 0.0 <= self.selectivity <= 1.0:
            raise ValueError(f"selectivity must lie in [0, 1], got {self.selectivity}")
        if self.protocol in ("single", "addressing") and self.gate is None:
            raise ValueError(f"protocol {self.protocol!r} requires a gate")
        if self.protocol == "addressing" and self.crosstalk is None:
            raise ValueError("addressing protocol requires crosstalk ratios")
        if self.crosstalk is not None:
            object.__setattr__(self, "crosstalk", tuple(float(r) for r in self.crosstalk))

    @property
    def n_steps(self) -> int:
        return N_STEPS[self.protocol]

    def to_dict(self) -> dict:
        doc: dict = {
            "protocol": self.protocol,
            "error_model": _error_model_to_dict(self.error_model),
            "input_state": _input_to_dict(self.input_state),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "selectivity": self.selectivity,
            "mode": self.mode,
        }
        if self.gate is not None:
            doc["gate"] = {
                "theta": self.gate.axis.theta,
                "phi": self.gate.axis.phi,
                "theta_gate": self.gate.theta_gate,
            }
        if self.protocol == "cz":
            doc["fock_cutoff"] = self.fock_cutoff
        if self.protocol == "addressing":
            doc["crosstalk"] = {"ratios": list(self.crosstalk)}
            doc["target"] = self.target
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        gate = None
        if "gate" in doc:
            g = doc["gate"]
            gate = GateSpec(BlochAxis(g["theta"], g.get("phi", 0.0)), g["theta_gate"])
        crosstalk = None
        if "crosstalk" in doc:
            crosstalk = tuple(doc["crosstalk"]["ratios"])
        return cls(
            protocol=doc["protocol"],
            error_model=_error_model_from_dict(doc["error_model"]),
            input_state=_input_from_dict(doc["input_state"]),
            trials=doc["trials"],
            master_seed=doc["master_seed"],
            gate=gate,
            selectivity=doc.get("selectivity", 1.0),
            mode=doc.get("mode", "branch"),
            fock_cutoff=doc.get("fock_cutoff", 3),
            crosstalk=crosstalk,
            target=doc.get("target", 0),
        )


def _error_model_to_dict(model: AmplitudeErrorModel) -> dict:
    doc = {"kind": model.kind}
    if model.kind == "constant":
        doc["delta_pi"] = model.value
    elif model.kind == "gaussian_iid":
        doc["sigma"] = model.sigma
    elif model.kind == "linear_drift":
        doc["start"] = model.value
        doc["slope"] = model.slope
    else:
        doc["start"] = model.value
        doc["sigma_step"] = model.sigma
    return doc


def _error_model_from_dict(doc: dict) -> AmplitudeErrorModel:
    kind = doc["kind"]
    if kind == "constant":
        return AmplitudeErrorModel.constant(doc.get("delta_pi", 0.0))
    if kind == "gaussian_iid":
        return AmplitudeErrorModel.gaussian_iid(doc["sigma"])
    if kind == "linear_drift":
        return AmplitudeErrorModel.linear_drift(doc.get("start", 0.0), doc.get("slope", 0.0))
    if kind == "random_walk":
        return AmplitudeErrorModel.random_walk(doc["sigma_step"], doc.get("start", 0.0))
    raise ValueError(f"unknown error model kind {kind!r}")


def _input_to_dict(inp: InputSpec) -> dict:
    doc: dict = {"kind": inp.kind}
    if inp.label:
        doc["label"] = inp.label
    if inp.amplitudes is not None:
        doc["amplitudes"] = [[a.real, a.imag] for a in inp.amplitudes]
    return doc


def _input_from_dict(doc: dict) -> InputSpec:
    amps = None
    if "amplitudes" in doc:
        amps = tuple(complex(re, im) for re, im in doc["amplitudes"])
    return InputSpec(doc["kind"], doc.get("label", ""), amps)


# --- input preparation -------------------------------------------------------

_CHAR_AMPS = {
    "0": (1.0, 0.0),
    "1": (0.0, 1.0),
    "+": (math.sqrt(0.5), math.sqrt(0.5)),
    "-": (math.sqrt(0.5), -math.sqrt(0.5)),
}


def _space_for(spec: ExperimentSpec) -> StateSpace:
    if spec.protocol == "single":
        return StateSpace(1)
    if spec.protocol == "cz":
        return cz_space(spec.fock_cutoff)
    return StateSpace(len(spec.crosstalk))


def _qubit_product_state(space: StateSpace, per_ion: list[tuple[complex, complex]]) -> PureState:
    entries = []
    for bits in np.ndindex(*(2,) * space.n_ions):
        amp = 1.0 + 0.0j
        for ion, b in enumerate(bits):
            amp *= per_ion[ion][b]
        if amp != 0.0:
            entries.append((space.index([IonLevel(b) for b in bits]), amp))
    return make_state(space, entries)


def prepare_input(spec: ExperimentSpec) -> PureState:
    """Build the initial state named by the spec's input preparation."""
    space = _space_for(spec)
    inp = spec.input_state
    if inp.kind == "plus_n":
        if spec.gate is None:
            raise ValueError("plus_n input requires a gate axis")
        plus, _ = plus_minus_n_vectors(spec.gate.axis)
        return _qubit_product_state(space, [(plus[0], plus[1])] * space.n_ions)
    if inp.kind == "bell":
        if spec.protocol != "cz":
            raise ValueError("bell input applies to the cz protocol only")
        return make_state(
            space, [(space.index([0, 0]), 1.0), (space.index([1, 1]), 1.0)]
        )
    if inp.kind == "basis":
        label = inp.label
        if spec.protocol == "cz":
            if len(label) != 2 or any(ch not in "ge" for ch in label):
                raise ValueError(f"cz basis label must be two of g/e, got {label!r}")
            levels = [IonLevel.Q1 if ch == "e" else IonLevel.Q0 for ch in label]
            return make_state(space, [(space.index(levels), 1.0)])
        if len(label) != space.n_ions or any(ch not in _CHAR_AMPS for ch in label):
            raise ValueError(
                f"basis label {label!r} must have one of 0/1/+/- per ion"
            )
        return _qubit_product_state(space, [_CHAR_AMPS[ch] for ch in label])
    # explicit amplitudes over the qubit manifold, ion-major
    amps = inp.amplitudes
    expected = 2**space.n_ions
    if amps is None or len(amps) != expected:
        raise ValueError(f"expected {expected} qubit-manifold amplitudes")
    entries = []
    for k, a in enumerate(amps):
        bits = [(k >> (space.n_ions - 1 - ion)) & 1 for ion in range(space.n_ions)]
        entries.append((space.index([IonLevel(b) for b in bits]), a))
    return make_state(space, entries)


def _ideal_output(spec: ExperimentSpec, state: PureState) -> PureState:
    if spec.protocol == "single":
        return ideal_single_qubit_output(state, spec.gate)
    if spec.protocol == "cz":
        return ideal_cz_output(state)
    return ideal_addressed_output(state, spec.target, spec.gate)


def _step_builder(spec: ExperimentSpec) -> Callable[[tuple[float, ...]], tuple]:
    if spec.protocol == "single":
        gate, s = spec.gate, spec.selectivity
        build = lambda errs: single_qubit_steps(gate, errs, s)
    elif spec.protocol == "cz":
        s, space = spec.selectivity, _space_for(spec)
        build = lambda errs: cz_steps(errs, s, space)
    else:
        gate, s = spec.gate, spec.selectivity
        xtalk, target = CrosstalkProfile(spec.crosstalk), spec.target
        build = lambda errs: addressed_steps(gate, xtalk, target, errs, s)
    return lru_cache(maxsize=64)(build)


def _validate_once(spec: ExperimentSpec, state: PureState) -> None:
    zero = (0.0,) * spec.n_steps
    if spec.protocol == "single":
        certified_single_qubit(state, spec.gate, zero, spec.selectivity)
    elif spec.protocol == "cz":
        certified_cz(state, zero, spec.selectivity)
    else:
        certified_addressed_gate(
            state, spec.target, spec.gate, CrosstalkProfile(spec.crosstalk), zero,
            spec.selectivity,
        )


# --- trajectory execution ----------------------------------------------------


@dataclass(frozen=True)
class TrajectoryRow:
    """Per-trajectory record, identical across worker layouts."""

    index: int
    no_flag_probability: float
    fidelity: float  # 0.0 with zero no-flag weight when undefined
    flagged: bool | None  # mc mode only
    step_flags: tuple[tuple[int, int, float], ...]  # (step, ion, flag value or rate)
    clamp_count: int
    error_sumsq: float
    n_errors: int


def _run_one(
    spec: ExperimentSpec,
    index: int,
    state: PureState,
    ideal: PureState,
    build_steps: Callable,
) -> TrajectoryRow:
    rng = trajectory_rng(spec.master_seed, index)
    errors, clamps = sample_errors_counted(spec.error_model, spec.n_steps, rng)
    steps = build_steps(tuple(errors))
    outcome = run_protocol(
        state,
        steps,
        spec.mode,
        rng=rng if spec.mode == "mc" else None,
        monitor_top_fock=(spec.protocol == "cz"),
    )
    sumsq = sum(v * v for v in errors)
    if spec.mode == "branch":
        survivor = no_flag_branch(outcome)
        if survivor is None:
            return TrajectoryRow(index, 0.0, 0.0, None, (), clamps, sumsq, len(errors))
        fid = fidelity_up_to_global_phase(survivor.state, ideal)
        flags = tuple(
            (r.step_index, r.ion, 1.0 - r.branch_probability) for r in survivor.records
        )
        return TrajectoryRow(
            index, survivor.probability, fid, None, flags, clamps, sumsq, len(errors)
        )
    branch = outcome.branches[0]
    flagged = branch.flagged
    fid = (
        fidelity_up_to_global_phase(branch.state, ideal) if branch.state is not None else 0.0
    )
    flags = tuple(
        (r.step_index, r.ion, 1.0 if r.flagged else 0.0) for r in branch.records
    )
    return TrajectoryRow(
        index, 0.0 if flagged else 1.0, fid, flagged, flags, clamps, sumsq, len(errors)
    )


def _run_batch(spec: ExperimentSpec, start: int, stop: int) -> list[TrajectoryRow]:
    state = prepare_input(spec)
    ideal = _ideal_output(spec, state)
    build_steps = _step_builder(spec)
    return [_run_one(spec, i, state, ideal, build_steps) for i in range(start, stop)]


# --- statistics --------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleStatistics:
    """Aggregated herald and fidelity statistics of one ensemble."""

    trials: int
    mode: str
    herald_rate: float
    herald_rate_se: float
    wilson_interval: tuple[float, float] | None
    conditional_fidelity: float | None
    conditional_fidelity_se: float | None
    unconditional_fidelity: float
    n_unflagged: int
    step_flag_rates: dict[tuple[int, int], float] = field(default_factory=dict)
    clamp_count: int = 0
    rms_error: float = 0.0
    quadratic_no_flag_approx: float = 1.0

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "mode": self.mode,
            "herald_rate": self.herald_rate,
            "herald_rate_se": self.herald_rate_se,
            "wilson_interval": list(self.wilson_interval) if self.wilson_interval else None,
            "conditional_fidelity": self.conditional_fidelity,
            "conditional_fidelity_se": self.conditional_fidelity_se,
            "unconditional_fidelity": self.unconditional_fidelity,
            "n_unflagged": self.n_unflagged,
            "step_flag_rates": [
                [step, ion, rate]
                for (step, ion), rate in sorted(self.step_flag_rates.items())
            ],
            "clamp_count": self.clamp_count,
            "rms_error": self.rms_error,
            "quadratic_no_flag_approx": self.quadratic_no_flag_approx,
        }


def _wilson(rate: float, n: int) -> tuple[float, float]:
    z2 = _WILSON_Z**2
    denom = 1.0 + z2 / n
    center = (rate + z2 / (2 * n)) / denom
    half = _WILSON_Z * math.sqrt(rate * (1.0 - rate) / n + z2 / (4 * n * n)) / denom
    return center - half, center + half


def _reduce(spec: ExperimentSpec, rows: list[TrajectoryRow]) -> EnsembleStatistics:
    rows = sorted(rows, key=lambda r: r.index)
    n = len(rows)
    noflag = np.array([r.no_flag_probability for r in rows])
    fid = np.array([r.fidelity for r in rows])
    flag_prob = 1.0 - noflag
    herald_rate = float(np.mean(flag_prob))
    weight_sum = float(np.sum(noflag))
    clamp_count = sum(r.clamp_count for r in rows)
    sumsq = float(np.sum(np.array([r.error_sumsq for r in rows])))
    n_err = sum(r.n_errors for r in rows)
    rms_error = math.sqrt(sumsq / n_err) if n_err else 0.0
    quad = 1.0 - spec.n_steps * (rms_error / 2.0) ** 2

    if spec.mode == "mc":
        n_unflagged = int(np.sum(noflag > 0.0))
        se = math.sqrt(herald_rate * (1.0 - herald_rate) / n)
        wilson = _wilson(herald_rate, n)
        if n_unflagged > 0:
            kept = fid[noflag > 0.0]
            cond = float(np.mean(kept))
            cond_se = (
                float(np.std(kept, ddof=1) / math.sqrt(n_unflagged))
                if n_unflagged > 1
                else 0.0
            )
        else:
            cond = cond_se = None
        uncond = float(np.sum(fid[noflag > 0.0]) / n) if n_unflagged else 0.0
    else:
        n_unflagged = int(np.sum(noflag > 0.0))
        se = float(np.std(flag_prob, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        wilson = None
        if weight_sum > 0.0:
            cond = float(np.sum(noflag * fid) / weight_sum)
            var = float(np.sum(noflag * (fid - cond) ** 2) / weight_sum)
            cond_se = math.sqrt(max(var, 0.0) / n)
        else:
            cond = cond_se = None
        uncond = float(np.sum(noflag * fid) / n)

    step_rates: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}
    for r in rows:
        for step, ion, value in r.step_flags:
            key = (step, ion)
            step_rates[key] = step_rates.get(key, 0.0) + value
            counts[key] = counts.get(key, 0) + 1
    step_rates = {k: v / counts[k] for k, v in step_rates.items()}

    return EnsembleStatistics(
        trials=n,
        mode=spec.mode,
        herald_rate=herald_rate,
        herald_rate_se=se,
        wilson_interval=wilson,
        conditional_fidelity=cond,
        conditional_fidelity_se=cond_se,
        unconditional_fidelity=uncond,
        n_unflagged=n_unflagged,
        step_flag_rates=step_rates,
        clamp_count=clamp_count,
        rms_error=rms_error,
        quadratic_no_flag_approx=quad,
    )


def run_ensemble(
    spec: ExperimentSpec, workers: int = 1, return_rows: bool = False
):
    """Run the ensemble; deterministic for a given spec, any worker count.

    With ``return_rows`` the sorted per-trajectory rows are returned next to
    the statistics (used for trajectory tables).
    """
    state = prepare_input(spec)
    _validate_once(spec, state)
    if workers <= 1 or spec.trials < 2 * workers:
        rows = _run_batch(spec, 0, spec.trials)
    else:
        bounds = np.linspace(0, spec.trials, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_batch, spec, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            rows = [row for fut in futures for row in fut.result()]
    rows = sorted(rows, key=lambda r: r.index)
    stats = _reduce(spec, rows)
    if return_rows:
        return stats, rows
    return stats


def enumerate_trajectory(spec: ExperimentSpec, index: int = 0):
    """Exact branch enumeration for one trajectory's error draw.

    Used for branch tables: the outcome lists every herald branch and the
    surviving final state for the errors of the given trajectory index.
    """
    state = prepare_input(spec)
    _validate_once(spec, state)
    rng = trajectory_rng(spec.master_seed, index)
    errors, _ = sample_errors_counted(spec.error_model, spec.n_steps, rng)
    steps = _step_builder(spec)(tuple(errors))
    return run_protocol(
        state, steps, "branch", monitor_top_fock=(spec.protocol == "cz")
    )


def herald_probability_analytic(errors: Sequence[float]) -> float:
    """Flag probability of a transfer sequence with the given area errors:
    one minus the product of per-step survival probabilities."""
    no_flag = 1.0
    for d in errors:
        no_flag *= 1.0 - math.sin(0.5 * d) ** 2
    return 1.0 - no_flag


# --- sweeps and baselines ----------------------------------------------------

SWEEPABLE = ("delta_pi", "sigma", "selectivity", "r_neighbor", "theta_gate")


def _with_parameter(spec: ExperimentSpec, parameter: str, value: float) -> ExperimentSpec:
    if parameter == "delta_pi":
        return replace(spec, error_model=AmplitudeErrorModel.constant(value))
    if parameter == "sigma":
        return replace(spec, error_model=AmplitudeErrorModel.gaussian_iid(value))
    if parameter == "selectivity":
        return replace(spec, selectivity=value)
    if parameter == "r_neighbor":
        if spec.crosstalk is None:
            raise ValueError("r_neighbor sweep requires the addressing protocol")
        ratios = tuple(
            1.0 if j == spec.target else value for j in range(len(spec.crosstalk))
        )
        return replace(spec, crosstalk=ratios)
    if parameter == "theta_gate":
        if spec.gate is None:
            raise ValueError("theta_gate sweep requires a gate")
        return replace(spec, gate=GateSpec(spec.gate.axis, value))
    raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEPABLE}")


def sweep(
    base: ExperimentSpec,
    parameter: str,
    values: Sequence[float],
    workers: int = 1,
) -> list[tuple[float, EnsembleStatistics]]:
    """One independent, reproducible ensemble per parameter value."""
    return [
        (float(v), run_ensemble(_with_parameter(base, parameter, float(v)), workers))
        for v in values
    ]


@dataclass(frozen=True)
class CertifiedVsBare:
    """Side-by-side error measures under identical per-trajectory draws."""

    certified_herald_rate: float
    certified_conditional_infidelity: float
    bare_unconditional_infidelity: float
    ratio: float  # herald rate / bare infidelity; nan when bare is error-free

    def to_dict(self) -> dict:
        return {
            "certified_herald_rate": self.certified_herald_rate,
            "certified_conditional_infidelity": self.certified_conditional_infidelity,
            "bare_unconditional_infidelity": self.bare_unconditional_infidelity,
            "ratio": self.ratio,
        }


def compare_certified_vs_bare(spec: ExperimentSpec, workers: int = 1) -> CertifiedVsBare:
    """Certified flag rate versus the plain two-transfer infidelity.

    Both runs consume identical per-trajectory error draws. The certified
    branch stays exactly ideal whenever it survives; the bare baseline
    accumulates the area errors in its output state.
    """
    if spec.protocol != "single":
        raise ValueError("certified-vs-bare comparison is defined for protocol 'single'")
    stats = run_ensemble(spec, workers)
    state = prepare_input(spec)
    fids = np.empty(spec.trials)
    for i in range(spec.trials):
        rng = trajectory_rng(spec.master_seed, i)
        errors, _ = sample_errors_counted(spec.error_model, spec.n_steps, rng)
        _, fids[i] = bare_single_qubit(state, spec.gate, tuple(errors))
    bare_infidelity = float(np.mean(1.0 - fids))
    cond = stats.conditional_fidelity
    certified_infidelity = (1.0 - cond) if cond is not None else math.nan
    ratio = (
        stats.herald_rate / bare_infidelity if bare_infidelity > 0.0 else math.nan
    )
    return CertifiedVsBare(
        certified_herald_rate=stats.herald_rate,
        certified_conditional_infidelity=certified_infidelity,
        bare_unconditional_infidelity=bare_infidelity,
        ratio=ratio,
    )
