"""Non-Markovianity measures as functionals of sampled state trajectories.

The supremum over initial states in each measure definition is replaced by a
maximization over an explicit candidate list; values are therefore lower
bounds on the corresponding sup.  Time derivatives are first differences on
the sampled grid with a noise floor (default 1e-10 nats) so eigensolver
jitter is not counted as backflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import info
from .states import DensityMatrix, PartitionError, SystemPartition, partial_trace, pure_state

DEFAULT_NOISE_TOL = 1e-10

MEASURE_NAMES = ("BLP", "tBLP", "LFS", "N1", "N2")


class TrajectoryError(ValueError):
    """Inconsistent time grids, partitions or candidate lists."""


@dataclass(frozen=True, eq=False)
class ScalarSeries:
    """A real scalar sampled on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if t.shape != v.shape:
            raise TrajectoryError("times and values have different lengths")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise TrajectoryError("time grid is not strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """A DensityMatrix per time, all sharing one partition."""

    times: np.ndarray
    states: tuple[DensityMatrix, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        states = tuple(self.states)
        if t.size != len(states):
            raise TrajectoryError("one state per time sample required")
        if not states:
            raise TrajectoryError("empty trajectory")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise TrajectoryError("time grid is not strictly increasing")
        part = states[0].partition
        for s in states:
            if s.partition != part:
                raise TrajectoryError("states do not share one partition")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", states)

    @property
    def partition(self) -> SystemPartition:
        return self.states[0].partition

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True, eq=False)
class MeasureResult:
    """Measure value with the achieving candidate and per-step contributions."""

    measure_name: str
    value: float
    best_candidate_index: int
    increments: ScalarSeries

    def __post_init__(self):
        if self.measure_name not in MEASURE_NAMES:
            raise ValueError(f"unknown measure {self.measure_name!r}")
        if self.value < 0.0:
            raise ValueError("measure value must be nonnegative")


def positive_increment_integral(
    series: ScalarSeries, noise_tol: float = DEFAULT_NOISE_TOL
) -> tuple[float, ScalarSeries]:
    """Sum of positive steps: discretization of the integral over df/dt > 0.

    Steps with |delta| <= noise_tol contribute zero.
    """
    if len(series) < 2:
        raise TrajectoryError("need at least two samples")
    if noise_tol < 0.0:
        raise ValueError("noise_tol must be nonnegative")
    d = np.diff(series.values)
    contrib = np.where(np.abs(d) <= noise_tol, 0.0, np.maximum(d, 0.0))
    return float(contrib.sum()), ScalarSeries(series.times[1:], contrib)


def negative_decrement_integral(
    series: ScalarSeries, noise_tol: float = DEFAULT_NOISE_TOL
) -> tuple[float, ScalarSeries]:
    """Integral of |d/dt| over the decreasing part: positive increments of -f."""
    flipped = ScalarSeries(series.times, -series.values)
    return positive_increment_integral(flipped, noise_tol)


def _best(name: str, per_candidate: Sequence[tuple[float, ScalarSeries]]) -> MeasureResult:
    if not per_candidate:
        raise TrajectoryError("candidate list is empty")
    idx = int(np.argmax([v for v, _ in per_candidate]))
    value, inc = per_candidate[idx]
    return MeasureResult(name, value, idx, inc)


def _empty_increments(times: np.ndarray) -> ScalarSeries:
    return ScalarSeries(np.asarray(times)[:0], np.zeros(0))


def measure_distance_blp(
    pair_trajectories: Sequence[tuple[StateTrajectory, StateTrajectory]],
    distance: str = "trace",
    noise_tol: float = DEFAULT_NOISE_TOL,
) -> MeasureResult:
    """BLP-style measure: integrated revivals of a distinguishability series.

    ``distance`` selects the trace distance ("trace") or the quantum
    Jensen-Shannon telescopic divergence ("telescopic").
    """
    if distance == "trace":
        name, dist = "BLP", info.trace_distance
    elif distance == "telescopic":
        name, dist = "tBLP", info.jensen_shannon_telescopic
    else:
        raise ValueError(f"unknown distance {distance!r}")
    per = []
    for t1, t2 in pair_trajectories:
        if t1.times.shape != t2.times.shape or not np.allclose(t1.times, t2.times):
            raise TrajectoryError("pair trajectories sampled on different grids")
        if t1.partition != t2.partition:
            raise TrajectoryError("pair trajectories on different partitions")
        if len(t1) < 2:
            per.append((0.0, _empty_increments(t1.times)))
            continue
        vals = [dist(a, b) for a, b in zip(t1.states, t2.states)]
        per.append(positive_increment_integral(ScalarSeries(t1.times, vals), noise_tol))
    return _best(name, per)


def _mi_series(traj: StateTrajectory, ancilla: frozenset) -> ScalarSeries:
    rest = frozenset(traj.partition.labels) - ancilla
    vals = [info.mutual_information(s, rest, ancilla) for s in traj.states]
    return ScalarSeries(traj.times, vals)


def measure_lfs(
    trajectories: Sequence[StateTrajectory],
    ancilla_labels: Iterable[str] = ("A",),
    noise_tol: float = DEFAULT_NOISE_TOL,
) -> MeasureResult:
    """Integrated revivals of the system-ancilla mutual information."""
    anc = frozenset(ancilla_labels)
    per = []
    for traj in trajectories:
        if not anc <= set(traj.partition.labels):
            raise PartitionError(f"trajectory partition lacks ancilla labels {sorted(anc)}")
        if len(traj) < 2:
            per.append((0.0, _empty_increments(traj.times)))
            continue
        per.append(positive_increment_integral(_mi_series(traj, anc), noise_tol))
    return _best("LFS", per)


def _cmi_series(
    traj: StateTrajectory,
    ancilla: frozenset,
    env: frozenset,
    system: frozenset,
    conditioning_extra: frozenset = frozenset(),
) -> ScalarSeries:
    keep = ancilla | env | system | conditioning_extra
    vals = []
    for s in traj.states:
        reduced = partial_trace(s, keep) if keep != set(s.labels) else s
        vals.append(
            info.conditional_mutual_information(reduced, ancilla, env, system | conditioning_extra)
        )
    return ScalarSeries(traj.times, vals)


def measure_n1(
    trajectories: Sequence[StateTrajectory],
    env_labels: Iterable[str],
    system_labels: Iterable[str],
    ancilla_labels: Iterable[str] = ("A",),
    noise_tol: float = DEFAULT_NOISE_TOL,
) -> MeasureResult:
    """Integrated decrease of the leaked information I(A : env | system).

    Environment labels outside ``env_labels`` are traced out, not conditioned
    on, so a sub-environment value realizes the partial-environment variant of
    the measure.
    """
    env = frozenset(env_labels)
    system = frozenset(system_labels)
    anc = frozenset(ancilla_labels)
    if not env:
        raise PartitionError("env_labels must be nonempty")
    per = []
    for traj in trajectories:
        labels = set(traj.partition.labels)
        for group in (env, system, anc):
            if not group <= labels:
                raise PartitionError(f"labels {sorted(group - labels)} missing from trajectory")
        if len(traj) < 2:
            per.append((0.0, _empty_increments(traj.times)))
            continue
        series = _cmi_series(traj, anc, env, system)
        per.append(negative_decrement_integral(series, noise_tol))
    return _best("N1", per)


def measure_n2(
    trajectories: Sequence[StateTrajectory],
    env_labels: Iterable[str],
    system_labels: Iterable[str],
    aprime_label: str = "Ap",
    ancilla_labels: Iterable[str] = ("A",),
    noise_tol: float = DEFAULT_NOISE_TOL,
    aprime_drift_tol: float = 1e-8,
) -> MeasureResult:
    """Extension of the N1 measure conditioning on system + primed ancilla.

    Requires dim(A') = dim(system) + 1 and an A' marginal constant along each
    trajectory (the primed ancilla must evolve trivially).
    """
    env = frozenset(env_labels)
    system = frozenset(system_labels)
    anc = frozenset(ancilla_labels)
    per = []
    for traj in trajectories:
        part = traj.partition
        d_sys = int(np.prod([part.dim_of(l) for l in system], dtype=np.int64))
        d_ap = part.dim_of(aprime_label)
        if d_ap != d_sys + 1:
            raise PartitionError(
                f"dim(A') = {d_ap} but dim(system) + 1 = {d_sys + 1} required"
            )
        marg0 = partial_trace(traj.states[0], {aprime_label})
        for s in traj.states[1:]:
            drift = info.trace_distance(partial_trace(s, {aprime_label}), marg0)
            if drift > aprime_drift_tol:
                raise TrajectoryError(
                    f"A' marginal drifts by {drift:.3e} along the trajectory"
                )
        if len(traj) < 2:
            per.append((0.0, _empty_increments(traj.times)))
            continue
        series = _cmi_series(traj, anc, env, system, frozenset({aprime_label}))
        per.append(negative_decrement_integral(series, noise_tol))
    return _best("N2", per)


# ---------------------------------------------------------------------------
# candidate-state constructions


def optimal_pair_state(
    rho1: DensityMatrix, rho2: DensityMatrix, ancilla_label: str = "A"
) -> DensityMatrix:
    """(rho1 (x) |0><0| + rho2 (x) |1><1|)/2 with a fresh qubit ancilla flag."""
    if rho1.partition != rho2.partition:
        raise PartitionError("pair states live on different partitions")
    part = rho1.partition.concat(SystemPartition([(ancilla_label, 2)]))
    p0 = np.zeros((2, 2), dtype=complex)
    p0[0, 0] = 1.0
    p1 = np.zeros((2, 2), dtype=complex)
    p1[1, 1] = 1.0
    data = 0.5 * (np.kron(rho1.data, p0) + np.kron(rho2.data, p1))
    return DensityMatrix(data, part)


def tsio_trajectory(
    traj1: StateTrajectory, traj2: StateTrajectory, ancilla_label: str = "A"
) -> StateTrajectory:
    """Pointwise optimal-pair construction along two system trajectories."""
    if traj1.times.shape != traj2.times.shape or not np.allclose(traj1.times, traj2.times):
        raise TrajectoryError("trajectories sampled on different grids")
    states = tuple(
        optimal_pair_state(a, b, ancilla_label) for a, b in zip(traj1.states, traj2.states)
    )
    return StateTrajectory(traj1.times, states)


def flagged_ancilla_state(
    amplitudes: Sequence[complex],
    system_indices: Sequence[int],
    system_partition: SystemPartition,
    ancilla_label: str = "A",
    ancilla_dim: int | None = None,
    flags: Sequence[np.ndarray] | None = None,
) -> DensityMatrix:
    """Pure flagged superposition  sum_i a_i |f_i>_A (x) |s_i>_S.

    ``system_indices`` are computational-basis indices of the system factors;
    ``flags`` default to the first len(amplitudes) ancilla basis vectors and
    must be orthonormal.  The ancilla factor comes first in the partition.
    """
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
        raise ValueError("amplitudes are not normalized to 1e-12")
    if len(system_indices) != amps.size:
        raise ValueError("one system index per amplitude required")
    d_s = system_partition.total_dim
    d_a = ancilla_dim if ancilla_dim is not None else amps.size
    if flags is None:
        flags = [np.eye(d_a)[:, i] for i in range(amps.size)]
    flag_mat = np.column_stack([np.asarray(f, dtype=complex).reshape(-1) for f in flags])
    if flag_mat.shape[0] != d_a:
        raise ValueError("flag vectors do not match the ancilla dimension")
    gram = flag_mat.conj().T @ flag_mat
    if np.max(np.abs(gram - np.eye(amps.size))) > 1e-12:
        raise ValueError("flag vectors are not orthonormal")
    vec = np.zeros(d_a * d_s, dtype=complex)
    for a, s_idx, k in zip(amps, system_indices, range(amps.size)):
        if not 0 <= s_idx < d_s:
            raise ValueError(f"system basis index {s_idx} out of range")
        block = np.zeros(d_s, dtype=complex)
        block[s_idx] = 1.0
        vec += a * np.kron(flag_mat[:, k], block)
    part = SystemPartition([(ancilla_label, d_a)]).concat(system_partition)
    return pure_state(vec, part)


def ops_state() -> DensityMatrix:
    """The default flagged candidate (|0>_A |01>_S + |1>_A |10>_S)/sqrt(2)."""
    sys_part = SystemPartition([("S1", 2), ("S2", 2)])
    return flagged_ancilla_state(
        [1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)], [0b01, 0b10], sys_part
    )
