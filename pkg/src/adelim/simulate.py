"""Reference propagation and comparison of exact and eliminated dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .liouville import (
    BipartiteSpace,
    DensityVec,
    Ordering,
    Space,
    SuperOp,
    hilbert_dim,
    identity_vector,
    partial_trace_B_rows,
    trace_distance,
    unvec,
    vectorize_operator,
)
from .numkernel import as_matrix, dag, expm

GAP_RTOL = 1e-12


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        raise ValueError("time grid is empty")
    if not np.all(np.isfinite(t)) or t[0] < 0:
        raise ValueError("times must be finite and non-negative")
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be sorted ascending")
    return t


def propagate(generator, v0, times) -> np.ndarray:
    """Rows exp(G t_k) v0 for each time.

    Steps between consecutive samples reuse one exponential per distinct gap,
    so long horizons never exponentiate a large-norm matrix.
    """
    g = as_matrix(generator, square=True)
    t = _check_times(times)
    v = np.asarray(v0, dtype=complex).reshape(-1)
    out = np.empty((t.size, v.size), dtype=complex)
    cache: dict[float, np.ndarray] = {}
    prev = 0.0
    for k, tk in enumerate(t):
        gap = tk - prev
        if gap > 0:
            key = _gap_key(gap, cache)
            if key not in cache:
                cache[key] = expm(g * key)
            v = cache[key] @ v
        out[k] = v
        prev = tk
    return out


def _gap_key(gap: float, cache: Mapping[float, np.ndarray]) -> float:
    for key in cache:
        if abs(key - gap) <= GAP_RTOL * max(key, gap):
            return key
    return gap


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled states (one vectorized state per row) plus named observables."""

    times: np.ndarray
    states: np.ndarray
    space: Space
    ordering: Ordering = Ordering.FLAT
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        s = np.asarray(self.states, dtype=complex)
        d = hilbert_dim(self.space)
        if s.ndim != 2 or s.shape != (t.size, d * d):
            raise ValueError(f"states must have shape ({t.size}, {d * d}), got {s.shape}")
        for name, series in self.observables.items():
            if len(series) != t.size:
                raise ValueError(f"observable {name!r} has wrong length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return self.times.size

    def state(self, k: int) -> DensityVec:
        return DensityVec(self.states[k], self.space, self.ordering)

    def matrices(self) -> np.ndarray:
        d = hilbert_dim(self.space)
        return np.array([self.state(k).matrix() for k in range(len(self))]).reshape(-1, d, d)

    def traces(self) -> np.ndarray:
        return self.states @ identity_vector(self.space, self.ordering)

    def reduced(self) -> "Trajectory":
        """Partial trace over B; observables are carried over unchanged."""
        if not isinstance(self.space, BipartiteSpace):
            return self
        if self.ordering is not Ordering.GROUPED:
            raise ValueError("reduction needs GROUPED states")
        rows = partial_trace_B_rows(self.states, self.space)
        return Trajectory(self.times, rows, self.space.dim_a, Ordering.FLAT, dict(self.observables))


def exact_propagate(L: SuperOp, rho0: DensityVec, times: Sequence[float],
                    trace_tol: float = 1e-10) -> Trajectory:
    if rho0.space != L.space or rho0.ordering is not L.ordering:
        raise ValueError("initial state does not match the generator's space/ordering")
    if abs(rho0.trace() - 1) > trace_tol:
        raise ValueError("initial state is not normalized")
    t = _check_times(times)
    states = propagate(L.matrix, rho0.vec, t)
    return Trajectory(t, states, L.space, L.ordering)


def observables(traj: Trajectory, ops: Mapping[str, np.ndarray], imag_tol: float = 1e-8) -> Trajectory:
    """Add <O>(t) = <<vec(O^dagger)|rho(t)>> series for each named operator."""
    d = hilbert_dim(traj.space)
    new = dict(traj.observables)
    for name, op in ops.items():
        op = as_matrix(op, square=True)
        if op.shape[0] != d:
            raise ValueError(f"observable {name!r} has dimension {op.shape[0]}, expected {d}")
        w = vectorize_operator(dag(op), traj.space, traj.ordering)
        values = traj.states @ w.conj()
        hermitian = np.allclose(op, dag(op), atol=1e-12)
        if hermitian and np.max(np.abs(values.imag), initial=0.0) > imag_tol:
            raise ValueError(f"observable {name!r} has imaginary residue "
                             f"{np.max(np.abs(values.imag)):.2e}")
        new[name] = values.real.copy()
    return replace(traj, observables=new)


@dataclass(frozen=True)
class ComparisonReport:
    sup_deviation: dict
    terminal_deviation: dict
    trace_distance: np.ndarray
    parameters: dict = field(default_factory=dict)

    @property
    def max_trace_distance(self) -> float:
        return float(np.max(self.trace_distance)) if self.trace_distance.size else 0.0

    def to_dict(self) -> dict:
        return {
            "sup_deviation": dict(sorted(self.sup_deviation.items())),
            "terminal_deviation": dict(sorted(self.terminal_deviation.items())),
            "max_trace_distance": self.max_trace_distance,
            "trace_distance": self.trace_distance.tolist(),
            "parameters": self.parameters,
        }


def compare(exact: Trajectory, approx: Trajectory, parameters: Mapping | None = None) -> ComparisonReport:
    """Deviation of an approximate trajectory from the exact one.

    Bipartite trajectories are traced over B before the state comparison.
    Observables are compared by name over the names both trajectories carry.
    """
    if exact.times.shape != approx.times.shape or not np.allclose(exact.times, approx.times,
                                                                  rtol=0, atol=1e-12):
        raise ValueError("time grids differ")
    ex, ap = exact.reduced(), approx.reduced()
    if ex.space != ap.space:
        raise ValueError(f"reduced spaces differ: {ex.space} vs {ap.space}")
    d = hilbert_dim(ex.space)
    dist = np.array([trace_distance(unvec(a, d), unvec(b, d))
                     for a, b in zip(ex.states, ap.states)])
    sup, term = {}, {}
    for name in sorted(set(exact.observables) & set(approx.observables)):
        diff = np.abs(np.asarray(exact.observables[name]) - np.asarray(approx.observables[name]))
        sup[name] = float(np.max(diff))
        term[name] = float(diff[-1])
    return ComparisonReport(sup, term, dist, dict(parameters or {}))


@dataclass(frozen=True)
class ScanRow:
    coupling: float
    sup_deviation: dict
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScanTable:
    rows: tuple
    observable: str | None
    violations: tuple

    @property
    def monotone(self) -> bool:
        return not self.violations


def convergence_scan(run: Callable[[float], tuple[ComparisonReport, dict]],
                     couplings: Sequence[float], observable: str | None = None) -> ScanTable:
    """Run ``run(c)`` for each coupling (positive, descending).

    ``run`` returns a report and a dict of extra columns. Rows where the
    tracked deviation increases as the coupling decreases are listed as
    violations; the scan itself does not fail on them.
    """
    cs = [float(c) for c in couplings]
    if not cs or any(c <= 0 for c in cs) or any(b >= a for a, b in zip(cs, cs[1:])):
        raise ValueError("couplings must be positive and strictly descending")
    rows = []
    for c in cs:
        report, extras = run(c)
        rows.append(ScanRow(c, dict(report.sup_deviation), dict(extras)))
    tracked = observable or (sorted(rows[0].sup_deviation)[0] if rows[0].sup_deviation else None)
    violations = []
    if tracked is not None:
        for prev, cur in zip(rows, rows[1:]):
            if cur.sup_deviation[tracked] > prev.sup_deviation[tracked]:
                violations.append(cur.coupling)
    return ScanTable(tuple(rows), tracked, tuple(violations))
