"""End-to-end runs: build a model, eliminate B, propagate both ways, compare."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elimination import EffectiveGenerator, Method, build_projectors, effective_generator, effective_propagate
from .liouville import (
    BipartiteLindblad,
    DensityVec,
    Ordering,
    embed_product,
    local_operator,
)
from .models import (
    RabiParams,
    TwoQubitParams,
    build_rabi,
    build_two_qubit,
    rabi_reference_state,
    two_qubit_branch_state,
)
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, coherent, destroy, phi_plus, projector
from .simulate import ComparisonReport, Trajectory, compare, exact_propagate, observables

TWO_QUBIT_POINTS = 400
RABI_POINTS = 200


@dataclass(frozen=True, eq=False)
class ComparisonRun:
    exact: Trajectory
    approx: Trajectory
    report: ComparisonReport
    eliminated: EffectiveGenerator


def pauli_set(system, space) -> dict:
    return {f"s{axis}_{system}": local_operator(op, space, system)
            for axis, op in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z))}


def boson_set(space) -> dict:
    a = destroy(space.dim_a)
    return {"n_A": local_operator(a.conj().T @ a, space, "A"),
            "x_A": local_operator(a + a.conj().T, space, "A")}


def lift_trajectory(traj: Trajectory, rho_b: DensityVec, model: BipartiteLindblad) -> Trajectory:
    """rho_A(t) -> rho_A(t) (x) rho_b as GROUPED states on the full space."""
    rows = np.einsum("ti,j->tij", traj.states, rho_b.vec).reshape(len(traj), -1)
    return Trajectory(traj.times, rows, model.space, Ordering.GROUPED)


def slow_rate(eg: EffectiveGenerator) -> complex:
    """The slowest nonzero eigenvalue of the reduced generator."""
    ev = np.linalg.eigvals(eg.reduced_A_generator)
    moving = ev[np.abs(ev) > 1e-12 * max(1.0, np.max(np.abs(ev)))]
    if moving.size == 0:
        return 0j
    return complex(moving[np.argmax(moving.real)])


def run_comparison(model: BipartiteLindblad, rho_b: DensityVec, rho0_a: DensityVec,
                   times, ops: dict, method=Method.EXACT, order: int = 1,
                   rho0_b: DensityVec | None = None, parameters: dict | None = None,
                   eg: EffectiveGenerator | None = None) -> ComparisonRun:
    """Exact propagation of rho0_A (x) rho0_B against the eliminated dynamics.

    ``rho0_b`` defaults to ``rho_b`` so that both runs start from a state
    with no component outside range(P).
    """
    if eg is None:
        eg = effective_generator(model, build_projectors(rho_b, model.space), method, order)
    start = embed_product(rho0_a, rho0_b if rho0_b is not None else rho_b)
    exact = observables(exact_propagate(model.total, start, times), ops)
    approx = observables(lift_trajectory(effective_propagate(eg, rho0_a, times), rho_b, model), ops)
    report = compare(exact, approx, parameters)
    return ComparisonRun(exact, approx, report, eg)


def two_qubit_comparison(p: TwoQubitParams, method=Method.EXACT, order: int = 1,
                         horizon: float | None = None, points: int = TWO_QUBIT_POINTS,
                         branch: str = "s0", rho0_b: DensityVec | None = None) -> ComparisonRun:
    """Default horizon is three decay times 3/zeta' of the eliminated coherence."""
    model = build_two_qubit(p)
    rho_b = two_qubit_branch_state(p, branch)
    eg = effective_generator(model, build_projectors(rho_b, model.space), method, order)
    if horizon is None:
        rate = -slow_rate(eg).real
        if rate <= 0:
            raise ValueError("no decaying mode; give an explicit horizon")
        horizon = 3.0 / rate
    times = np.linspace(0.0, horizon, points)
    ops = pauli_set("A", model.space) | pauli_set("B", model.space)
    rho0_a = DensityVec.from_matrix(projector(phi_plus()))
    params = {"gamma": p.gamma, "chi": p.chi, "method": Method(method).value, "order": order,
              "horizon": float(horizon), "points": points, "branch": branch}
    return run_comparison(model, rho_b, rho0_a, times, ops, method, order, rho0_b, params, eg)


def rabi_comparison(p: RabiParams, method=Method.FACTORIZED, order: int = 0,
                    horizon: float | None = None, points: int = RABI_POINTS,
                    alpha: complex = 1.0) -> ComparisonRun:
    """Coherent boson state against the spin ground state; default horizon 3/kappa."""
    model = build_rabi(p)
    if horizon is None:
        horizon = 3.0 / p.kappa if p.kappa > 0 else 30.0
    times = np.linspace(0.0, horizon, points)
    ops = boson_set(model.space) | pauli_set("B", model.space)
    rho0_a = DensityVec.from_matrix(projector(coherent(p.fock_cutoff, alpha)))
    params = {"g": p.g, "eta": p.eta, "kappa": p.kappa, "Gamma": p.Gamma,
              "fock_cutoff": p.fock_cutoff, "method": Method(method).value, "order": order,
              "horizon": float(horizon), "points": points, "alpha": [complex(alpha).real, complex(alpha).imag]}
    return run_comparison(model, rabi_reference_state(), rho0_a, times, ops, method, order,
                          parameters=params)
