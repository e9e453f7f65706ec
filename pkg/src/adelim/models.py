"""Worked bipartite models and their closed-form reference expressions.

Two-qubit model (qubit A slow, qubit B strongly damped and driven)::

    d rho/dtau = [sigma_+^B - sigma_-^B, rho] + gamma D[sigma_-^B] rho
                 - i chi [sigma_z^A sigma_z^B, rho]

in units where the drive amplitude is 1 (tau = u t, gamma = gamma'/u,
chi = chi'/u). The drive term equals -i[-sigma_y^B, rho].

Open Rabi model (boson A slow, spin B fast), times rescaled by
sqrt(Omega omega_0)::

    L_A = -i eta [a^dag a, .] + kappa D[a]
    L_B = -i (1/eta) [sigma_z, .] + Gamma D[sigma_-]
    L_AB = -i g [(a + a^dag) sigma_x, .]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .liouville import (
    BipartiteLindblad,
    DensityVec,
    LindbladModel,
    sandwich,
)
from .operators import (
    IDENTITY_2,
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    destroy,
)

BRANCHES = ("s0", "s1")


@dataclass(frozen=True)
class TwoQubitParams:
    gamma: float
    chi: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not np.isfinite(self.chi):
            raise ValueError("chi must be finite")


@dataclass(frozen=True)
class TwoQubitClosedForm:
    bloch_s0: np.ndarray
    bloch_s1: np.ndarray
    zeta: float
    xi: float
    x1: float
    y1: float
    x2: float
    y2: float
    beta: complex
    zeta_prime: float
    xi_prime: float

    @property
    def alpha(self) -> complex:
        return complex(-self.zeta, self.xi)


@dataclass(frozen=True)
class RabiParams:
    g: float
    eta: float
    kappa: float
    Gamma: float
    fock_cutoff: int = 12

    def __post_init__(self):
        if not (0 <= self.g < 1):
            raise ValueError(f"g must lie in [0, 1) (normal phase), got {self.g}")
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.kappa < 0 or self.Gamma < 0:
            raise ValueError("kappa and Gamma must be >= 0")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 4:
            raise ValueError(f"fock_cutoff must be an integer >= 4, got {self.fock_cutoff}")


def build_two_qubit(p: TwoQubitParams) -> BipartiteLindblad:
    """A carries no dynamics of its own; B is driven and damped."""
    model_a = LindbladModel(np.zeros((2, 2), dtype=complex))
    model_b = LindbladModel(-SIGMA_Y, ((SIGMA_MINUS, p.gamma),))
    coupling = LindbladModel(p.chi * np.kron(SIGMA_Z, SIGMA_Z))
    return BipartiteLindblad.from_models(model_a, model_b, coupling)


def _bloch(p: TwoQubitParams, sign: float) -> np.ndarray:
    g, c = p.gamma, p.chi
    d = 16 * c * c + g * g + 8
    return np.array([2 * g / d, sign * 8 * c / d, -(16 * c * c + g * g) / (2 * d)])


def bloch_to_matrix(coeffs) -> np.ndarray:
    """rho = 1/2 + cx sigma_x + cy sigma_y + cz sigma_z."""
    cx, cy, cz = coeffs
    return IDENTITY_2 / 2 + cx * SIGMA_X + cy * SIGMA_Y + cz * SIGMA_Z


def two_qubit_branch_state(p: TwoQubitParams, branch: str = "s0") -> DensityVec:
    """Stationary B state conditioned on A in |0> (s0) or |1> (s1)."""
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    coeffs = _bloch(p, -1.0 if branch == "s0" else 1.0)
    return DensityVec.from_matrix(bloch_to_matrix(coeffs))


def two_qubit_closed_form(p: TwoQubitParams) -> TwoQubitClosedForm:
    g, c = p.gamma, p.chi
    s = 16 * c * c + g * g
    den = 4 * c * c * g * g * (s - 16) ** 2 + (g * g + 8) ** 2 * (s + 8) ** 2
    zeta = 128 * c * c * g * (g * g + 8) * (s + 2) / den
    xi = 2 * c * s / (s + 8) + 256 * c ** 3 * g * g * (s - 16) * (s + 2) / (den * (s + 8))

    x1 = c * c * (49152 * c ** 4 * g ** 2 - 262144 * c ** 4 + 6144 * c ** 2 * g ** 4
                  + 2048 * c ** 2 * g ** 2 - 131072 * c ** 2 + 192 * g ** 6 + 1152 * g ** 4
                  - 5120 * g ** 2 - 16384)
    y1 = 256 * c ** 3 * g * (s + 4) * (s + 8)
    x2 = ((s + 4)
          * (-32 * c ** 3 * g + 16 * c * c * g * g + 128 * c * c - 2 * c * g ** 3
             + 32 * c * g + g ** 4 + 16 * g * g + 64)
          * (32 * c ** 3 * g + 16 * c * c * g * g + 128 * c * c + 2 * c * g ** 3
             - 32 * c * g + g ** 4 + 16 * g * g + 64))
    y2 = 4 * c * g * (g * g + 8) * (s - 16) * (s + 4) * (s + 8)
    beta = complex(x1, y1) / complex(x2, y2)

    rate = complex(-zeta, xi) / (1 + beta)
    return TwoQubitClosedForm(
        bloch_s0=_bloch(p, -1.0),
        bloch_s1=_bloch(p, 1.0),
        zeta=float(zeta),
        xi=float(xi),
        x1=float(x1),
        y1=float(y1),
        x2=float(x2),
        y2=float(y2),
        beta=beta,
        zeta_prime=float(-rate.real),
        xi_prime=float(rate.imag),
    )


def dephasing_generator(zeta: float, xi: float) -> np.ndarray:
    """4x4 superoperator of i(xi/2)[sigma_z, .] + (zeta/2)(sigma_z . sigma_z - .)."""
    ident = np.eye(2)
    comm = sandwich(SIGMA_Z, ident).matrix - sandwich(ident, SIGMA_Z).matrix
    flip = sandwich(SIGMA_Z, SIGMA_Z).matrix - np.eye(4)
    return 1j * xi / 2 * comm + zeta / 2 * flip


def two_qubit_effective_generator(cf: TwoQubitClosedForm) -> np.ndarray:
    return dephasing_generator(cf.zeta, cf.xi)


def modified_initial_state(rho0_a: DensityVec, beta: complex) -> DensityVec:
    """Rescale the coherences of a qubit state by 1/(1+beta) and 1/(1+conj(beta)).

    The vec component along |1><0| is divided by 1+beta, the one along
    |0><1| by 1+conj(beta); populations are untouched.
    """
    if rho0_a.dim != 2:
        raise ValueError("modified_initial_state acts on a single qubit")
    if abs(1 + beta) < 1e-14:
        raise ValueError("beta = -1 makes the coherence map singular")
    v = rho0_a.vec.copy()
    v[1] = v[1] / (1 + beta)
    v[2] = v[2] / (1 + np.conj(beta))
    return DensityVec(v, 2)


def two_qubit_U(t: float, cf: TwoQubitClosedForm) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be >= 0")
    phase = np.exp(complex(-cf.zeta_prime, cf.xi_prime) * t)
    return np.diag([1.0, phase, np.conj(phase), 1.0]).astype(complex)


def build_rabi(p: RabiParams) -> BipartiteLindblad:
    n = int(p.fock_cutoff)
    a = destroy(n)
    x = a + a.conj().T
    model_a = LindbladModel(p.eta * (a.conj().T @ a), ((a, p.kappa),))
    model_b = LindbladModel(SIGMA_Z / p.eta, ((SIGMA_MINUS, p.Gamma),))
    coupling = LindbladModel(p.g * np.kron(x, SIGMA_X))
    return BipartiteLindblad.from_models(model_a, model_b, coupling)


def rabi_reference_state() -> DensityVec:
    """Spin ground state |0><0|, the stationary state of L_B."""
    return DensityVec.from_matrix(np.diag([1.0, 0.0]))


def rabi_effective_coefficients(p: RabiParams) -> tuple[float, float]:
    """(Hamiltonian shift, extra dissipator rate) of the boson Lindbladian."""
    den = p.Gamma ** 2 * p.eta ** 2 + 16
    return 4 * p.g ** 2 * p.eta / den, 4 * p.g ** 2 * p.eta ** 2 * p.Gamma / den


def rabi_effective_generator(p: RabiParams) -> np.ndarray:
    """-i[H, .] + kappa D[a] + rate D[a + a^dag] with H = eta a^dag a - shift (a + a^dag)^2."""
    from .liouville import lindblad_superop

    n = int(p.fock_cutoff)
    a = destroy(n)
    x = a + a.conj().T
    shift, rate = rabi_effective_coefficients(p)
    h = p.eta * (a.conj().T @ a) - shift * (x @ x)
    model = LindbladModel(h, ((a, p.kappa), (x, rate)))
    return lindblad_superop(model).matrix


def fock_safe_indices(n: int, keep: int) -> np.ndarray:
    """vec indices of |i><j| with i, j < keep inside an n-level space."""
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = (i < keep) & (j < keep)
    return np.sort((j * n + i)[mask])


COHERENCE = 1  # vec index of |1><0|, the component carrying alpha


def two_qubit_engine_values(reduced_L0, reduced_L1, reduced_generator) -> dict:
    """alpha, beta and the resolved rate read off the engine's qubit-A blocks.

    (1 - L1)^-1 divides the coherence by 1 + beta, so beta = -L1 there.
    """
    alpha = complex(reduced_L0[COHERENCE, COHERENCE])
    beta = -complex(reduced_L1[COHERENCE, COHERENCE])
    rate = complex(reduced_generator[COHERENCE, COHERENCE])
    return {"zeta": -alpha.real, "xi": alpha.imag, "beta": beta,
            "zeta_prime": -rate.real, "xi_prime": rate.imag}


def truncation_safe(p: RabiParams) -> np.ndarray:
    """Fock levels n <= N - 2 are kept; the top level is wrong for (a + a^dag)^2."""
    return fock_safe_indices(p.fock_cutoff, p.fock_cutoff - 1)


def rabi_fit_coefficients(generator, p: RabiParams) -> tuple[float, float, float]:
    """Least-squares (shift, rate, residual) of a boson generator in the analytic form.

    The bare cavity part is subtracted and the remainder fitted to
    shift * (-i[-(a+a^dag)^2, .]) + rate * D[a+a^dag] on the truncation-safe block.
    """
    from .liouville import lindblad_superop

    n = int(p.fock_cutoff)
    a = destroy(n)
    x = a + a.conj().T
    bare = lindblad_superop(LindbladModel(p.eta * (a.conj().T @ a), ((a, p.kappa),))).matrix
    shift_basis = lindblad_superop(LindbladModel(-(x @ x))).matrix
    rate_basis = lindblad_superop(LindbladModel(np.zeros((n, n)), ((x, 1.0),))).matrix
    keep = np.ix_(truncation_safe(p), truncation_safe(p))
    target = (np.asarray(generator) - bare)[keep].reshape(-1)
    design = np.column_stack([shift_basis[keep].reshape(-1), rate_basis[keep].reshape(-1)])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = float(np.max(np.abs(design @ coef - target), initial=0.0))
    return float(coef[0].real), float(coef[1].real), resid
