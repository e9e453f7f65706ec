"""Operator-vector isomorphism and superoperator assembly.

Vectorization stacks columns: the operator |a><b| maps to conj(|b>) (x) |a>,
so ``vec(M)[j * d + i] == M[i, j]`` and ``O1 rho O2^dagger`` becomes
``kron(conj(O2), O1) @ vec(rho)``.

Bipartite operators |a1><a2| (x) |b1><b2| live in one of two index orders:

* FLAT     index ((a2 * dB + b2) * dA + a1) * dB + b1  (vec of the full matrix)
* GROUPED  index ((a2 * dA + a1) * dB + b2) * dB + b1  (vec_A (x) vec_B)

GROUPED is canonical for elimination work because superoperators acting on
one factor are plain Kronecker products there.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .numkernel import NumericalError, as_matrix, dag, nullspace


class Ordering(enum.Enum):
    FLAT = "flat"
    GROUPED = "grouped"


@dataclass(frozen=True)
class BipartiteSpace:
    dim_a: int
    dim_b: int

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ValueError("subsystem dimensions must be positive")
        if self.dim_a * self.dim_b < 2:
            raise ValueError("total dimension must be at least 2")

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b


Space = Union[BipartiteSpace, int]


def hilbert_dim(space: Space) -> int:
    return space.dim if isinstance(space, BipartiteSpace) else int(space)


class OrderingError(ValueError):
    """Operands carry incompatible index orderings or spaces."""


@dataclass(frozen=True, eq=False)
class SuperOp:
    """A d^2 x d^2 matrix acting on vectorized operators."""

    matrix: np.ndarray
    space: Space
    ordering: Ordering = Ordering.FLAT

    def __post_init__(self):
        m = as_matrix(self.matrix, square=True)
        d = hilbert_dim(self.space)
        if m.shape[0] != d * d:
            raise ValueError(f"superoperator must be {d * d}x{d * d}, got {m.shape}")
        if self.ordering is Ordering.GROUPED and not isinstance(self.space, BipartiteSpace):
            raise OrderingError("GROUPED ordering requires a bipartite space")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return hilbert_dim(self.space)

    def _compatible(self, other: "SuperOp") -> None:
        if not isinstance(other, SuperOp):
            raise TypeError(f"expected SuperOp, got {type(other).__name__}")
        if other.ordering is not self.ordering or other.space != self.space:
            raise OrderingError(
                f"cannot combine {self.ordering.value}/{self.space} with "
                f"{other.ordering.value}/{other.space}"
            )

    def like(self, matrix) -> "SuperOp":
        return SuperOp(matrix, self.space, self.ordering)

    def __add__(self, other: "SuperOp") -> "SuperOp":
        self._compatible(other)
        return self.like(self.matrix + other.matrix)

    def __sub__(self, other: "SuperOp") -> "SuperOp":
        self._compatible(other)
        return self.like(self.matrix - other.matrix)

    def __neg__(self) -> "SuperOp":
        return self.like(-self.matrix)

    def __mul__(self, scalar) -> "SuperOp":
        return self.like(scalar * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, SuperOp):
            self._compatible(other)
            return self.like(self.matrix @ other.matrix)
        if isinstance(other, DensityVec):
            if other.ordering is not self.ordering or other.space != self.space:
                raise OrderingError("state and superoperator orderings differ")
            return DensityVec(self.matrix @ other.vec, self.space, self.ordering)
        return self.matrix @ np.asarray(other)

    @classmethod
    def identity(cls, space: Space, ordering: Ordering = Ordering.FLAT) -> "SuperOp":
        d = hilbert_dim(space)
        return cls(np.eye(d * d, dtype=complex), space, ordering)

    @classmethod
    def zero(cls, space: Space, ordering: Ordering = Ordering.FLAT) -> "SuperOp":
        d = hilbert_dim(space)
        return cls(np.zeros((d * d, d * d), dtype=complex), space, ordering)


@dataclass(frozen=True, eq=False)
class DensityVec:
    """A vectorized operator (usually a density matrix) with its space."""

    vec: np.ndarray
    space: Space
    ordering: Ordering = Ordering.FLAT

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=complex).reshape(-1)
        d = hilbert_dim(self.space)
        if v.size != d * d:
            raise ValueError(f"vector length {v.size} does not match dimension {d}")
        if self.ordering is Ordering.GROUPED and not isinstance(self.space, BipartiteSpace):
            raise OrderingError("GROUPED ordering requires a bipartite space")
        object.__setattr__(self, "vec", v)

    @classmethod
    def from_matrix(cls, rho, space: Space | None = None,
                    ordering: Ordering = Ordering.FLAT) -> "DensityVec":
        m = as_matrix(rho, square=True)
        space = m.shape[0] if space is None else space
        if hilbert_dim(space) != m.shape[0]:
            raise ValueError("matrix dimension does not match space")
        v = vec(m)
        if ordering is Ordering.GROUPED:
            v = v[_grouped_perm(space.dim_a, space.dim_b)]
        return cls(v, space, ordering)

    @property
    def dim(self) -> int:
        return hilbert_dim(self.space)

    def matrix(self) -> np.ndarray:
        v = self.vec
        if self.ordering is Ordering.GROUPED:
            flat = np.empty_like(v)
            flat[_grouped_perm(self.space.dim_a, self.space.dim_b)] = v
            v = flat
        return unvec(v, self.dim)

    def trace(self) -> complex:
        return complex(identity_vector(self.space, self.ordering) @ self.vec)

    def check(self, tol: float = 1e-10) -> None:
        """Raise unless the state has unit trace and Hermitian matrix form."""
        if abs(self.trace() - 1.0) > tol:
            raise ValueError(f"state trace {self.trace():.3e} differs from 1")
        m = self.matrix()
        if np.max(np.abs(m - dag(m)), initial=0.0) > tol:
            raise ValueError("state is not Hermitian")


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian plus rate-weighted jump operators."""

    hamiltonian: np.ndarray
    jumps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        h = as_matrix(self.hamiltonian, square=True)
        scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
        if np.max(np.abs(h - dag(h)), initial=0.0) > 1e-12 * scale:
            raise ValueError("Hamiltonian is not Hermitian")
        jumps = []
        for op, rate in self.jumps:
            op = as_matrix(op, square=True)
            if op.shape != h.shape:
                raise ValueError("jump operator dimension differs from Hamiltonian")
            if not np.isfinite(rate) or rate < 0:
                raise ValueError(f"jump rate must be finite and >= 0, got {rate}")
            jumps.append((op, float(rate)))
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", tuple(jumps))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def vec(m) -> np.ndarray:
    m = as_matrix(m, square=True)
    return m.reshape(-1, order="F").copy()


def unvec(v, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size != d * d:
        raise ValueError(f"vector of length {v.size} cannot be reshaped to {d}x{d}")
    return v.reshape((d, d), order="F").copy()


def identity_vector(space: Space, ordering: Ordering = Ordering.FLAT) -> np.ndarray:
    """vec of the identity operator; <<1|rho>> is the trace."""
    if ordering is Ordering.GROUPED:
        return np.kron(vec(np.eye(space.dim_a)), vec(np.eye(space.dim_b)))
    return vec(np.eye(hilbert_dim(space)))


def sandwich(o1, o2) -> SuperOp:
    """Superoperator of rho -> o1 rho o2^dagger (FLAT ordering)."""
    o1 = as_matrix(o1, square=True)
    o2 = as_matrix(o2, square=True)
    if o1.shape != o2.shape:
        raise ValueError("sandwich operands must share a dimension")
    return SuperOp(np.kron(o2.conj(), o1), o1.shape[0])


def lindblad_superop(model: LindbladModel) -> SuperOp:
    h = model.hamiltonian
    d = model.dim
    ident = np.eye(d, dtype=complex)
    out = -1j * (np.kron(ident, h) - np.kron(h.conj(), ident))
    for x, rate in model.jumps:
        if rate == 0:
            continue
        xdx = dag(x) @ x
        out = out + rate * (np.kron(x.conj(), x)
                            - 0.5 * np.kron(ident, xdx)
                            - 0.5 * np.kron(xdx.conj(), ident))
    return SuperOp(out, d)


@lru_cache(maxsize=32)
def _grouped_perm(dim_a: int, dim_b: int) -> np.ndarray:
    """p with grouped[g] = flat[p[g]]."""
    a2, a1, b2, b1 = np.meshgrid(np.arange(dim_a), np.arange(dim_a),
                                 np.arange(dim_b), np.arange(dim_b), indexing="ij")
    flat = ((a2 * dim_b + b2) * dim_a + a1) * dim_b + b1
    p = flat.reshape(-1)
    p.setflags(write=False)
    return p


def grouped_permutation(space: BipartiteSpace) -> np.ndarray:
    return _grouped_perm(space.dim_a, space.dim_b).copy()


def grouped_reorder(s: SuperOp) -> SuperOp:
    """Convert between FLAT and GROUPED index orders (flips the tag)."""
    if not isinstance(s.space, BipartiteSpace):
        raise OrderingError("grouped_reorder needs bipartite space metadata")
    p = _grouped_perm(s.space.dim_a, s.space.dim_b)
    if s.ordering is Ordering.FLAT:
        return SuperOp(s.matrix[np.ix_(p, p)], s.space, Ordering.GROUPED)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size)
    return SuperOp(s.matrix[np.ix_(inv, inv)], s.space, Ordering.FLAT)


def as_bipartite(s: SuperOp, space: BipartiteSpace) -> SuperOp:
    """Attach bipartite metadata to a FLAT superoperator built on the full space."""
    if s.ordering is not Ordering.FLAT or s.dim != space.dim:
        raise OrderingError("expected a FLAT superoperator on the full space")
    return SuperOp(s.matrix, space, Ordering.FLAT)


def vectorize_operator(op, space: Space, ordering: Ordering = Ordering.FLAT) -> np.ndarray:
    """vec(op) in the requested ordering."""
    v = vec(op)
    if ordering is Ordering.GROUPED:
        v = v[_grouped_perm(space.dim_a, space.dim_b)]
    return v


def embed_product(rho_a: DensityVec, rho_b: DensityVec) -> DensityVec:
    """rho_a (x) rho_b in GROUPED ordering."""
    space = BipartiteSpace(rho_a.dim, rho_b.dim)
    return DensityVec(np.kron(_flat(rho_a), _flat(rho_b)), space, Ordering.GROUPED)


def _flat(rho: DensityVec) -> np.ndarray:
    if rho.ordering is not Ordering.FLAT:
        raise OrderingError("expected a FLAT single-system state")
    return rho.vec


def partial_trace_B(rho: DensityVec) -> DensityVec:
    """Contract the B (x) B factor with <<1_B|."""
    if rho.ordering is not Ordering.GROUPED or not isinstance(rho.space, BipartiteSpace):
        raise OrderingError("partial_trace_B requires a GROUPED bipartite state")
    sp = rho.space
    block = rho.vec.reshape(sp.dim_a ** 2, sp.dim_b ** 2)
    return DensityVec(block @ vec(np.eye(sp.dim_b)), sp.dim_a)


def partial_trace_B_rows(states: np.ndarray, space: BipartiteSpace) -> np.ndarray:
    """Row-wise partial trace of stacked GROUPED state vectors."""
    n = states.shape[0]
    blocks = states.reshape(n, space.dim_a ** 2, space.dim_b ** 2)
    return blocks @ vec(np.eye(space.dim_b))


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dag(m))


def trace_distance(rho1, rho2) -> float:
    """0.5 * ||rho1 - rho2||_1 for Hermitian matrices."""
    diff = hermitize(np.asarray(rho1, dtype=complex) - np.asarray(rho2, dtype=complex))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


class SteadyStateError(NumericalError):
    """The generator has no (numerical) stationary state."""


@dataclass(frozen=True, eq=False)
class SteadyState:
    states: tuple
    unique: bool

    @property
    def state(self) -> DensityVec:
        if not self.unique:
            raise SteadyStateError(
                f"stationary state not unique (kernel dimension {len(self.states)})"
            )
        return self.states[0]

    @property
    def dimension(self) -> int:
        return len(self.states)


def steady_state(L: SuperOp, rank_tol: float = 1e-10, trace_tol: float = 1e-10) -> SteadyState:
    """Kernel of a trace-preserving generator, normalized to unit trace.

    A one-dimensional kernel yields a single trace-one, Hermitized state.
    Larger kernels are returned as the orthonormal basis with
    ``unique=False``; no branch is chosen here.
    """
    one = identity_vector(L.space, L.ordering)
    scale = max(1.0, float(np.max(np.abs(L.matrix))))
    if np.max(np.abs(one @ L.matrix)) > trace_tol * scale:
        raise ValueError("generator is not trace preserving")
    basis = nullspace(L.matrix, rank_tol)
    if not basis:
        raise SteadyStateError("generator has an empty numerical kernel")
    if len(basis) > 1:
        states = tuple(DensityVec(v, L.space, L.ordering) for v in basis)
        return SteadyState(states, unique=False)
    v = basis[0]
    tr = one @ v
    if abs(tr) < 1e-12:
        raise SteadyStateError("kernel vector is traceless")
    rho = DensityVec(v / tr, L.space, L.ordering)
    m = hermitize(rho.matrix())
    m = m / np.trace(m)
    return SteadyState((DensityVec.from_matrix(m, L.space, L.ordering),), unique=True)


def expect(op, rho: DensityVec) -> complex:
    """tr(op rho) = <<vec(op^dagger)|rho>>."""
    w = vectorize_operator(dag(as_matrix(op, square=True)), rho.space, rho.ordering)
    return complex(np.vdot(w, rho.vec))


@dataclass(frozen=True, eq=False)
class BipartiteLindblad:
    """Generator split as L_A (x) 1 + 1 (x) L_B + L_AB.

    ``L_A`` and ``L_B`` act on the single-subsystem vectorized spaces;
    ``L_AB`` is a GROUPED superoperator on the full space.
    """

    space: BipartiteSpace
    L_A: SuperOp
    L_B: SuperOp
    L_AB: SuperOp

    def __post_init__(self):
        if self.L_A.dim != self.space.dim_a or self.L_B.dim != self.space.dim_b:
            raise ValueError("subsystem generators do not match the space")
        if self.L_AB.ordering is not Ordering.GROUPED or self.L_AB.space != self.space:
            raise OrderingError("coupling generator must be GROUPED on the full space")

    @property
    def total(self) -> SuperOp:
        na, nb = self.space.dim_a ** 2, self.space.dim_b ** 2
        m = (np.kron(self.L_A.matrix, np.eye(nb)) + np.kron(np.eye(na), self.L_B.matrix)
             + self.L_AB.matrix)
        return SuperOp(m, self.space, Ordering.GROUPED)

    @classmethod
    def from_models(cls, model_a: LindbladModel, model_b: LindbladModel,
                    coupling: LindbladModel) -> "BipartiteLindblad":
        space = BipartiteSpace(model_a.dim, model_b.dim)
        if coupling.dim != space.dim:
            raise ValueError("coupling model must act on the full space")
        l_ab = grouped_reorder(as_bipartite(lindblad_superop(coupling), space))
        return cls(space, lindblad_superop(model_a), lindblad_superop(model_b), l_ab)


def local_operator(op, space: BipartiteSpace, factor: str) -> np.ndarray:
    """Embed a single-subsystem operator into the full Hilbert space (A first)."""
    op = as_matrix(op, square=True)
    if factor == "A":
        return np.kron(op, np.eye(space.dim_b))
    if factor == "B":
        return np.kron(np.eye(space.dim_a), op)
    raise ValueError("factor must be 'A' or 'B'")


def kernel_overlap(basis: Sequence[np.ndarray], target: Sequence[np.ndarray]) -> float:
    """Largest residual of projecting each target vector onto span(basis)."""
    b = np.column_stack(basis)
    q, _ = np.linalg.qr(b)
    worst = 0.0
    for t in target:
        r = t - q @ (dag(q) @ t)
        worst = max(worst, float(np.linalg.norm(r)))
    return worst
