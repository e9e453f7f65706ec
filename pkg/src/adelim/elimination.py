"""Projector-based elimination of the fast factor B of a bipartite generator.

With a reference fast state rho_b the projector is
``P = 1_(AA) (x) |rho_b>><<1_B|`` (GROUPED ordering) and ``Q = 1 - P``.
The slow generator is expanded around z = 0::

    L0 = PLP - PLQ (QLQ)^-1 QLP
    Ln = -PLQ (QLQ)^-(n+1) QLP

and the slow state evolves as ``exp[(1 - L1)^-1 L0 t] (1 - L1)^-1 rho_s(0)``.

``(QLQ)^-1`` always means the inverse inside the algebra of Q-supported
operators, ``X = Q X Q`` with ``QLQ X = X QLQ = Q``. It is obtained as
``Q pinv(QLQ) Q``, which is exact whenever QLQ is invertible on range(Q).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .liouville import (
    BipartiteLindblad,
    BipartiteSpace,
    DensityVec,
    Ordering,
    OrderingError,
    SuperOp,
    embed_product,
    identity_vector,
    vec,
)
from .numkernel import NumericalError, pinv, rank


class Method(str, enum.Enum):
    EXACT = "exact"
    FACTORIZED = "factorized"
    PERTURBATIVE = "perturbative"


class SingularBlockWarning(RuntimeWarning):
    """QLQ is rank deficient on range(Q): slow dynamics leak into Q."""


class SeriesDivergenceWarning(RuntimeWarning):
    """Successive terms of the perturbative inverse are not shrinking."""


class UnvalidatedOrderWarning(UserWarning):
    """An expansion term beyond first order was requested."""


PROJECTOR_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProjectorPair:
    rho_b: DensityVec
    space: BipartiteSpace
    P: SuperOp
    Q: SuperOp
    P_B: np.ndarray
    Q_B: np.ndarray

    @property
    def embed(self) -> np.ndarray:
        """1_(AA) (x) |rho_b>>, mapping A vectors into range(P)."""
        return np.kron(np.eye(self.space.dim_a ** 2), self.rho_b.vec[:, None])

    @property
    def trace_b(self) -> np.ndarray:
        """1_(AA) (x) <<1_B|, the partial trace over B."""
        return np.kron(np.eye(self.space.dim_a ** 2), vec(np.eye(self.space.dim_b))[None, :])

    def reduce(self, s: SuperOp) -> np.ndarray:
        """The dimA^2 x dimA^2 matrix of a superoperator restricted to range(P)."""
        self._check(s)
        return self.trace_b @ s.matrix @ self.embed

    def lift(self, a_matrix) -> SuperOp:
        """Inverse of ``reduce`` for operators supported on range(P)."""
        return SuperOp(self.embed @ np.asarray(a_matrix) @ self.trace_b,
                       self.space, Ordering.GROUPED)

    def _check(self, s: SuperOp) -> None:
        if s.ordering is not Ordering.GROUPED or s.space != self.space:
            raise OrderingError("superoperator must be GROUPED on the projector's space")


def build_projectors(rho_b: DensityVec, space: BipartiteSpace, tol: float = 1e-10) -> ProjectorPair:
    if rho_b.ordering is not Ordering.FLAT or rho_b.dim != space.dim_b:
        raise ValueError("reference state must be a FLAT state on subsystem B")
    tr = rho_b.trace()
    if abs(tr - 1.0) > tol:
        raise ValueError(f"reference state must have unit trace, got {tr:.6g}")
    nb = space.dim_b ** 2
    p_b = np.outer(rho_b.vec, vec(np.eye(space.dim_b)))
    q_b = np.eye(nb) - p_b
    ia = np.eye(space.dim_a ** 2)
    P = SuperOp(np.kron(ia, p_b), space, Ordering.GROUPED)
    Q = SuperOp(np.kron(ia, q_b), space, Ordering.GROUPED)
    pair = ProjectorPair(rho_b, space, P, Q, p_b, q_b)
    _verify_projectors(pair)
    return pair


def _verify_projectors(pq: ProjectorPair) -> None:
    P, Q = pq.P.matrix, pq.Q.matrix
    scale = max(1.0, float(np.max(np.abs(P))))
    checks = {
        "P^2 = P": P @ P - P,
        "Q^2 = Q": Q @ Q - Q,
        "PQ = 0": P @ Q,
        "QP = 0": Q @ P,
    }
    for name, resid in checks.items():
        if np.max(np.abs(resid)) > PROJECTOR_TOL * scale * pq.space.dim_b ** 2:
            raise NumericalError(f"projector identity {name} violated")


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    L: SuperOp
    projectors: ProjectorPair
    PLP: SuperOp
    PLQ: SuperOp
    QLP: SuperOp
    QLQ: SuperOp
    simplified_qlp: bool
    L_B: SuperOp | None = None


def decompose(L: SuperOp | BipartiteLindblad, pq: ProjectorPair, tol: float = 1e-10) -> BlockDecomposition:
    """Split L into its four P/Q blocks.

    When the split generator is available and ``L_B rho_b = 0``,
    ``simplified_qlp`` is set: QLP then reduces to Q L_AB P.
    """
    l_b = None
    parts = None
    if isinstance(L, BipartiteLindblad):
        parts = L
        l_b = L.L_B
        L = L.total
    if L.ordering is not Ordering.GROUPED:
        raise OrderingError("decompose expects a GROUPED generator")
    if L.space != pq.space:
        raise ValueError(f"generator space {L.space} differs from projector space {pq.space}")
    P, Q = pq.P, pq.Q
    simplified = False
    if l_b is not None:
        scale = max(1.0, float(np.max(np.abs(l_b.matrix))))
        simplified = bool(np.max(np.abs(l_b.matrix @ pq.rho_b.vec)) <= tol * scale)
    blocks = BlockDecomposition(L, pq, P @ L @ P, P @ L @ Q, Q @ L @ P, Q @ L @ Q,
                                simplified, l_b)
    if simplified and parts is not None:
        # Q L P collapses to the coupling term alone when rho_b is L_B-stationary.
        qlp_ab = Q @ parts.L_AB @ P
        if np.max(np.abs(qlp_ab.matrix - blocks.QLP.matrix)) > 1e-9 * max(1.0, scale):
            raise NumericalError("QLP simplification inconsistent with L_B rho_b = 0")
    return blocks


def _restricted_inverse(m: np.ndarray, q: np.ndarray, rank_tol: float) -> np.ndarray:
    return q @ pinv(m, rank_tol) @ q


def _factorized_inverse_b(blocks: BlockDecomposition, rank_tol: float) -> np.ndarray:
    if blocks.L_B is None:
        raise ValueError("factorized and perturbative inverses need the split generator (L_B)")
    q_b = blocks.projectors.Q_B
    return _restricted_inverse(q_b @ blocks.L_B.matrix @ q_b, q_b, rank_tol)


def qlq_is_singular(blocks: BlockDecomposition, rank_tol: float = 1e-10) -> bool:
    """True when QLQ loses rank on range(Q)."""
    return rank(blocks.QLQ.matrix, rank_tol) < rank(blocks.projectors.Q.matrix, rank_tol)


def invert_qlq(blocks: BlockDecomposition, method: Method | str = Method.EXACT,
               terms: int = 1, rank_tol: float = 0.0) -> SuperOp:
    """Approximate (QLQ)^-1 on range(Q).

    EXACT uses the pseudoinverse of the full QLQ. FACTORIZED keeps only the
    dominant 1_(AA) (x) Q_B L_B Q_B part. PERTURBATIVE expands
    ``(D + V)^-1 = D^-1 sum_k (-V D^-1)^k`` up to ``k = terms`` with D the
    factorized part and V the remainder; ``terms = 0`` equals FACTORIZED.
    """
    method = Method(method)
    pq = blocks.projectors
    q = pq.Q.matrix
    if method is Method.EXACT:
        if qlq_is_singular(blocks, rank_tol or 1e-10):
            warnings.warn("QLQ is singular on range(Q)", SingularBlockWarning, stacklevel=2)
        x = _restricted_inverse(blocks.QLQ.matrix, q, rank_tol)
        return SuperOp(x, pq.space, Ordering.GROUPED)

    ia = np.eye(pq.space.dim_a ** 2)
    d_inv = np.kron(ia, _factorized_inverse_b(blocks, rank_tol))
    if method is Method.FACTORIZED:
        return SuperOp(d_inv, pq.space, Ordering.GROUPED)

    if terms < 0:
        raise ValueError("number of series terms must be >= 0")
    d = np.kron(ia, pq.Q_B @ blocks.L_B.matrix @ pq.Q_B)
    v = blocks.QLQ.matrix - d
    step = -v @ d_inv
    term = d_inv
    total = d_inv.copy()
    norms = [float(np.linalg.norm(term))]
    for _ in range(terms):
        term = term @ step
        total = total + term
        norms.append(float(np.linalg.norm(term)))
    if len(norms) >= 2 and norms[-1] > norms[-2] > 0:
        warnings.warn(f"perturbative series terms grow ({norms[-2]:.3e} -> {norms[-1]:.3e})",
                      SeriesDivergenceWarning, stacklevel=2)
    return SuperOp(total, pq.space, Ordering.GROUPED)


def expansion_term(blocks: BlockDecomposition, inverse: SuperOp, n: int) -> SuperOp:
    """L_n of the small-z expansion; n = 0 gives L0."""
    if n < 0:
        raise ValueError("expansion order must be >= 0")
    if n > 1:
        warnings.warn(f"expansion term L{n} is computed but not validated",
                      UnvalidatedOrderWarning, stacklevel=2)
    x = inverse.matrix
    power = np.linalg.matrix_power(x, n + 1)
    correction = blocks.PLQ.matrix @ power @ blocks.QLP.matrix
    if n == 0:
        return blocks.PLP.like(blocks.PLP.matrix - correction)
    return blocks.PLP.like(-correction)


@dataclass(frozen=True, eq=False)
class EffectiveGenerator:
    """Result of eliminating B.

    ``reduced_A_generator`` is the resolved generator ``(1 - L1)^-1 L0``
    restricted to range(P) and written on subsystem A alone;
    ``reduced_initial_map`` likewise for ``(1 - L1)^-1``.
    """

    blocks: BlockDecomposition
    method: Method
    order: int
    inverse: SuperOp
    terms: tuple
    resolved_generator: SuperOp
    initial_map: SuperOp
    reduced_A_generator: np.ndarray
    reduced_initial_map: np.ndarray
    condition_number: float
    qlq_singular: bool = False
    validated: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def projectors(self) -> ProjectorPair:
        return self.blocks.projectors

    @property
    def L0(self) -> SuperOp:
        return self.terms[0]

    @property
    def L1(self) -> SuperOp:
        if len(self.terms) > 1:
            return self.terms[1]
        return SuperOp.zero(self.blocks.L.space, Ordering.GROUPED)

    @property
    def reduced_L0(self) -> np.ndarray:
        return self.projectors.reduce(self.L0)

    @property
    def reduced_L1(self) -> np.ndarray:
        return self.projectors.reduce(self.L1)


def effective_generator(L: SuperOp | BipartiteLindblad, pq: ProjectorPair,
                        method: Method | str = Method.EXACT, order: int = 1,
                        terms: int = 1, rank_tol: float = 0.0) -> EffectiveGenerator:
    """Eliminate B and assemble L0..L_order and the resolved slow generator.

    ``terms`` is the truncation of the perturbative inverse and is ignored
    by the other methods.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    method = Method(method)
    blocks = decompose(L, pq)
    singular = qlq_is_singular(blocks, rank_tol or 1e-10) if method is Method.EXACT else False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularBlockWarning)
        inverse = invert_qlq(blocks, method, terms=terms, rank_tol=rank_tol)
    if singular:
        warnings.warn("QLQ is singular on range(Q)", SingularBlockWarning, stacklevel=2)
    expansion = tuple(expansion_term(blocks, inverse, n) for n in range(order + 1))

    full = blocks.L
    ident = np.eye(full.matrix.shape[0], dtype=complex)
    l1 = expansion[1].matrix if order >= 1 else np.zeros_like(ident)
    one_minus = ident - l1
    cond = float(np.linalg.cond(one_minus))
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"(1 - L1) is singular (condition number {cond:.3e}); "
                             "the low-order approximation is invalid")
    initial = np.linalg.solve(one_minus, ident)
    resolved = initial @ expansion[0].matrix

    resolved_op = SuperOp(resolved, full.space, Ordering.GROUPED)
    initial_op = SuperOp(initial, full.space, Ordering.GROUPED)
    return EffectiveGenerator(
        blocks=blocks,
        method=method,
        order=order,
        inverse=inverse,
        terms=expansion,
        resolved_generator=resolved_op,
        initial_map=initial_op,
        reduced_A_generator=pq.reduce(resolved_op),
        reduced_initial_map=pq.reduce(initial_op),
        condition_number=cond,
        qlq_singular=singular,
        validated=order <= 1,
        diagnostics={"terms": terms} if method is Method.PERTURBATIVE else {},
    )


def effective_propagate(eg: EffectiveGenerator, rho0_a: DensityVec, times: Sequence[float]):
    """Slow-subsystem trajectory from the resolved generator.

    The initial state is embedded as rho0_A (x) rho_b, mapped through
    (1 - L1)^-1, propagated and traced over B. At t = 0 the returned state
    is therefore the modified initial state, not rho0_A itself.
    """
    from .simulate import Trajectory, propagate

    pq = eg.projectors
    if rho0_a.dim != pq.space.dim_a or rho0_a.ordering is not Ordering.FLAT:
        raise ValueError("initial state must be a FLAT state on subsystem A")
    full0 = embed_product(rho0_a, pq.rho_b)
    start = pq.trace_b @ (eg.initial_map.matrix @ full0.vec)
    states = propagate(eg.reduced_A_generator, start, times)
    return Trajectory(np.asarray(times, dtype=float), states, pq.space.dim_a, Ordering.FLAT)


def slow_spectrum(eg: EffectiveGenerator) -> np.ndarray:
    """Eigenvalues of the reduced resolved generator, sorted by decreasing real part."""
    ev = np.linalg.eigvals(eg.reduced_A_generator)
    return ev[np.lexsort((ev.imag, -np.round(ev.real, 14)))]


def trace_row_residual(s: SuperOp) -> float:
    one = identity_vector(s.space, s.ordering)
    return float(np.max(np.abs(one @ s.matrix)))
