import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adelim.liouville import (
    BipartiteLindblad,
    BipartiteSpace,
    DensityVec,
    LindbladModel,
    Ordering,
    OrderingError,
    SteadyStateError,
    SuperOp,
    embed_product,
    expect,
    grouped_permutation,
    grouped_reorder,
    identity_vector,
    kernel_overlap,
    lindblad_superop,
    local_operator,
    partial_trace_B,
    sandwich,
    steady_state,
    trace_distance,
    unvec,
    vec,
)
from adelim.models import TwoQubitParams, build_two_qubit, two_qubit_branch_state
from adelim.operators import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, ket, projector

from conftest import random_complex, random_density, random_hermitian


def test_vec_examples():
    assert np.array_equal(vec([[1, 2], [3, 4]]), [1, 3, 2, 4])
    assert np.array_equal(vec(np.eye(2)), [1, 0, 0, 1])
    # |0><1| = conj|1> (x) |0> = e2
    assert np.array_equal(vec(np.outer(ket(2, 0), ket(2, 1))), np.eye(4)[2])
    with pytest.raises(ValueError):
        vec(np.ones((2, 3)))


def test_unvec_round_trips(rng):
    assert np.array_equal(unvec([1, 3, 2, 4], 2), [[1, 2], [3, 4]])
    assert np.array_equal(unvec(vec(SIGMA_Y), 2), SIGMA_Y)
    v = random_complex(rng, 9, 1).ravel()
    assert np.array_equal(vec(unvec(v, 3)), v)
    with pytest.raises(ValueError):
        unvec(np.ones(5), 2)


def test_pauli_convention():
    assert np.allclose(SIGMA_Z @ ket(2, 1), ket(2, 1))
    assert np.allclose(SIGMA_Z @ ket(2, 0), -ket(2, 0))
    assert np.allclose(SIGMA_PLUS @ ket(2, 0), ket(2, 1))
    assert np.allclose(SIGMA_Y, -1j * (SIGMA_PLUS - SIGMA_MINUS))
    # the Pauli algebra survives the relabelling
    assert np.allclose(SIGMA_X @ SIGMA_Y, 1j * SIGMA_Z)


def test_sandwich_examples(rng):
    assert np.array_equal(sandwich(np.eye(2), np.eye(2)).matrix, np.eye(4))
    rho = random_density(rng, 2)
    assert np.allclose(sandwich(SIGMA_X, np.eye(2)) @ vec(rho), vec(SIGMA_X @ rho))
    excited = vec(projector(ket(2, 1)))
    assert np.allclose(sandwich(SIGMA_MINUS, SIGMA_MINUS) @ excited, vec(projector(ket(2, 0))))
    with pytest.raises(ValueError):
        sandwich(np.eye(2), np.eye(3))


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_sandwich_identity(d, seed):
    rng = np.random.default_rng(seed)
    o1, o2, rho = random_complex(rng, d), random_complex(rng, d), random_complex(rng, d)
    lhs = sandwich(o1, o2) @ vec(rho)
    rhs = vec(o1 @ rho @ o2.conj().T)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(1.0, np.max(np.abs(rhs)))


def direct_lindblad(model, rho):
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for x, rate in model.jumps:
        xdx = x.conj().T @ x
        out = out + rate * (x @ rho @ x.conj().T - 0.5 * (xdx @ rho + rho @ xdx))
    return out


def random_model(rng, d, n_jumps=2):
    jumps = tuple((random_complex(rng, d), float(rng.uniform(0, 2))) for _ in range(n_jumps))
    return LindbladModel(random_hermitian(rng, d), jumps)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 5), n=st.integers(0, 3), seed=st.integers(0, 2**32 - 1))
def test_lindblad_matches_direct_master_equation(d, n, seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, d, n)
    L = lindblad_superop(model)
    rho = random_density(rng, d)
    out = unvec(L @ vec(rho), d)
    assert np.allclose(out, direct_lindblad(model, rho), atol=1e-12)
    # trace preservation row
    scale = max(1.0, np.max(np.abs(L.matrix)))
    assert np.max(np.abs(identity_vector(d) @ L.matrix)) <= 1e-12 * scale
    # Hermiticity preservation
    assert np.max(np.abs(out - out.conj().T)) <= 1e-12 * scale


def test_lindblad_examples():
    assert np.array_equal(lindblad_superop(LindbladModel(np.zeros((2, 2)))).matrix, np.zeros((4, 4)))
    L = lindblad_superop(LindbladModel(np.zeros((2, 2)), ((SIGMA_MINUS, 1.0),)))
    ev = np.sort_complex(np.linalg.eigvals(L.matrix))
    assert np.allclose(ev, [-1, -0.5, -0.5, 0], atol=1e-14)


def test_two_qubit_generator_term_by_term():
    chi, gamma = 0.1, 1.0
    model = build_two_qubit(TwoQubitParams(gamma, chi))
    flat = grouped_reorder(model.total).matrix
    i2 = np.eye(2)
    sp_b, sm_b = np.kron(i2, SIGMA_PLUS), np.kron(i2, SIGMA_MINUS)
    zz = np.kron(SIGMA_Z, SIGMA_Z)
    rng = np.random.default_rng(3)
    for _ in range(3):
        rho = random_density(rng, 4)
        drive = (sp_b - sm_b) @ rho - rho @ (sp_b - sm_b)
        decay = gamma * (sm_b @ rho @ sm_b.conj().T
                         - 0.5 * (sm_b.conj().T @ sm_b @ rho + rho @ sm_b.conj().T @ sm_b))
        coupling = -1j * chi * (zz @ rho - rho @ zz)
        assert np.allclose(unvec(flat @ vec(rho), 4), drive + decay + coupling, atol=1e-14)


def test_lindblad_model_validation():
    with pytest.raises(ValueError):
        LindbladModel(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        LindbladModel(np.eye(2), ((SIGMA_MINUS, -1.0),))
    with pytest.raises(ValueError):
        LindbladModel(np.eye(2), ((np.eye(3), 1.0),))


def flat_index(a2, b2, a1, b1, da, db):
    return ((a2 * db + b2) * da + a1) * db + b1


def test_grouped_permutation_table():
    p = grouped_permutation(BipartiteSpace(2, 2))
    assert flat_index(0, 1, 1, 0, 2, 2) == 6 and p[6] == 6
    for a2, a1, b2, b1 in itertools.product(range(2), repeat=4):
        g = ((a2 * 2 + a1) * 2 + b2) * 2 + b1
        assert p[g] == flat_index(a2, b2, a1, b1, 2, 2)


def test_grouped_permutation_trivial_b():
    assert np.array_equal(grouped_permutation(BipartiteSpace(3, 1)), np.arange(9))


@pytest.mark.parametrize("da,db", [(2, 2), (3, 2), (2, 3), (4, 1)])
def test_grouped_reorder_involution(rng, da, db):
    space = BipartiteSpace(da, db)
    s = SuperOp(random_complex(rng, (da * db) ** 2), space)
    g = grouped_reorder(s)
    assert g.ordering is Ordering.GROUPED
    back = grouped_reorder(g)
    assert back.ordering is Ordering.FLAT and np.array_equal(back.matrix, s.matrix)


def test_grouped_reorder_product_structure(rng):
    space = BipartiteSpace(2, 3)
    oa, ob = random_complex(rng, 2), random_complex(rng, 3)
    full = sandwich(np.kron(oa, np.eye(3)), np.kron(np.eye(2), ob)).matrix
    g = grouped_reorder(SuperOp(full, space))
    expected = np.kron(sandwich(oa, np.eye(2)).matrix, sandwich(np.eye(3), ob).matrix)
    assert np.allclose(g.matrix, expected)


def test_ordering_mismatch_is_an_error(rng):
    space = BipartiteSpace(2, 2)
    s = SuperOp(random_complex(rng, 16), space)
    with pytest.raises(OrderingError):
        s + grouped_reorder(s)
    with pytest.raises(OrderingError):
        grouped_reorder(SuperOp(np.eye(4), 2))


def test_density_vec_grouped_round_trip(rng):
    space = BipartiteSpace(2, 3)
    rho = random_density(rng, 6)
    dv = DensityVec.from_matrix(rho, space, Ordering.GROUPED)
    assert np.allclose(dv.matrix(), rho)
    assert np.isclose(dv.trace(), 1.0)


def test_partial_trace_examples(rng):
    ra, rb = random_density(rng, 2), random_density(rng, 3)
    prod = embed_product(DensityVec.from_matrix(ra), DensityVec.from_matrix(rb))
    assert np.allclose(prod.matrix(), np.kron(ra, rb))
    assert np.allclose(partial_trace_B(prod).vec, vec(ra))

    space = BipartiteSpace(2, 2)
    bell_ab = np.zeros(4, dtype=complex)
    bell_ab[[0, 3]] = 1 / np.sqrt(2)
    ent = DensityVec.from_matrix(projector(bell_ab), space, Ordering.GROUPED)
    assert np.allclose(partial_trace_B(ent).vec, vec(np.eye(2) / 2))

    half = DensityVec.from_matrix(np.eye(4) / 2, space, Ordering.GROUPED)
    assert np.allclose(partial_trace_B(half).vec, vec(np.eye(2)))
    with pytest.raises(OrderingError):
        partial_trace_B(DensityVec.from_matrix(np.eye(4) / 4, space))


def test_partial_trace_against_einsum(rng):
    space = BipartiteSpace(3, 2)
    rho = random_density(rng, 6)
    ref = np.einsum("ijkj->ik", rho.reshape(3, 2, 3, 2))
    out = partial_trace_B(DensityVec.from_matrix(rho, space, Ordering.GROUPED))
    assert np.allclose(unvec(out.vec, 3), ref)
    assert np.isclose(out.trace(), 1.0)


def test_steady_state_examples():
    decay = lindblad_superop(LindbladModel(np.zeros((2, 2)), ((SIGMA_MINUS, 1.0),)))
    ss = steady_state(decay)
    assert ss.unique
    assert np.allclose(ss.state.vec, vec(np.diag([1.0, 0.0])), atol=1e-12)

    zero = steady_state(SuperOp.zero(2))
    assert not zero.unique and zero.dimension == 4
    with pytest.raises(SteadyStateError):
        zero.state


def test_steady_state_two_qubit_kernel():
    p = TwoQubitParams(1.0, 0.1)
    model = build_two_qubit(p)
    ss = steady_state(model.total)
    assert ss.dimension == 2 and not ss.unique
    branches = []
    for k, branch in ((0, "s0"), (1, "s1")):
        rho_a = DensityVec.from_matrix(projector(ket(2, k)))
        branches.append(embed_product(rho_a, two_qubit_branch_state(p, branch)).vec)
    basis = [s.vec for s in ss.states]
    assert kernel_overlap(basis, branches) < 1e-10
    assert kernel_overlap(branches, basis) < 1e-10


def test_steady_state_rejects_non_trace_preserving():
    with pytest.raises(ValueError):
        steady_state(SuperOp(-np.eye(4), 2))


def test_steady_state_is_hermitian_unit_trace(rng):
    model = LindbladModel(random_hermitian(rng, 3), ((random_complex(rng, 3), 1.0),))
    rho = steady_state(lindblad_superop(model)).state
    m = rho.matrix()
    assert np.isclose(np.trace(m), 1.0)
    assert np.allclose(m, m.conj().T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(m)) > -1e-10


def test_bipartite_total_matches_full_space_assembly(rng):
    ma, mb = random_model(rng, 2, 1), random_model(rng, 3, 1)
    h_ab = random_hermitian(rng, 6)
    coupling = LindbladModel(h_ab, ((random_complex(rng, 6), 0.3),))
    bl = BipartiteLindblad.from_models(ma, mb, coupling)
    full = LindbladModel(
        np.kron(ma.hamiltonian, np.eye(3)) + np.kron(np.eye(2), mb.hamiltonian) + h_ab,
        ((np.kron(ma.jumps[0][0], np.eye(3)), ma.jumps[0][1]),
         (np.kron(np.eye(2), mb.jumps[0][0]), mb.jumps[0][1])) + coupling.jumps)
    ref = grouped_reorder(SuperOp(lindblad_superop(full).matrix, bl.space))
    assert np.allclose(bl.total.matrix, ref.matrix, atol=1e-12)


def test_expect_and_local_operator(rng):
    space = BipartiteSpace(2, 3)
    rho = random_density(rng, 6)
    dv = DensityVec.from_matrix(rho, space, Ordering.GROUPED)
    op = local_operator(SIGMA_X, space, "A")
    assert np.isclose(expect(op, dv), np.trace(op @ rho))
    with pytest.raises(ValueError):
        local_operator(SIGMA_X, space, "C")


def test_trace_distance():
    assert np.isclose(trace_distance(projector(ket(2, 0)), projector(ket(2, 1))), 1.0)
    assert trace_distance(np.eye(2) / 2, np.eye(2) / 2) == 0.0
