import numpy as np
import pytest

from purcellsim.hilbert import (
    DensityMatrix,
    DimensionError,
    PureState,
    SystemSpace,
    build_system_operators,
    expectation,
    tensor_product,
)


def test_space_dimensions():
    assert SystemSpace(2, 1).total_dim == 4
    assert SystemSpace(3, 2).total_dim == 9
    assert SystemSpace(2, 5).cavity_dim == 6


@pytest.mark.parametrize("levels,cutoff", [(1, 2), (4, 2), (2, 0), (2, -1)])
def test_space_rejects_bad_arguments(levels, cutoff):
    with pytest.raises(ValueError):
        SystemSpace(levels, cutoff)


def test_number_operator_spectrum_per_sector():
    ops = build_system_operators(SystemSpace(2, 1))
    # a+a is diagonal with {0, 1} repeated in each emitter sector
    diag = np.real(np.diag(ops.number))
    assert np.allclose(sorted(diag), [0, 0, 1, 1])
    assert np.allclose(ops.number, np.diag(diag))


def test_commutator_against_hand_built_matrices():
    space = SystemSpace(2, 3)
    ops = build_system_operators(space)
    comm = ops.a @ ops.a_dag - ops.a_dag @ ops.a
    # hand-built 8x8: per emitter sector the truncated ladder gives
    # diag(1, 1, 1, -3) because the cutoff removes aa+ in the top state
    sector = np.diag([1.0, 1.0, 1.0, -3.0])
    expected = np.kron(np.eye(2), sector)
    assert np.allclose(comm, expected, atol=1e-12)
    # identity everywhere below the cutoff
    below = [space.index(l, n) for l in range(2) for n in range(3)]
    assert np.allclose(comm[np.ix_(below, below)], np.eye(6), atol=1e-12)


def test_excited_projector_and_completeness():
    ops = build_system_operators(SystemSpace(2, 2))
    proj = ops.sigma_plus @ ops.sigma_minus
    assert np.allclose(proj, ops.excited_projector)
    assert np.allclose(proj @ proj, proj, atol=1e-12)
    # sigma+ sigma- + sigma- sigma+ = identity on the two-level sector
    assert np.allclose(proj + ops.sigma_minus @ ops.sigma_plus, ops.identity, atol=1e-12)


def test_three_level_operators():
    ops = build_system_operators(SystemSpace(3, 2))
    assert ops.filling_projector is not None
    assert ops.lower_fx is not None
    # |X><f| maps the filling state to the exciton
    f_state = PureState.basis(ops.space, 2, 0)
    moved = ops.lower_fx @ f_state.amplitudes
    assert np.isclose(np.vdot(PureState.basis(ops.space, 1, 0).amplitudes, moved), 1.0)


def test_tensor_product_identities():
    assert np.allclose(tensor_product(np.eye(2), np.eye(3)), np.eye(6))
    sz = np.diag([1.0, -1.0])
    eig = np.linalg.eigvalsh(tensor_product(sz, np.eye(2)))
    assert np.allclose(sorted(eig), [-1, -1, 1, 1])


def test_tensor_product_mixed_product_rule(rng):
    a, b, c, d = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
                  for _ in range(4))
    left = tensor_product(a, b) @ tensor_product(c, d)
    right = tensor_product(a @ c, b @ d)
    assert np.allclose(left, right, atol=1e-12)


def test_tensor_associativity(rng):
    mats = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            for _ in range(3)]
    left = tensor_product(tensor_product(mats[0], mats[1]), mats[2])
    right = tensor_product(mats[0], tensor_product(mats[1], mats[2]))
    assert np.max(np.abs(left - right)) < 1e-12


def test_expectation_trivials():
    space = SystemSpace(2, 2)
    ops = build_system_operators(space)
    rho = DensityMatrix.ground_state(space)
    assert np.isclose(expectation(ops.identity, rho), 1.0)
    assert np.isclose(expectation(ops.excited_projector, rho), 0.0)
    # maximally mixed two-level sector at zero photons
    mixed = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    mixed[space.index(0, 0), space.index(0, 0)] = 0.5
    mixed[space.index(1, 0), space.index(1, 0)] = 0.5
    assert np.isclose(expectation(ops.excited_projector, DensityMatrix(mixed, space)), 0.5)


def test_expectation_hermitian_is_real(rng):
    space = SystemSpace(2, 2)
    ops = build_system_operators(space)
    amp = rng.standard_normal(space.total_dim) + 1j * rng.standard_normal(space.total_dim)
    state = PureState(amp, space).normalized()
    for op in (ops.number, ops.excited_projector, ops.sigma_z):
        assert abs(expectation(op, state).imag) < 1e-10


def test_expectation_dimension_mismatch():
    with pytest.raises(DimensionError):
        expectation(np.eye(3), DensityMatrix.ground_state(SystemSpace(2, 1)))


def test_density_matrix_validation():
    space = SystemSpace(2, 1)
    good = DensityMatrix.ground_state(space)
    good.validate()
    bad = DensityMatrix(good.entries * 1.1, space)
    with pytest.raises(ValueError):
        bad.validate()
    skewed = good.entries.copy()
    skewed[0, 1] = 0.5
    with pytest.raises(ValueError):
        DensityMatrix(skewed, space).validate()


def test_pure_state_norm():
    space = SystemSpace(2, 1)
    st = PureState(np.array([1.0, 1.0, 0.0, 0.0]), space)
    with pytest.raises(ValueError):
        st.validate()
    st.normalized().validate()
    rho = st.to_density()
    rho.validate()
