import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liestoch.errors import (
    DimensionError,
    GroupMismatchError,
    MembershipError,
    NotInAlgebraError,
    UnsupportedGroupError,
)
from liestoch.groups import (
    GROUP_NAMES,
    Ad,
    AlgebraVector,
    adjoint_matrices,
    bracket,
    bracket_coords,
    from_matrix,
    from_matrix_coords,
    get_group,
    group_inverse,
    membership_defect,
    random_group_element,
    structure_constants,
    to_matrix,
    to_matrix_coords,
)
from liestoch.linalg import mat_exp

RNG = np.random.default_rng(42)


def test_group_lookup_case_insensitive_and_unknown():
    assert get_group("SO3") is get_group("so3")
    with pytest.raises(UnsupportedGroupError):
        get_group("su2")


def test_basis_shapes():
    dims = {"so3": (3, 3), "se2": (3, 3), "se3": (6, 4), "e11": (3, 3),
            "n3": (3, 3), "sl2r": (3, 2)}
    for name, (n, d) in dims.items():
        spec = get_group(name)
        assert spec.algebra_dim == n and spec.matrix_dim == d
        assert spec.basis.shape == (n, d, d)


def test_bracket_so3_cyclic():
    spec = get_group("so3")
    e = [AlgebraVector(spec, row) for row in np.eye(3)]
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        assert np.allclose(bracket(e[i], e[j]).coords, np.eye(3)[k], atol=1e-14)


def test_bracket_sl2r_relations():
    spec = get_group("sl2r")
    h, ep, em = (AlgebraVector(spec, row) for row in np.eye(3))
    assert np.allclose(bracket(h, ep).coords, [0, 2, 0], atol=1e-14)
    assert np.allclose(bracket(h, em).coords, [0, 0, -2], atol=1e-14)
    assert np.allclose(bracket(ep, em).coords, [1, 0, 0], atol=1e-14)


def test_bracket_antisymmetry_and_self():
    for name in GROUP_NAMES:
        spec = get_group(name)
        a = AlgebraVector(spec, RNG.standard_normal(spec.algebra_dim))
        b = AlgebraVector(spec, RNG.standard_normal(spec.algebra_dim))
        assert np.max(np.abs(bracket(a, a).coords)) == 0.0
        assert np.array_equal(bracket(a, b).coords, -bracket(b, a).coords)


def test_bracket_rejects_mixed_groups():
    a = AlgebraVector(get_group("so3"), np.ones(3))
    b = AlgebraVector(get_group("n3"), np.ones(3))
    with pytest.raises(GroupMismatchError):
        bracket(a, b)


def test_structure_constants_oracles():
    c = structure_constants(get_group("n3"))
    expected = np.zeros((3, 3, 3))
    expected[2, 0, 1] = 1.0  # [X, Y] = Z
    expected[2, 1, 0] = -1.0
    assert np.max(np.abs(c - expected)) < 1e-12

    c = structure_constants(get_group("se2"))
    # [H, e1] = e2, [H, e2] = -e1, [e1, e2] = 0
    assert abs(c[2, 0, 1] - 1.0) < 1e-12
    assert abs(c[1, 0, 2] + 1.0) < 1e-12
    assert np.max(np.abs(c[:, 1, 2])) < 1e-12

    c = structure_constants(get_group("e11"))
    # [H, e1] = e1, [H, e2] = -e2
    assert abs(c[1, 0, 1] - 1.0) < 1e-12
    assert abs(c[2, 0, 2] + 1.0) < 1e-12


def test_structure_constants_match_bracket_exactly():
    for name in GROUP_NAMES:
        spec = get_group(name)
        c = structure_constants(spec)
        n = spec.algebra_dim
        for i in range(n):
            for j in range(n):
                via_bracket = bracket(
                    AlgebraVector(spec, np.eye(n)[i]), AlgebraVector(spec, np.eye(n)[j])
                ).coords
                assert np.array_equal(via_bracket, c[:, i, j])


def test_jacobi_identity_all_groups():
    for name in GROUP_NAMES:
        spec = get_group(name)
        for _ in range(10):
            a, b, c = (RNG.standard_normal(spec.algebra_dim) for _ in range(3))
            total = (
                bracket_coords(spec, a, bracket_coords(spec, b, c))
                + bracket_coords(spec, b, bracket_coords(spec, c, a))
                + bracket_coords(spec, c, bracket_coords(spec, a, b))
            )
            assert np.max(np.abs(total)) < 1e-10


def test_matrix_roundtrip():
    for name in GROUP_NAMES:
        spec = get_group(name)
        assert np.max(np.abs(to_matrix_coords(spec, np.zeros(spec.algebra_dim)))) == 0.0
        coords = RNG.standard_normal(spec.algebra_dim)
        vec = AlgebraVector(spec, coords)
        back = from_matrix(spec, to_matrix(vec))
        assert np.max(np.abs(back.coords - coords)) < 1e-12


def test_from_matrix_rejects_off_span():
    spec = get_group("so3")
    mat = to_matrix_coords(spec, np.array([0.3, -0.2, 0.9]))
    mat = mat + 0.01 * np.eye(3)  # symmetric contamination
    with pytest.raises(NotInAlgebraError):
        from_matrix_coords(spec, mat)


def test_membership_defects():
    for name in GROUP_NAMES:
        spec = get_group(name)
        assert membership_defect(spec, spec.identity) == 0.0
        coords = RNG.standard_normal(spec.algebra_dim)
        coords /= max(np.linalg.norm(coords), 1.0)
        g = mat_exp(to_matrix_coords(spec, coords))
        assert membership_defect(spec, g) < 1e-10


def test_membership_defect_sl2r_example():
    assert abs(membership_defect(get_group("sl2r"), 2.0 * np.eye(2)) - 3.0) < 1e-14


def test_membership_defect_wrong_dimension():
    with pytest.raises(DimensionError):
        membership_defect(get_group("so3"), np.eye(4))


def test_group_inverse_structural():
    for name in GROUP_NAMES:
        spec = get_group(name)
        g = random_group_element(spec, RNG, 0.8)
        gi = group_inverse(spec, g)
        assert np.max(np.abs(g @ gi - spec.identity)) < 1e-12
        assert membership_defect(spec, gi) < 1e-10


def test_ad_identity_and_inverse_composition():
    for name in GROUP_NAMES:
        spec = get_group(name)
        v = AlgebraVector(spec, RNG.standard_normal(spec.algebra_dim))
        assert np.max(np.abs(Ad(spec.identity, v).coords - v.coords)) < 1e-14
        g = random_group_element(spec, RNG, 0.4)
        forward = adjoint_matrices(spec, g)
        backward = adjoint_matrices(spec, group_inverse(spec, g))
        assert np.max(np.abs(forward @ backward - np.eye(spec.algebra_dim))) < 1e-10


def test_ad_composition():
    # Ad(g h) = Ad(g) Ad(h)
    for name in GROUP_NAMES:
        spec = get_group(name)
        g = random_group_element(spec, RNG, 0.4)
        h = random_group_element(spec, RNG, 0.4)
        combined = adjoint_matrices(spec, g @ h)
        composed = adjoint_matrices(spec, g) @ adjoint_matrices(spec, h)
        assert np.max(np.abs(combined - composed)) < 1e-10


def test_ad_so3_rotation_action():
    spec = get_group("so3")
    theta = 0.8
    g = mat_exp(theta * spec.basis[2])
    adm = adjoint_matrices(spec, g)
    rot = np.array(
        [[np.cos(theta), -np.sin(theta), 0.0],
         [np.sin(theta), np.cos(theta), 0.0],
         [0.0, 0.0, 1.0]]
    )
    assert np.max(np.abs(adm - rot)) < 1e-12


def test_ad_rejects_non_member():
    spec = get_group("so3")
    v = AlgebraVector(spec, np.ones(3))
    with pytest.raises(MembershipError):
        Ad(2.0 * np.eye(3), v)


def test_ad_derivative_is_bracket():
    # d/dt Ad(exp(tA)) B at t = 0 equals [A, B]
    step = 1e-5
    for name in GROUP_NAMES:
        spec = get_group(name)
        a = RNG.standard_normal(spec.algebra_dim)
        b = RNG.standard_normal(spec.algebra_dim)
        plus = adjoint_matrices(spec, mat_exp(to_matrix_coords(spec, step * a))) @ b
        minus = adjoint_matrices(spec, mat_exp(to_matrix_coords(spec, -step * a))) @ b
        fd = (plus - minus) / (2.0 * step)
        assert np.max(np.abs(fd - bracket_coords(spec, a, b))) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(GROUP_NAMES))
def test_bracket_bilinearity(seed, name):
    rng = np.random.default_rng(seed)
    spec = get_group(name)
    a, b, c = (rng.standard_normal(spec.algebra_dim) for _ in range(3))
    s = float(rng.uniform(-2, 2))
    left = bracket_coords(spec, s * a + b, c)
    right = s * bracket_coords(spec, a, c) + bracket_coords(spec, b, c)
    assert np.max(np.abs(left - right)) < 1e-12
