import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pulsecontrol.pauli import (GROUP, I, X, Y, Z, PauliError, SignedPauli, conjugate, multiply,
                                parse_pulses, render_pulses, toggling_frame)

group = st.sampled_from(GROUP)


def test_group_has_sixteen_distinct_elements():
    assert len(set(GROUP)) == 16


@pytest.mark.parametrize("p,q", list(itertools.product(GROUP, GROUP)))
def test_product_matches_matrices(p, q):
    np.testing.assert_allclose((p * q).matrix(), p.matrix() @ q.matrix(), atol=1e-15)


def test_associativity_exhaustive():
    for p, q, r in itertools.product(GROUP, repeat=3):
        assert multiply(multiply(p, q), r) == multiply(p, multiply(q, r))


@pytest.mark.parametrize("a,b,c", [(X, Y, Z), (Y, Z, X), (Z, X, Y)])
def test_cyclic_products(a, b, c):
    assert a * b == SignedPauli(c.axis, 1)
    assert b * a == SignedPauli(c.axis, 3)


def test_squares_are_identity():
    for p in (I, X, Y, Z):
        assert p * p == I


@given(group, group)
def test_conjugation_is_sign_flip(p, q):
    out = conjugate(p, q)
    want = q.dagger().matrix() @ p.matrix() @ q.matrix()
    np.testing.assert_allclose(out.matrix(), want, atol=1e-15)
    commute = np.allclose(p.matrix() @ q.matrix(), q.matrix() @ p.matrix())
    assert out == (p if commute else SignedPauli(p.axis, p.phase + 2))


@given(group)
def test_dagger_is_inverse(p):
    assert p * p.dagger() == I


def test_parse_and_render_round_trip():
    pulses = parse_pulses("i, x ,Z,x")
    assert pulses == (I, X, Z, X)
    assert render_pulses(pulses) == "I,X,Z,X"
    assert SignedPauli.from_label("-iY") == SignedPauli("Y", 3)


@pytest.mark.parametrize("bad", ["", "Q", "X,W"])
def test_parse_rejects_garbage(bad):
    with pytest.raises(PauliError):
        parse_pulses(bad)


def _matrix_signs(pulses, boundary=I):
    """Sign oracle from 2x2 matrices: U_k^dagger sigma U_k = s sigma."""
    u = np.eye(2, dtype=complex)
    out = []
    for p in pulses:
        u = p.matrix() @ u
        row = []
        for a in (X, Y, Z):
            m = u.conj().T @ a.matrix() @ u
            s = np.real(np.trace(m @ a.matrix())) / 2
            row.append(int(round(s)))
        out.append(row)
    return np.array(out)


def test_level1_sign_patterns():
    frame = toggling_frame("I,X,Z,X", boundary="Z")
    assert list(frame.axis_signs("x")) == [1, 1, -1, -1]
    assert list(frame.axis_signs("y")) == [1, -1, 1, -1]
    assert list(frame.axis_signs("z")) == [1, -1, -1, 1]
    np.testing.assert_array_equal(frame.signs, _matrix_signs(frame.pulses))
    assert frame.periodic


def test_level2_signs_repeat_level1():
    frame = toggling_frame("I,X,Z,X,I,X,Z,X")
    np.testing.assert_array_equal(frame.signs, _matrix_signs(frame.pulses))
    # the second half runs in a frame conjugated by Z, which flips x and y
    np.testing.assert_array_equal(frame.signs[4:], frame.signs[:4] * np.array([-1, -1, 1]))
    assert frame.periodic


def test_all_identity_frame():
    frame = toggling_frame("I,I,I,I")
    assert np.all(frame.signs == 1)


def test_single_x_flips_y_and_z():
    frame = toggling_frame("I,X")
    assert list(frame.signs[1]) == [1, -1, -1]
    assert not frame.periodic


def test_frame_rejects_phases_and_leading_pulse():
    with pytest.raises(PauliError):
        toggling_frame([I, SignedPauli("X", 2)])
    with pytest.raises(PauliError):
        toggling_frame("X,I")


def test_signs_are_read_only():
    frame = toggling_frame("I,X,Z,X", "Z")
    with pytest.raises(ValueError):
        frame.signs[0, 0] = -1


@given(st.lists(st.sampled_from("IXYZ"), min_size=1, max_size=12))
def test_frame_matches_matrix_oracle(axes):
    pulses = ["I"] + axes
    frame = toggling_frame(pulses)
    np.testing.assert_array_equal(frame.signs, _matrix_signs(frame.pulses))


def test_listed_products_and_conjugations():
    assert X * X == I
    assert X * Z == SignedPauli("Y", 3)
    iy = SignedPauli("Y", 1)
    assert iy * iy == SignedPauli("I", 2)
    assert conjugate(Z, X) == SignedPauli("Z", 2)
    assert conjugate(X, X) == X
    assert conjugate(Y, Z) == SignedPauli("Y", 2)


def test_level2_listed_sign_rows():
    frame = toggling_frame("I,X,Z,X,I,X,Z,X")
    assert list(frame.axis_signs("x")) == [1, 1, -1, -1, -1, -1, 1, 1]
    assert list(frame.axis_signs("y")) == [1, -1, 1, -1, -1, 1, -1, 1]
    assert list(frame.axis_signs("z")) == [1, -1, -1, 1, 1, -1, -1, 1]
