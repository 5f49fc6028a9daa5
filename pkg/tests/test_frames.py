import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gausslm.frames import (
    build_correlation_frame,
    build_sr_simplex,
    check_t,
    correlation_frame,
    dumps_frame,
    identity_decomposition,
    lift_identity_residuals,
    loads_frame,
    t_range,
    tensor_lift,
)

TOL = 1e-12


@st.composite
def frame_params(draw):
    n = draw(st.integers(2, 16))
    lo, hi = t_range(n)
    t = draw(st.floats(lo, hi, allow_nan=False))
    k = draw(st.integers(1, 3))
    return n, t, k


@settings(max_examples=80, deadline=None)
@given(frame_params())
def test_frame_identities_hold(params):
    n, t, k = params
    frame = correlation_frame(n, t)
    assert max(frame.simplex.residuals().values()) < TOL
    assert max(frame.residuals().values()) < TOL
    lifted = tensor_lift(identity_decomposition(frame), k)
    assert lifted.residual() < TOL
    assert lifted.isometry_residual() < TOL
    assert max(lift_identity_residuals(frame, k).values()) < TOL


@pytest.mark.parametrize("n", [2, 3, 5, 16])
def test_simplex_gram_matches_definition(n):
    v = build_sr_simplex(n).vertices
    expected = np.full((n, n), -1.0 / (n - 1))
    np.fill_diagonal(expected, 1.0)
    np.testing.assert_allclose(v @ v.T, expected, atol=TOL)
    np.testing.assert_allclose(v.sum(axis=0), 0.0, atol=TOL)


def test_two_point_frame_is_diagonal_pair():
    frame = correlation_frame(2, 0.0)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(frame.u[0], [s, s], atol=1e-15)
    np.testing.assert_allclose(frame.u[1], [-s, s], atol=1e-15)


def test_simplex_deterministic():
    a = build_sr_simplex(7).vertices
    b = build_sr_simplex(7).vertices
    assert np.array_equal(a, b)


def test_endpoints():
    # t = 1 collapses every vector onto e_n
    f1 = correlation_frame(4, 1.0)
    np.testing.assert_allclose(f1.u, np.tile(np.eye(4)[3], (4, 1)), atol=TOL)
    f0 = correlation_frame(4, -1 / 3)
    np.testing.assert_allclose(f0.u[:, 3], 0.0, atol=TOL)
    assert identity_decomposition(f0).residual() < TOL


def test_decomposition_branches():
    pos = identity_decomposition(correlation_frame(3, 0.5))
    assert pos.coefficients[:3] == pytest.approx([0.5] * 3)
    assert pos.coefficients[3:] == pytest.approx([0.75, 0.75])
    neg = identity_decomposition(correlation_frame(3, -0.25))
    assert neg.coefficients == pytest.approx([0.8, 0.8, 0.8, 0.6])
    assert neg.labels[-1] == "e3"


@pytest.mark.parametrize("n,t", [(2, 1.5), (2, -1.01), (4, -0.5)])
def test_invalid_t(n, t):
    with pytest.raises(ValueError, match="t outside"):
        correlation_frame(n, t)


def test_check_t_clamps_rounding():
    assert check_t(3, 1 + 1e-14) == 1.0
    assert check_t(3, -0.5 - 1e-14) == -0.5


@pytest.mark.parametrize("n", [1, 0, 2.5])
def test_invalid_n(n):
    with pytest.raises(ValueError):
        build_sr_simplex(n)


def test_lift_rejects_bad_k():
    frame = correlation_frame(3, 0.2)
    with pytest.raises(ValueError):
        tensor_lift(identity_decomposition(frame), 0)
    with pytest.raises(ValueError):
        frame.lifted(0)


def test_json_round_trip():
    frame = correlation_frame(4, 0.3)
    text = dumps_frame(frame)
    doc = json.loads(text)
    assert set(doc) == {"n", "t", "vertices", "u", "terms"}
    back, decomp = loads_frame(text)
    np.testing.assert_array_equal(back.u, frame.u)
    assert back.t == frame.t
    assert decomp.residual() < TOL


def test_frames_immutable():
    frame = build_correlation_frame(build_sr_simplex(3), 0.1)
    with pytest.raises(ValueError):
        frame.u[0, 0] = 2.0
