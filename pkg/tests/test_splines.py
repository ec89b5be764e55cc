import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetbayes.splines import design_matrix, eval_basis, make_basis


def oracle_eval(basis, x):
    """Brute-force per-function piecewise evaluation straight from the knots."""
    out = np.zeros(basis.H)
    for h in range(1, basis.H + 1):
        knots = basis.knots[h - 1: h + 4]
        for j in range(4):
            if knots[j] <= x < knots[j + 1]:
                u = (x - knots[j]) / basis.delta
                out[h - 1] = (
                    u**3 / 6.0,
                    (1 + 3 * u + 3 * u**2 - 3 * u**3) / 6.0,
                    (4 - 6 * u**2 + 3 * u**3) / 6.0,
                    (1 - 3 * u + 3 * u**2 - u**3) / 6.0,
                )[j]
    return out


def test_layout_h5():
    basis = make_basis(0.0, 1.0, 5)
    assert basis.H == 5
    assert basis.delta == pytest.approx(1.0 / 6.0, abs=1e-15)
    assert len(basis.knots) == 9
    # knots extend one spacing beyond each end of the interval
    assert basis.knots[1] == pytest.approx(0.0)
    assert basis.knots[-2] == pytest.approx(1.0)


def test_single_bump_spans_whole_interval():
    basis = make_basis(0.0, 1.0, 1)
    lo, hi = basis.support(1)
    assert lo < 0.0 < 1.0 < hi
    mid = eval_basis(basis, 0.5)
    assert mid[0] > 0.5  # peak of the bump sits at the midpoint
    assert eval_basis(basis, 0.0)[0] > 0.0
    assert eval_basis(basis, 1.0)[0] > 0.0


def test_degenerate_interval_rejected():
    with pytest.raises(ValueError):
        make_basis(1.0, 1.0, 3)
    with pytest.raises(ValueError):
        make_basis(0.0, 1.0, 0)


def test_third_segment_midpoint_value():
    basis = make_basis(0.0, 1.0, 5)
    # third segment of function 1 is [knots[2], knots[3]); u = 0.5 at its middle
    x = basis.knots[2] + 0.5 * basis.delta
    expected = (4.0 - 6.0 * 0.25 + 3.0 * 0.125) / 6.0
    assert expected == pytest.approx(0.47916666666666663)
    assert eval_basis(basis, x)[0] == pytest.approx(expected, abs=1e-15)


def test_compact_support_outside_zero():
    basis = make_basis(0.0, 1.0, 5)
    lo, hi = basis.support(3)
    assert eval_basis(basis, lo - 1e-9)[2] == 0.0
    assert eval_basis(basis, hi + 1e-9)[2] == 0.0
    assert eval_basis(basis, -5.0).sum() == 0.0
    assert eval_basis(basis, 7.0).sum() == 0.0


def test_matches_bruteforce_oracle():
    rng = np.random.default_rng(42)
    basis = make_basis(-0.3, 2.1, 7)
    xs = rng.uniform(-1.0, 3.0, size=10_000)
    fast = design_matrix(basis, xs)
    for i in range(0, xs.size, 97):  # dense spot checks across the sample
        np.testing.assert_allclose(fast[i], oracle_eval(basis, xs[i]), atol=1e-12)


def test_partition_of_unity_interior():
    basis = make_basis(0.0, 1.0, 6)
    lo = basis.knots[3]
    hi = basis.knots[basis.H]
    rng = np.random.default_rng(3)
    xs = rng.uniform(lo, hi, size=10_000)
    sums = design_matrix(basis, xs).sum(axis=1)
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-2.0, max_value=3.0, allow_nan=False))
def test_nonnegative_everywhere(x):
    basis = make_basis(0.0, 1.0, 5)
    assert np.all(eval_basis(basis, x) >= 0.0)


def test_every_interior_point_covered():
    basis = make_basis(0.0, 2.0, 4)
    xs = np.linspace(0.0, 2.0, 501)
    assert np.all(design_matrix(basis, xs).sum(axis=1) > 0.0)


def test_design_matrix_empty_and_rowwise():
    basis = make_basis(0.0, 1.0, 5)
    assert design_matrix(basis, []).shape == (0, 5)
    xs = np.array([-3.0, 0.2, 0.9])
    M = design_matrix(basis, xs)
    assert np.all(M[0] == 0.0)
    for i, x in enumerate(xs):
        np.testing.assert_array_equal(M[i], eval_basis(basis, x))
    assert np.all((M > 0).sum(axis=1) <= 4)


def test_eval_rejects_nonfinite():
    basis = make_basis(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        eval_basis(basis, float("nan"))
