import math

import numpy as np
import pytest

from gausslm.estimate import Budget, EstimateWithError, Method
from gausslm.functions import GaussExpFunction, convex_potential_power, half_space_indicator, monomial, random_gauss_exp, truncate
from gausslm.gaussian import build_block_covariance
from gausslm.verify import (
    Relation,
    Status,
    check_average_identity,
    check_block_holder,
    check_chain,
    check_derivative_identities,
    check_entropy_laplacian,
    check_entropy_stein,
    check_integration_by_parts,
    check_log_sobolev_sandwich,
    check_sqrt_moment,
    make_verdict,
    worst_status,
)

F = GaussExpFunction(np.eye(1))
G = GaussExpFunction(-0.5 * np.eye(1))  # e^{x^2/4}
EXP = GaussExpFunction(np.zeros((1, 1)), [1.0])


def closed(x):
    return EstimateWithError(x, Method.CLOSED_FORM)


def test_verdict_status_logic():
    assert make_verdict("x", closed(1.0), closed(2.0), Relation.LEQ).status is Status.HOLDS
    assert make_verdict("x", closed(2.0), closed(1.0), Relation.LEQ).status is Status.VIOLATED
    mc = EstimateWithError(2.0, Method.MONTE_CARLO, 0.1)
    assert make_verdict("x", mc, closed(1.0), Relation.LEQ).status is Status.INDETERMINATE
    near = EstimateWithError(1.2, Method.MONTE_CARLO, 0.1)
    assert make_verdict("x", near, closed(1.0), Relation.LEQ).status is Status.HOLDS
    eq = make_verdict("x", closed(1.0), closed(1.0 + 1e-12), Relation.EQ)
    assert eq.status is Status.HOLDS and eq.slack <= 0


def test_tolerance_formula():
    v = make_verdict("x", closed(1.0), closed(3.0), Relation.LEQ)
    assert v.tolerance == pytest.approx(1e-9 * 5)
    mc = EstimateWithError(1.0, Method.MONTE_CARLO, 0.03)
    v = make_verdict("x", mc, EstimateWithError(1.0, Method.MONTE_CARLO, 0.04), Relation.LEQ)
    assert v.tolerance == pytest.approx(4 * 0.05)


def test_verdict_json_shape():
    d = check_sqrt_moment(F, 3).to_dict()
    assert {"check", "params", "lhs", "rhs", "slack", "tol", "status"} <= set(d)
    assert set(d["lhs"]) >= {"value", "err", "method"}


def test_sqrt_moment_standard_instance():
    v = check_sqrt_moment(F, 3)
    assert v.status is Status.HOLDS and v.relation is Relation.LEQ
    assert v.lhs.value == pytest.approx(0.5, abs=1e-12)
    assert v.rhs.value == pytest.approx(4 ** (-1 / 6), abs=1e-12)


def test_sqrt_moment_equality_at_one():
    assert abs(check_sqrt_moment(F, 1).slack) <= 1e-10


@pytest.mark.parametrize("s", [0.0, 0.3, 1.0, 2.0, 3.0])
def test_sqrt_moment_exponential_equality(s):
    v = check_sqrt_moment(EXP, s)
    assert abs(v.slack) <= 1e-10
    assert v.lhs.value == pytest.approx(math.exp(s / 2), rel=1e-12)


def test_sqrt_moment_direction_flips():
    rng = np.random.default_rng(2)
    concave = random_gauss_exp(rng, 2, "LOG_CONCAVE")
    convex = random_gauss_exp(rng, 2, "LOG_CONVEX")
    for s in (0.0, 0.25, 0.75, 1.5, 3.0):
        a = check_sqrt_moment(concave, s)
        b = check_sqrt_moment(convex, s)
        assert a.status is Status.HOLDS and b.status is Status.HOLDS
        assert a.relation != b.relation


def test_sqrt_moment_teeth():
    v = check_sqrt_moment(G, 0.5, "LOG_CONCAVE")
    assert v.status is Status.VIOLATED
    assert v.lhs.value == pytest.approx(2 / math.sqrt(3), abs=1e-10)
    assert v.rhs.value == pytest.approx(4 / 3, abs=1e-10)
    assert v.params["mismatch"]


def test_sqrt_moment_vacuous_and_domain():
    assert check_sqrt_moment(GaussExpFunction(-2 * np.eye(1)), 1.0).status is Status.VACUOUS
    with pytest.raises(ValueError):
        check_sqrt_moment(F, -1.0)
    with pytest.raises(ValueError):
        check_sqrt_moment(GaussExpFunction(np.diag([1.0, -1.0])), 2.0)


def test_chain_independent_case():
    left, right = check_chain(F, 2, 0.0)
    assert left.lhs.value == pytest.approx(1 / 1.5, abs=1e-12)
    assert left.rhs.value == pytest.approx(1 / 1.5, abs=1e-12)
    assert right.rhs.value == pytest.approx(1.5**-0.5, abs=1e-12)
    assert left.status is Status.HOLDS and right.status is Status.HOLDS


def test_chain_full_correlation():
    left, right = check_chain(F, 3, 1.0)
    assert abs(right.slack) < 1e-9
    assert left.status is Status.HOLDS


def test_chain_by_quadrature():
    for v in check_chain(F, 3, 0.5, backend="quad"):
        assert v.status is Status.HOLDS
        assert v.lhs.method is Method.QUADRATURE


def test_chain_rejects_negative_t():
    with pytest.raises(ValueError):
        check_chain(F, 2, -0.5)


def test_block_holder_instance():
    lower, upper = check_block_holder(F, 2, 0.5)
    assert lower.lhs.value == pytest.approx(1.5**-2, abs=1e-10)
    assert lower.rhs.value == pytest.approx(3.75**-0.5, abs=1e-10)
    assert upper.rhs.value == pytest.approx(2.5 ** (-2 / 3), abs=1e-10)
    assert lower.params["precondition"]


def test_block_holder_reversed_branch():
    lower, upper = check_block_holder([F, F], 2, -0.5, backend="quad")
    assert lower.status is Status.HOLDS and upper.status is Status.HOLDS
    assert lower.params["p"] == pytest.approx(0.5)


def test_block_holder_t_zero_is_equality():
    h = GaussExpFunction(np.eye(1), [0.4], 0.2)
    for v in check_block_holder(h, 3, 0.0):
        assert abs(v.slack) < 1e-9


def test_block_holder_non_log_concave():
    # no convexity needed: mix concave and convex factors
    mixed = [F, GaussExpFunction(-0.2 * np.eye(1), [0.3])]
    for v in check_block_holder(mixed, 2, 0.3):
        assert v.status is Status.HOLDS


def test_average_identity():
    assert check_average_identity(F, 3, 0.25, backend="quad").status is Status.HOLDS


def test_entropy_stein_instances():
    v = check_entropy_stein(F)
    assert v.lhs.value == pytest.approx(0.068288, abs=1e-6)
    assert v.rhs.value == pytest.approx(-(2**-1.5) / 2, abs=1e-12)
    assert abs(check_entropy_stein(EXP).slack) <= 1e-10
    g = check_entropy_stein(G, backend="quad")
    assert g.status is Status.HOLDS and g.relation is Relation.LEQ


def test_entropy_laplacian_instances():
    v = check_entropy_laplacian(F)
    assert v.rhs.value == pytest.approx((2**-1.5 - 2**-0.5) / 2, abs=1e-12)
    assert v.status is Status.HOLDS
    const = GaussExpFunction(np.zeros((1, 1)), [0.0], 0.3)
    assert abs(check_entropy_laplacian(const).lhs.value) < 1e-14
    assert abs(check_entropy_laplacian(const).rhs.value) < 1e-14
    m = convex_potential_power(2.0, 1)
    assert check_entropy_laplacian(m, backend="quad").status is Status.HOLDS


def test_entropy_laplacian_needs_smoothness():
    assert check_entropy_laplacian(half_space_indicator([1.0]), "LOG_CONCAVE").status is Status.VACUOUS


def test_ibp_cubic():
    v = check_integration_by_parts(monomial(3, 1), backend="quad")
    assert v.lhs.value == pytest.approx(3.0, abs=1e-12)
    assert v.rhs.value == pytest.approx(3.0, abs=1e-12)
    assert v.status is Status.HOLDS


def test_ibp_correlated_covariance():
    cov = build_block_covariance(2, 1, 0.5)
    v = check_integration_by_parts(monomial(3, 2), cov, backend="quad")
    # E (Y1+Y2)(Y1^3+Y2^3) = 2(3 + 3 * 0.5) = 9
    assert v.lhs.value == pytest.approx(9.0, rel=1e-12)
    assert v.status is Status.HOLDS


def test_ibp_corollary_mc():
    f = GaussExpFunction(np.diag([1.0, 2.0]))
    v = check_integration_by_parts(f, backend="mc", budget=Budget(samples=200_000, seed=3), form="corollary")
    assert v.status is Status.HOLDS
    exact = check_integration_by_parts(f, form="corollary")
    assert abs(exact.slack) < 1e-12


def test_ibp_guards():
    assert check_integration_by_parts(half_space_indicator([1.0])).status is Status.VACUOUS
    with pytest.raises(ValueError):
        check_integration_by_parts(F, np.eye(2))


def test_log_sobolev_instance():
    lower, upper = check_log_sobolev_sandwich(F)
    assert lower.lhs.value == pytest.approx(-0.19245, abs=1e-5)
    assert upper.lhs.value == pytest.approx(0.12469, abs=1e-5)
    assert upper.rhs.value == pytest.approx(0.38490, abs=1e-5)
    assert upper.params["deficit_gap"] == pytest.approx(0.26021, abs=1e-5)


def test_log_sobolev_exponential_equality():
    _, upper = check_log_sobolev_sandwich(EXP)
    assert abs(upper.slack) <= 1e-10


def test_log_sobolev_truncation_converges():
    _, full = check_log_sobolev_sandwich(F)
    gaps = []
    for R in (2.0, 4.0, 8.0):
        lower, upper = check_log_sobolev_sandwich(truncate(F, R), backend="quad")
        assert lower.status is Status.HOLDS and upper.status is Status.HOLDS
        gaps.append(abs(upper.lhs.value - full.lhs.value))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-6


def test_derivative_identities():
    out = check_derivative_identities(GaussExpFunction(np.diag([0.5, 1.0]), [0.3, -0.1], 0.2))
    assert out["M_gap"] < 1e-6
    assert out["H_gap"] < 1e-6


def test_closed_sides_never_indeterminate():
    rng = np.random.default_rng(8)
    for _ in range(10):
        f = random_gauss_exp(rng, 2, "LOG_CONCAVE")
        for v in (check_sqrt_moment(f, 2.0), check_entropy_stein(f), *check_log_sobolev_sandwich(f)):
            assert v.status is not Status.INDETERMINATE


def test_worst_status():
    vs = [check_sqrt_moment(F, 2), check_sqrt_moment(G, 0.5, "LOG_CONCAVE")]
    assert worst_status(vs) is Status.VIOLATED
    assert worst_status([]) is Status.HOLDS
