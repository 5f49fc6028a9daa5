"""Acceptance suite: one test per criterion, each under its runtime budget.

Run alone with ``pytest tests/test_acceptance.py -v``; a pass/fail line per
criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from gausslm.estimate import Budget
from gausslm.frames import correlation_frame, identity_decomposition, lift_identity_residuals, t_range, tensor_lift
from gausslm.frames import BlockDecomposition
from gausslm.functions import (
    GaussExpFunction,
    convex_potential_power,
    monomial,
    random_gauss_exp,
    truncate,
)
from gausslm.gaussian import (
    GaussianSampler,
    build_block_covariance,
    covariance_standard_errors,
    empirical_covariance,
    sample_correlated_frame,
    sample_correlated_mixture,
)
from gausslm.sweep import SweepPlan, bundled_plan, report_lines, run_sweep
from gausslm.verify import (
    Status,
    check_block_holder,
    check_chain,
    check_derivative_identities,
    check_integration_by_parts,
    check_log_sobolev_sandwich,
    check_sqrt_moment,
)

F = GaussExpFunction(np.eye(1))


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f}s, budget {self.limit}s"


def _other_branch(frame):
    """The decomposition formula of the branch not chosen by the frame, when defined."""
    n, t, p, q = frame.n, frame.t, frame.p, frame.q
    eye = np.eye(n)
    rows = [u[None, :] for u in frame.u]
    if t >= 0:
        if q == 0:
            return None
        coeffs = [1 / q] * n + [-n * t / q]
        rows.append(eye[n - 1][None, :])
    else:
        if p == 0:
            return None
        coeffs = [1 / p] * n + [n * t / p] * (n - 1)
        rows += [eye[j][None, :] for j in range(n - 1)]
    return BlockDecomposition(dim=n, coefficients=tuple(coeffs), matrices=tuple(rows))


def test_criterion_1_frame_exactness():
    worst = 0.0
    with Timer(10):
        for n in range(2, 17):
            lo, hi = t_range(n)
            for t in np.linspace(lo, hi, 11):
                frame = correlation_frame(n, t)
                worst = max(worst, *frame.simplex.residuals().values(), *frame.residuals().values())
                base = identity_decomposition(frame)
                other = _other_branch(frame)
                for k in (1, 2, 3):
                    for dec in (base, other):
                        if dec is None:
                            continue
                        lifted = tensor_lift(dec, k)
                        worst = max(worst, lifted.residual(), lifted.isometry_residual())
                    worst = max(worst, *lift_identity_residuals(frame, k).values())
    assert worst < 1e-12, worst


def test_criterion_2_covariance_law():
    count = 100_000
    with Timer(30):
        for n in (2, 3):
            for k in (1, 2):
                for t in (0.0, 0.3, 0.7, 1.0):
                    target = build_block_covariance(n, k, t).T
                    stream = 100 * n + 10 * k + int(10 * t)
                    xf = sample_correlated_frame(correlation_frame(n, t), k, GaussianSampler(2024, stream), count)
                    xm = sample_correlated_mixture(t, n, k, GaussianSampler(2024, stream + 5000), count)
                    cf, sf = empirical_covariance(xf), covariance_standard_errors(xf)
                    cm, sm = empirical_covariance(xm), covariance_standard_errors(xm)
                    floor = 1e-12
                    assert np.all(np.abs(cf - target) <= 6 * sf + floor), (n, k, t, "frame")
                    assert np.all(np.abs(cm - target) <= 6 * sm + floor), (n, k, t, "mixture")
                    assert np.all(np.abs(cf - cm) <= 6 * np.hypot(sf, sm) + floor), (n, k, t, "agree")


def test_criterion_3_sqrt_moment_suite():
    with Timer(60):
        plan = SweepPlan.load(bundled_plan("theorem1_grid.json"))
        verdicts = run_sweep(plan)
        random_rows = [v for v in verdicts if v.params["fn"].startswith(("concave", "convex"))]
        assert len({v.params["fn"] for v in random_rows}) == 50
        assert len(random_rows) == 50 * 14
        assert not [v for v in verdicts if v.status is Status.VIOLATED]
        assert all(v.status is Status.HOLDS for v in verdicts)
        for v in verdicts:
            scale = 1 + abs(v.lhs.value) + abs(v.rhs.value)
            assert v.slack >= -1e-9 * scale
            if v.params["s"] == 1 or v.params["fn"].startswith("exp_linear"):
                assert abs(v.slack) <= 1e-9, v.to_dict()
        # spot-check the closed forms against quadrature on the 1-D members
        for v in random_rows[::7]:
            if v.params["s"] in (0.5, 2.0):
                fn = next(f for f, _ in _catalog(plan) if f.name == v.params["fn"])
                if fn.k == 1:
                    q = check_sqrt_moment(fn, v.params["s"], backend="quad")
                    assert q.status is Status.HOLDS
                    assert q.slack == pytest.approx(v.slack, abs=1e-8)
        h = check_sqrt_moment(F, 3)
        assert abs(h.lhs.value - 0.5) <= 1e-10 and abs(h.rhs.value - 4 ** (-1 / 6)) <= 1e-10
        assert h.status is Status.HOLDS
        g = check_sqrt_moment(GaussExpFunction(-0.5 * np.eye(1)), 0.5)
        assert abs(g.lhs.value - 2 / math.sqrt(3)) <= 1e-10 and abs(g.rhs.value - 4 / 3) <= 1e-10
        assert g.status is Status.HOLDS


def _catalog(plan):
    from gausslm.sweep import expand_catalog

    return expand_catalog(plan.catalog)


def test_criterion_4_chain_and_block_holder():
    with Timer(60):
        for backend in ("closed", "quad"):
            for n in (2, 3):
                for t in (0.0, 0.25, 0.5, 1.0):
                    for v in (*check_chain(F, n, t, 1, backend), *check_block_holder(F, n, t, 1, backend)):
                        assert v.status is Status.HOLDS, v.to_dict()
            for v in check_block_holder(F, 2, -0.5, 1, backend):
                assert v.status is Status.HOLDS, v.to_dict()
        lower, upper = check_block_holder(F, 2, 0.5, 1, "quad")
        assert abs(lower.lhs.value - 1.5**-2) <= 1e-8
        assert abs(lower.rhs.value - 3.75**-0.5) <= 1e-8
        assert abs(upper.rhs.value - 2.5 ** (-2 / 3)) <= 1e-8


def test_criterion_5_derivative_identities():
    rng = np.random.default_rng(55)
    with Timer(10):
        for i in range(20):
            fn = random_gauss_exp(rng, 1 + i % 3, "LOG_CONCAVE" if i % 2 == 0 else "LOG_CONVEX")
            out = check_derivative_identities(fn)
            assert out["M_gap"] < 1e-3 * (1 + abs(out["entropy"]))
            assert out["H_gap"] < 1e-3 * (1 + abs(out["half_stein"]))


def test_criterion_6_integration_by_parts():
    catalog = [
        monomial(3, 1),
        monomial(3, 2),
        monomial(4, 1),
        convex_potential_power(2.0, 1),
        convex_potential_power(3.0, 1),
        convex_potential_power(2.0, 2),
        GaussExpFunction(np.eye(1)),
        GaussExpFunction(np.diag([1.0, 2.0]), [0.3, -0.2], 0.1),
        GaussExpFunction(-0.2 * np.eye(1), [0.5]),
    ]
    with Timer(30):
        cubic = check_integration_by_parts(monomial(3, 1), backend="quad")
        assert cubic.lhs.value == pytest.approx(3.0, abs=1e-12)
        assert cubic.rhs.value == pytest.approx(3.0, abs=1e-12)
        for fn in catalog:
            cov = None if fn.k == 1 else build_block_covariance(2, 1, 0.4)
            for form in ("lemma", "corollary"):
                v = check_integration_by_parts(fn, cov, "quad", form=form)
                assert v.status is Status.HOLDS, v.to_dict()
                assert abs(v.slack) <= max(v.tolerance, 4 * math.hypot(v.lhs.error, v.rhs.error))
            # half Laplacian against half Stein term, T = I
            v = check_integration_by_parts(fn, None, "quad", form="corollary")
            assert v.status is Status.HOLDS, v.to_dict()


def test_criterion_7_log_sobolev_sandwich():
    with Timer(30):
        lower, upper = check_log_sobolev_sandwich(F, "quad")
        assert lower.status is Status.HOLDS and upper.status is Status.HOLDS
        assert abs(lower.lhs.value - (2 * 3 ** -1.5 - 3**-0.5)) <= 1e-6
        assert abs(upper.lhs.value - 0.12469) <= 1e-5
        assert abs(upper.rhs.value - 2 * 3**-1.5) <= 1e-6
        _, eq = check_log_sobolev_sandwich(GaussExpFunction(np.zeros((1, 1)), [1.0]))
        assert abs(eq.lhs.value - eq.rhs.value) <= 1e-9
        gaps = []
        for R in (2.0, 4.0, 8.0):
            lo_r, up_r = check_log_sobolev_sandwich(truncate(F, R), "quad")
            assert lo_r.status is Status.HOLDS and up_r.status is Status.HOLDS
            gaps.append(
                max(
                    abs(lo_r.lhs.value - lower.lhs.value),
                    abs(up_r.lhs.value - upper.lhs.value),
                    abs(up_r.rhs.value - upper.rhs.value),
                )
            )
        assert gaps[2] < 1e-6 and gaps[0] > gaps[2]


def test_criterion_8_teeth():
    with Timer(1):
        v = check_sqrt_moment(GaussExpFunction(-0.5 * np.eye(1)), 0.5, "LOG_CONCAVE", backend="closed")
        assert v.status is Status.VIOLATED
        assert v.lhs.value == pytest.approx(1.15470, abs=1e-5)
        assert v.rhs.value == pytest.approx(1.33333, abs=1e-5)


def test_criterion_9_determinism():
    mc_plan = {
        "checks": ["sqrt-moment", "entropy-stein", "chain"],
        "grids": {"s": [0.5, 2.0], "n": [2], "t": [0.5]},
        "catalog": [{"kind": "gauss_exp_random", "count": 3, "seed": 9, "log_class": "LOG_CONCAVE", "k": [1, 2]}],
        "budgets": {"samples": 20000, "batches": 20},
        "seed": 77,
        "backend": "mc",
    }
    with Timer(60):
        for plan in (SweepPlan.load(bundled_plan("theorem1_grid.json")), SweepPlan.from_dict(mc_plan)):
            first = report_lines(run_sweep(plan, threads=1))[1:]
            second = report_lines(run_sweep(plan, threads=3))[1:]
            assert "\n".join(first).encode() == "\n".join(second).encode()
