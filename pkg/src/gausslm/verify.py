"""Executable inequality checks returning :class:`InequalityVerdict` records.

Tolerance logic: two deterministic sides (closed form or quadrature) are
compared at ``1e-9 * (1 + |lhs| + |rhs|)``, widened to four times the
combined quadrature error when that is larger; any Monte Carlo side is
compared at four combined standard errors and can only come out HOLDS or
INDETERMINATE, never VIOLATED.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from gausslm.errors import DivergentError, GaussLMError, NotIntegrableError
from gausslm.estimate import (
    DEFAULT_BUDGET,
    Budget,
    EstimateWithError,
    Method,
    combine_estimates,
    correlated_product_mean,
    deficit_term,
    dirichlet_term,
    entropy,
    expectation,
    geometric_mean,
    laplacian_term,
    mean_of_average,
    moment_M,
    product,
    resolve_backend,
    scaled_mean_H,
    stein_term,
)
from gausslm.frames import check_t, correlation_frame
from gausslm.functions import BOTH, LOG_CONCAVE, LOG_CONVEX, GaussExpFunction, as_model, power
from gausslm.gaussian import BlockCovariance, PSDOrder, build_block_covariance, psd_order

REL_TOL = 1e-9
SIGMAS = 4.0


class Relation(str, enum.Enum):
    LEQ = "LEQ"
    GEQ = "GEQ"
    EQ = "EQ"


class Status(str, enum.Enum):
    HOLDS = "HOLDS"
    VIOLATED = "VIOLATED"
    INDETERMINATE = "INDETERMINATE"
    VACUOUS = "VACUOUS"
    ERROR = "ERROR"


@dataclass(frozen=True)
class InequalityVerdict:
    check: str
    lhs: EstimateWithError | None
    rhs: EstimateWithError | None
    relation: Relation
    slack: float
    tolerance: float
    status: Status
    params: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "params": self.params,
            "relation": self.relation.value,
            "lhs": None if self.lhs is None else self.lhs.to_dict(),
            "rhs": None if self.rhs is None else self.rhs.to_dict(),
            "slack": self.slack,
            "tol": self.tolerance,
            "status": self.status.value,
            "note": self.note,
        }


def tolerance(lhs: EstimateWithError, rhs: EstimateWithError) -> float:
    err = math.hypot(lhs.error, rhs.error)
    det = REL_TOL * (1.0 + abs(lhs.value) + abs(rhs.value))
    if Method.MONTE_CARLO in (lhs.method, rhs.method):
        return SIGMAS * err
    return max(det, SIGMAS * err)


def make_verdict(check: str, lhs: EstimateWithError, rhs: EstimateWithError, relation: Relation, params: dict | None = None, note: str = "") -> InequalityVerdict:
    if relation is Relation.LEQ:
        slack = rhs.value - lhs.value
    elif relation is Relation.GEQ:
        slack = lhs.value - rhs.value
    else:
        slack = -abs(lhs.value - rhs.value)
    tol = tolerance(lhs, rhs)
    if slack >= -tol:
        status = Status.HOLDS
    elif Method.MONTE_CARLO in (lhs.method, rhs.method):
        status = Status.INDETERMINATE
    else:
        status = Status.VIOLATED
    return InequalityVerdict(check, lhs, rhs, relation, float(slack), float(tol), status, dict(params or {}), note)


def vacuous(check: str, relation: Relation, params: dict, reason: str) -> InequalityVerdict:
    return InequalityVerdict(check, None, None, relation, math.nan, math.nan, Status.VACUOUS, dict(params), reason)


def errored(check: str, relation: Relation, params: dict, reason: str) -> InequalityVerdict:
    return InequalityVerdict(check, None, None, relation, math.nan, math.nan, Status.ERROR, dict(params), reason)


def _guarded(checks: Sequence[tuple[str, Relation]], params: dict, body: Callable[[], list[InequalityVerdict]]) -> list[InequalityVerdict]:
    try:
        return body()
    except (NotIntegrableError, DivergentError) as exc:
        return [vacuous(c, r, params, str(exc)) for c, r in checks]


def _fn_id(fn) -> str:
    return getattr(fn, "name", type(fn).__name__)


def _resolve_class(fn, concavity: str | None) -> str:
    declared = as_model(fn).log_class if not isinstance(fn, GaussExpFunction) else fn.log_class
    if concavity is None:
        if declared == BOTH:
            return LOG_CONCAVE
        if declared not in (LOG_CONCAVE, LOG_CONVEX):
            raise ValueError(f"{_fn_id(fn)} is neither log-concave nor log-convex; pass concavity explicitly")
        return declared
    concavity = concavity.upper()
    if concavity not in (LOG_CONCAVE, LOG_CONVEX):
        raise ValueError(f"concavity must be LOG_CONCAVE or LOG_CONVEX, got {concavity}")
    return concavity


def _class_params(fn, concavity: str) -> dict:
    declared = fn.log_class if isinstance(fn, GaussExpFunction) else as_model(fn).log_class
    out = {"concavity": concavity, "declared": declared}
    if declared not in (BOTH, concavity):
        out["mismatch"] = True
    return out


# inequality checks


def check_sqrt_moment(fn, s: float, concavity: str | None = None, backend=None, budget: Budget = DEFAULT_BUDGET) -> InequalityVerdict:
    """Compare E f(sqrt(s) X) (lhs) with (E f(X)^s)^(1/s) (rhs).

    Log-concave f: lhs >= rhs for s <= 1 and lhs <= rhs for s >= 1; log-convex
    g: the reverse. At s = 0 the sides are f(0) and exp(E log f(X)).
    """
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    cls = _resolve_class(fn, concavity)
    params = {"s": s, "fn": _fn_id(fn), **_class_params(fn, cls)}
    rel = Relation.GEQ if (cls == LOG_CONCAVE) == (s <= 1) else Relation.LEQ

    def body():
        lhs = scaled_mean_H(fn, s, backend, budget)
        rhs = geometric_mean(fn, backend, budget) if s == 0 else moment_M(fn, s, backend, budget)
        return [make_verdict("sqrt-moment", lhs, rhs, rel, params)]

    return _guarded([("sqrt-moment", rel)], params, body)[0]


def check_chain(fn, n: int, t: float, k: int | None = None, backend=None, budget: Budget = DEFAULT_BUDGET) -> tuple[InequalityVerdict, InequalityVerdict]:
    """E prod f(X_i)^(1/n) <= (E f^(p/n))^(n/p) <= E f(mean of X_i), t in [0, 1]."""
    k = as_model(fn).k if k is None else k
    if not 0 <= t <= 1:
        raise ValueError(f"t outside [0, 1]: {t}")
    frame = correlation_frame(n, t)
    p = frame.p
    params = {"n": n, "t": t, "k": k, "p": p, "fn": _fn_id(fn)}
    checks = [("chain.left", Relation.LEQ), ("chain.right", Relation.LEQ)]

    def body():
        root = power(fn, 1.0 / n)
        left = correlated_product_mean([root] * n, frame, k, backend, budget)
        middle = moment_M(fn, p / n, backend, budget)
        right = mean_of_average(fn, frame, k, backend, budget)
        return [
            make_verdict("chain.left", left, middle, Relation.LEQ, params),
            make_verdict("chain.right", middle, right, Relation.LEQ, params),
        ]

    return tuple(_guarded(checks, params, body))


def check_average_identity(fn, n: int, t: float, k: int | None = None, backend=None, budget: Budget = DEFAULT_BUDGET) -> InequalityVerdict:
    """E f((1/n) sum U_i Z) equals E f(sqrt(p/n) X): the frame average is sqrt(p/n) Z_n."""
    k = as_model(fn).k if k is None else k
    frame = correlation_frame(n, t)
    params = {"n": n, "t": t, "k": k, "fn": _fn_id(fn)}

    def body():
        lhs = mean_of_average(fn, frame, k, backend, budget)
        rhs = scaled_mean_H(fn, frame.p / n, backend, budget)
        return [make_verdict("average-identity", lhs, rhs, Relation.EQ, params)]

    return _guarded([("average-identity", Relation.EQ)], params, body)[0]


def _moment_or_geometric(fn, r: float, backend, budget) -> EstimateWithError:
    if abs(r) < 1e-15:
        return geometric_mean(fn, backend, budget)
    return moment_M(fn, r, backend, budget)


def check_block_holder(fns, n: int, t: float, k: int | None = None, backend=None, budget: Budget = DEFAULT_BUDGET) -> tuple[InequalityVerdict, InequalityVerdict]:
    """Two-sided Hoelder-type bounds for E prod f_i(X_i) under constant correlation t.

    t >= 0: prod M_i(q) <= E prod f_i(X_i) <= prod M_i(p);
    t <= 0: prod M_i(p) <= E prod f_i(X_i) <= prod M_i(q);
    with p = (n-1)t + 1, q = 1 - t and exponent 0 read as the geometric mean.
    """
    if not isinstance(fns, (list, tuple)):
        fns = [fns] * n
    if len(fns) != n:
        raise ValueError(f"need {n} functions, got {len(fns)}")
    k = as_model(fns[0]).k if k is None else k
    t = check_t(n, t)
    frame = correlation_frame(n, t)
    p, q = frame.p, frame.q
    low_exp, high_exp = (q, p) if t >= 0 else (p, q)
    T = build_block_covariance(n, k, t).T
    eye = np.eye(n * k)
    upper_ok = psd_order(T, high_exp * eye) in (PSDOrder.LESS_EQ, PSDOrder.EQUAL)
    lower_ok = psd_order(low_exp * eye, T) in (PSDOrder.LESS_EQ, PSDOrder.EQUAL)
    params = {
        "n": n, "t": t, "k": k, "p": p, "q": q,
        "fn": ",".join(sorted({_fn_id(f) for f in fns})),
        "precondition": bool(upper_ok and lower_ok),
    }
    checks = [("block-holder.lower", Relation.LEQ), ("block-holder.upper", Relation.LEQ)]

    def body():
        mid = correlated_product_mean(list(fns), frame, k, backend, budget)
        low = product([_moment_or_geometric(f, low_exp, backend, budget) for f in fns])
        high = product([_moment_or_geometric(f, high_exp, backend, budget) for f in fns])
        return [
            make_verdict("block-holder.lower", low, mid, Relation.LEQ, params),
            make_verdict("block-holder.upper", mid, high, Relation.LEQ, params),
        ]

    return tuple(_guarded(checks, params, body))


def check_entropy_stein(fn, concavity: str | None = None, backend=None, budget: Budget = DEFAULT_BUDGET) -> InequalityVerdict:
    """Ent(f) against E<X, grad f(X)>/2: >= for log-concave, <= for log-convex."""
    cls = _resolve_class(fn, concavity)
    rel = Relation.GEQ if cls == LOG_CONCAVE else Relation.LEQ
    params = {"fn": _fn_id(fn), **_class_params(fn, cls)}

    def body():
        lhs = entropy(fn, backend, budget)
        rhs = stein_term(fn, backend, budget).scale(0.5)
        return [make_verdict("entropy-stein", lhs, rhs, rel, params)]

    return _guarded([("entropy-stein", rel)], params, body)[0]


def check_entropy_laplacian(fn, concavity: str | None = None, backend=None, budget: Budget = DEFAULT_BUDGET) -> InequalityVerdict:
    """Ent(f) against E Delta f(X)/2: >= for log-concave, <= for log-convex."""
    cls = _resolve_class(fn, concavity)
    rel = Relation.GEQ if cls == LOG_CONCAVE else Relation.LEQ
    params = {"fn": _fn_id(fn), **_class_params(fn, cls)}
    if not as_model(fn).smooth:
        return vacuous("entropy-laplacian", rel, params, "function is not certified differentiable")

    def body():
        lhs = entropy(fn, backend, budget)
        rhs = laplacian_term(fn, backend, budget).scale(0.5)
        return [make_verdict("entropy-laplacian", lhs, rhs, rel, params)]

    return _guarded([("entropy-laplacian", rel)], params, body)[0]


def _covariance_matrix(covariance, k: int) -> np.ndarray:
    if covariance is None:
        return np.eye(k)
    if isinstance(covariance, BlockCovariance):
        return np.asarray(covariance.T)
    return np.atleast_2d(np.asarray(covariance, dtype=float))


def check_integration_by_parts(fn, covariance=None, backend=None, budget: Budget = DEFAULT_BUDGET, form: str = "lemma") -> InequalityVerdict:
    """Gaussian integration by parts for Y ~ N(0, T) as an equality check.

    ``form="lemma"``: E[<1, Y> F(Y)] = E[<T 1, grad F(Y)>], the sum over j of
    E Y_j F(Y) = sum_i T_ji E d_i F(Y).
    ``form="corollary"``: E<Y, grad f(Y)> = E tr(T H_f(Y)).
    """
    model = as_model(fn)
    T = _covariance_matrix(covariance, model.k)
    if T.shape != (model.k, model.k):
        raise ValueError(f"covariance must be {model.k}x{model.k}, got {T.shape}")
    check = f"ibp.{form}"
    params = {"fn": _fn_id(fn), "form": form, "T": T.tolist()}
    if not model.smooth:
        return vacuous(check, Relation.EQ, params, "function is not certified for the growth condition")
    method = resolve_backend(backend)
    identity_cov = np.allclose(T, np.eye(model.k), atol=1e-15)
    ones = np.ones(model.k)
    direction = T @ ones

    def body():
        if form == "corollary":
            if identity_cov and (method is Method.CLOSED_FORM or (method is None and isinstance(fn, GaussExpFunction))):
                lhs = stein_term(fn, Method.CLOSED_FORM, budget)
                rhs = laplacian_term(fn, Method.CLOSED_FORM, budget)
            else:
                if method is Method.CLOSED_FORM:
                    raise ValueError("closed form is available only for the oracle family with T = I")
                lhs = expectation(lambda y: np.sum(y * model.gradient(y), axis=1), T, method, budget)
                rhs = expectation(lambda y: np.einsum("ij,nji->n", T, model.hessian(y)), T, method, budget)
        elif form == "lemma":
            if method is Method.CLOSED_FORM:
                raise ValueError("the lemma form has no closed-form backend; use quad or mc")
            lhs = expectation(lambda y: (y @ ones) * model(y), T, method, budget)
            rhs = expectation(lambda y: model.gradient(y) @ direction, T, method, budget)
        else:
            raise ValueError(f"unknown form {form!r}")
        return [make_verdict(check, lhs, rhs, Relation.EQ, params)]

    return _guarded([(check, Relation.EQ)], params, body)[0]


def check_log_sobolev_sandwich(fn, backend=None, budget: Budget = DEFAULT_BUDGET) -> tuple[InequalityVerdict, InequalityVerdict]:
    """2E|grad f|^2 - E f^2 Delta v <= Ent(f^2) <= 2E|grad f|^2 for f = exp(-v)."""
    params = {"fn": _fn_id(fn)}
    checks = [("log-sobolev.lower", Relation.LEQ), ("log-sobolev.upper", Relation.LEQ)]

    def body():
        ent = entropy(power(fn, 2.0), backend, budget)
        upper = dirichlet_term(fn, backend, budget).scale(2.0)
        deficit = deficit_term(fn, backend, budget)
        lower = combine_estimates([upper, deficit], upper.value - deficit.value, [1.0, -1.0])
        extra = {
            **params,
            "entropy": ent.value,
            "upper": upper.value,
            "lower": lower.value,
            "deficit_gap": upper.value - ent.value,
        }
        return [
            make_verdict("log-sobolev.lower", lower, ent, Relation.LEQ, extra),
            make_verdict("log-sobolev.upper", ent, upper, Relation.LEQ, extra),
        ]

    return tuple(_guarded(checks, params, body))


def check_derivative_identities(fn: GaussExpFunction, step: float = 1e-4) -> dict[str, float]:
    """Central differences of M and H at order 1 against Ent(f) and E<X, grad f>/2.

    Returns the absolute gaps and the scales used for relative comparison.
    """
    m_prime = (moment_M(fn, 1 + step).value - moment_M(fn, 1 - step).value) / (2 * step)
    h_prime = (scaled_mean_H(fn, 1 + step).value - scaled_mean_H(fn, 1 - step).value) / (2 * step)
    ent = entropy(fn).value
    stein = stein_term(fn).value
    return {
        "M_prime": m_prime,
        "entropy": ent,
        "M_gap": abs(m_prime - ent),
        "H_prime": h_prime,
        "half_stein": stein / 2,
        "H_gap": abs(h_prime - stein / 2),
        "stein": stein,
    }


def worst_status(verdicts: Sequence[InequalityVerdict]) -> Status:
    order = [Status.VIOLATED, Status.ERROR, Status.INDETERMINATE, Status.VACUOUS, Status.HOLDS]
    present = {v.status for v in verdicts}
    for status in order:
        if status in present:
            return status
    return Status.HOLDS


__all__ = [
    "GaussLMError",
    "InequalityVerdict",
    "Relation",
    "Status",
    "check_average_identity",
    "check_block_holder",
    "check_chain",
    "check_derivative_identities",
    "check_entropy_laplacian",
    "check_entropy_stein",
    "check_integration_by_parts",
    "check_log_sobolev_sandwich",
    "check_sqrt_moment",
    "make_verdict",
    "worst_status",
]
