"""Gaussian functionals with error-qualified estimates.

Every functional is computed by one of three backends:

``closed``  exact Gaussian integrals, available for :class:`GaussExpFunction`;
``quad``    tensor Gauss-Hermite quadrature against gamma_dim; the reported
            error is the change against a grid with half as many nodes per axis;
``mc``      batched Monte Carlo with per-batch sampler streams; the reported
            error is the (delta-method) standard error.

A functional is described by the columns it averages (a map from standard
Gaussian points Z to an ``(N, m)`` array) and a ``combine`` map from the
vector of column means to the value.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from gausslm.errors import DivergentError, NotIntegrableError, UndefinedError
from gausslm.frames import CorrelationFrame
from gausslm.functions import GaussExpFunction, as_model
from gausslm.gaussian import GaussianSampler, frame_matrix

MAX_QUAD_POINTS = 2_000_000
MAX_QUAD_DIM = 6
CHUNK = 1 << 17
DIVERGENCE_REL = 0.5
TAIL_WEIGHT = 1e-10


class Method(str, enum.Enum):
    CLOSED_FORM = "CLOSED_FORM"
    QUADRATURE = "QUADRATURE"
    MONTE_CARLO = "MONTE_CARLO"


_BACKEND_ALIASES = {
    "closed": Method.CLOSED_FORM,
    "closed_form": Method.CLOSED_FORM,
    "quad": Method.QUADRATURE,
    "quadrature": Method.QUADRATURE,
    "mc": Method.MONTE_CARLO,
    "monte_carlo": Method.MONTE_CARLO,
}

_RANK = {Method.CLOSED_FORM: 0, Method.QUADRATURE: 1, Method.MONTE_CARLO: 2}


def resolve_backend(backend) -> Method | None:
    if backend is None or isinstance(backend, Method):
        return backend
    key = str(backend).lower()
    if key in _BACKEND_ALIASES:
        return _BACKEND_ALIASES[key]
    try:
        return Method(str(backend).upper())
    except ValueError:
        raise ValueError(f"unknown backend {backend!r}; use closed, quad or mc") from None


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    method: Method
    error: float = 0.0
    count: int = 0

    def __post_init__(self):
        if not self.error >= 0:
            raise ValueError(f"error must be non-negative, got {self.error}")

    def scale(self, factor: float) -> "EstimateWithError":
        return replace(self, value=factor * self.value, error=abs(factor) * self.error)

    def to_dict(self) -> dict:
        return {"value": self.value, "err": self.error, "method": self.method.value, "count": self.count}


def combine_estimates(parts: Sequence[EstimateWithError], value: float, gradient: Sequence[float]) -> EstimateWithError:
    """First-order error propagation for ``value = g(parts)`` with dg = gradient."""
    err = math.sqrt(sum((g * p.error) ** 2 for g, p in zip(gradient, parts)))
    method = max((p.method for p in parts), key=_RANK.__getitem__)
    return EstimateWithError(float(value), method, err, sum(p.count for p in parts))


def product(parts: Sequence[EstimateWithError]) -> EstimateWithError:
    value = float(np.prod([p.value for p in parts]))
    grad = [float(np.prod([q.value for j, q in enumerate(parts) if j != i])) for i in range(len(parts))]
    return combine_estimates(parts, value, grad)


def difference(a: EstimateWithError, b: EstimateWithError) -> EstimateWithError:
    return combine_estimates([a, b], a.value - b.value, [1.0, -1.0])


@dataclass(frozen=True)
class Budget:
    """Numerical budgets: quadrature nodes per axis, MC samples and batches, RNG key."""

    nodes: int = 64
    samples: int = 1_000_000
    batches: int = 100
    seed: int = 0
    stream: int = 0
    adapt: bool = True  # let oracle-family quadrature move nodes onto the integrand

    def sampler(self, dim: int) -> GaussianSampler:
        return GaussianSampler(self.seed, self.stream, dim)


DEFAULT_BUDGET = Budget()


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GAUSSLM_THREADS", "1")))
    except ValueError:
        return 1


# quadrature


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor Gauss-Hermite rule for the standard Gaussian measure on R^dim."""

    nodes: int
    dim: int
    x: np.ndarray
    w: np.ndarray

    @classmethod
    def build(cls, nodes: int, dim: int) -> "QuadratureGrid":
        if nodes < 1 or dim < 1:
            raise ValueError(f"need nodes >= 1 and dim >= 1, got {nodes}, {dim}")
        x, w = np.polynomial.hermite_e.hermegauss(nodes)
        return cls(nodes=nodes, dim=dim, x=x, w=w / w.sum())

    @property
    def size(self) -> int:
        return self.nodes**self.dim

    def chunks(self):
        """Yield (points, weights) blocks covering the tensor grid."""
        total = self.size
        for start in range(0, total, CHUNK):
            idx = np.arange(start, min(start + CHUNK, total))
            pts = np.empty((idx.size, self.dim))
            wts = np.ones(idx.size)
            rem = idx
            for axis in range(self.dim - 1, -1, -1):
                rem, digit = np.divmod(rem, self.nodes)
                pts[:, axis] = self.x[digit]
                wts *= self.w[digit]
            yield pts, wts

    def expect(self, columns: Callable[[np.ndarray], np.ndarray], transform=None) -> np.ndarray:
        """Column means of ``columns(Z)`` for Z ~ gamma_dim.

        With ``transform = (L, m)`` the rule is applied to Z = m + L Y,
        Y ~ gamma_dim, reweighted by the density ratio; this is exact in exact
        arithmetic and only changes where the nodes sit.
        """
        total = None
        if transform is not None:
            scale, shift = transform
            _, logdet = np.linalg.slogdet(scale)
        for pts, base in self.chunks():
            if transform is not None:
                z = shift + pts @ scale.T
                logw = logdet - 0.5 * np.sum(z * z, axis=1) + 0.5 * np.sum(pts * pts, axis=1)
            else:
                z, logw = pts, np.zeros(pts.shape[0])
            with np.errstate(over="ignore", invalid="ignore", under="ignore"):
                logscale, vals = _split_columns(columns(z))
                contrib = (base * np.exp(logw + logscale))[:, None] * vals
            # overflow at far nodes: density ratio underflows while the
            # integrand overflows; such nodes carry negligible rule weight
            bad = ~np.isfinite(contrib) & (base < TAIL_WEIGHT)[:, None]
            contrib[bad] = 0.0
            part = contrib.sum(axis=0)
            total = part if total is None else total + part
        return total


def _split_columns(out):
    """Columns may be plain values or a pair (log_scale, cofactors) meaning
    exp(log_scale) * cofactors, which keeps large exponents out of overflow."""
    if isinstance(out, tuple):
        logscale, vals = out
        vals = np.asarray(vals, dtype=float)
        logscale = np.asarray(logscale, dtype=float)
    else:
        vals = np.asarray(out, dtype=float)
        logscale = np.zeros(vals.shape[0])
    vals = vals.reshape(logscale.shape[0], -1)
    return logscale, vals


def _effective_nodes(nodes: int, dim: int) -> int:
    if dim > MAX_QUAD_DIM:
        raise ValueError(f"quadrature limited to dimension <= {MAX_QUAD_DIM}, got {dim}; use mc")
    cap = int(math.floor(MAX_QUAD_POINTS ** (1.0 / dim) + 1e-9))
    return max(2, min(nodes, cap))


def _run_quadrature(columns, combine, dim: int, budget: Budget, transform=None) -> EstimateWithError:
    nodes = _effective_nodes(budget.nodes, dim)
    fine = combine(QuadratureGrid.build(nodes, dim).expect(columns, transform))
    coarse_nodes = max(2, nodes // 2)
    coarse = combine(QuadratureGrid.build(coarse_nodes, dim).expect(columns, transform))
    if not np.isfinite(fine):
        raise DivergentError("quadrature produced a non-finite value")
    err = abs(fine - coarse) if np.isfinite(coarse) else math.inf
    return EstimateWithError(float(fine), Method.QUADRATURE, float(err), nodes**dim)


# Monte Carlo


def _mc_batch(columns, sampler: GaussianSampler, count: int):
    z = sampler.generator().standard_normal((count, sampler.dimension))
    logscale, vals = _split_columns(columns(z))
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.exp(logscale)[:, None] * vals
    return vals.sum(axis=0), vals.T @ vals, np.abs(vals).sum(axis=0)


def _combine_gradient(combine, mean: np.ndarray) -> np.ndarray:
    grad = np.empty_like(mean)
    for i in range(mean.size):
        h = 1e-6 * max(1.0, abs(mean[i]))
        up, down = mean.copy(), mean.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (combine(up) - combine(down)) / (2 * h)
    return grad


def _run_monte_carlo(columns, combine, dim: int, budget: Budget) -> EstimateWithError:
    batches = max(1, min(budget.batches, budget.samples))
    sizes = [budget.samples // batches + (1 if i < budget.samples % batches else 0) for i in range(batches)]
    samplers = budget.sampler(dim).split(batches)
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda args: _mc_batch(columns, *args), zip(samplers, sizes)))
    else:
        parts = [_mc_batch(columns, s, m) for s, m in zip(samplers, sizes)]
    # fixed-order reduction keeps the result independent of scheduling
    total = budget.samples
    s1 = parts[0][0].copy()
    s2 = parts[0][1].copy()
    sabs = parts[0][2].copy()
    for p in parts[1:]:
        s1 += p[0]
        s2 += p[1]
        sabs += p[2]
    mean = s1 / total
    cov = (s2 / total - np.outer(mean, mean)) * total / max(total - 1, 1)
    value = combine(mean)
    if not np.isfinite(value) or not np.all(np.isfinite(cov)):
        raise DivergentError("Monte Carlo estimate is not finite")
    grad = _combine_gradient(combine, mean)
    var = float(grad @ cov @ grad) / total
    err = math.sqrt(max(var, 0.0))
    scale = max(abs(value), float(np.abs(grad) @ (sabs / total)))
    if err > DIVERGENCE_REL * scale:
        raise DivergentError(
            f"Monte Carlo relative error {err / scale:.2f} exceeds {DIVERGENCE_REL} after {total} samples"
        )
    return EstimateWithError(float(value), Method.MONTE_CARLO, err, total)


def _identity(m):
    return float(m[0])


def _estimate(fn, method, dim, columns, combine=_identity, closed=None, transform=None, budget=DEFAULT_BUDGET):
    """Dispatch one functional to a backend.

    ``closed`` is a zero-argument callable for the exact value, or None when
    no closed form exists for this input.
    """
    method = resolve_backend(method)
    if method is None:
        if closed is not None:
            method = Method.CLOSED_FORM
        elif dim <= 3:
            method = Method.QUADRATURE
        else:
            method = Method.MONTE_CARLO
    if method is Method.CLOSED_FORM:
        if closed is None:
            raise ValueError("no closed form for this input; use quad or mc")
        return EstimateWithError(float(closed()), Method.CLOSED_FORM, 0.0, 0)
    if method is Method.QUADRATURE:
        return _run_quadrature(columns, combine, dim, budget, transform if budget.adapt else None)
    return _run_monte_carlo(columns, combine, dim, budget)


# closed forms for the oracle family


def _tilt(fn: GaussExpFunction, s: float):
    """log E f(X)^s and the mean/covariance of the law proportional to f^s dgamma."""
    fn.require_admissible(s)
    P = fn.precision(s)
    sigma = np.linalg.inv(P)
    sigma = (sigma + sigma.T) / 2
    mu = sigma @ (s * fn.a)
    _, logdet = np.linalg.slogdet(P)
    logmass = -0.5 * logdet + s * fn.c + 0.5 * s * s * fn.a @ sigma @ fn.a
    return logmass, mu, sigma


def closed_moment_M(fn: GaussExpFunction, s: float) -> float:
    if s == 0:
        raise UndefinedError("M(s) is undefined at s = 0; use the geometric mean")
    logmass, _, _ = _tilt(fn, s)
    return math.exp(logmass / s)


def closed_scaled_mean_H(fn: GaussExpFunction, s: float) -> float:
    if s < 0:
        raise ValueError(f"H(s) needs s >= 0, got {s}")
    fn.require_admissible(s)
    P = fn.precision(s)
    _, logdet = np.linalg.slogdet(P)
    return math.exp(-0.5 * logdet + fn.c + 0.5 * s * fn.a @ np.linalg.solve(P, fn.a))


def closed_geometric_mean(fn: GaussExpFunction) -> float:
    return math.exp(fn.c - 0.5 * float(np.trace(fn.A)))


def closed_entropy(fn: GaussExpFunction) -> float:
    logmass, mu, sigma = _tilt(fn, 1.0)
    A, a = fn.A, fn.a
    mean_log = -0.5 * (np.trace(A @ sigma) + mu @ A @ mu) + a @ mu + fn.c
    mass = math.exp(logmass)
    return mass * (mean_log - logmass)


def closed_stein(fn: GaussExpFunction) -> float:
    logmass, mu, sigma = _tilt(fn, 1.0)
    A, a = fn.A, fn.a
    return math.exp(logmass) * (a @ mu - np.trace(A @ sigma) - mu @ A @ mu)


def closed_laplacian(fn: GaussExpFunction) -> float:
    logmass, mu, sigma = _tilt(fn, 1.0)
    A, a = fn.A, fn.a
    r = a - A @ mu
    return math.exp(logmass) * (r @ r + np.trace(A @ sigma @ A) - np.trace(A))


def closed_dirichlet(fn: GaussExpFunction) -> float:
    logmass, mu, sigma = _tilt(fn, 2.0)
    A, a = fn.A, fn.a
    r = a - A @ mu
    return math.exp(logmass) * (r @ r + np.trace(A @ sigma @ A))


def closed_deficit(fn: GaussExpFunction) -> float:
    logmass, _, _ = _tilt(fn, 2.0)
    return math.exp(logmass) * float(np.trace(fn.A))


def closed_linear_image(A: np.ndarray, b: np.ndarray, c: float, L: np.ndarray) -> float:
    """E exp(-(LZ)^T A (LZ)/2 + <b, LZ> + c) for Z standard Gaussian."""
    P = np.eye(L.shape[1]) + L.T @ A @ L
    P = (P + P.T) / 2
    if np.min(np.linalg.eigvalsh(P)) <= 1e-10:
        raise NotIntegrableError("I + L^T A L is not positive definite; the expectation is infinite")
    lb = L.T @ b
    _, logdet = np.linalg.slogdet(P)
    return math.exp(-0.5 * logdet + c + 0.5 * lb @ np.linalg.solve(P, lb))


def gaussian_proposal(P: np.ndarray, b: np.ndarray):
    """Node placement (P^(-1/2), P^(-1) b) matching an integrand proportional
    to exp(-z^T P z / 2 + <b, z>); None when P is not positive definite."""
    evals, evecs = np.linalg.eigh((P + P.T) / 2)
    if evals[0] <= 1e-10:
        return None
    scale = (evecs / np.sqrt(evals)) @ evecs.T
    shift = evecs @ ((evecs.T @ b) / evals)
    return scale, shift


def _linear_image_proposal(A: np.ndarray, b: np.ndarray, L: np.ndarray):
    return gaussian_proposal(np.eye(L.shape[1]) + L.T @ A @ L, L.T @ b)


def _proposal(fn, s, lin=None):
    """Proposal for f^s (or, with ``lin``, for f(sqrt(s) z)) against gamma_k."""
    if not isinstance(fn, GaussExpFunction) or not fn.is_admissible(s):
        return None
    lin = s if lin is None else lin
    return gaussian_proposal(fn.precision(s), lin * fn.a)


def _guard(fn, s):
    if isinstance(fn, GaussExpFunction):
        fn.require_admissible(s)


# public functionals


def moment_M(fn, s: float, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """(E f(X)^s)^(1/s) for X ~ gamma_k."""
    if s == 0:
        raise UndefinedError("M(s) is undefined at s = 0; use geometric_mean")
    _guard(fn, s)
    model = as_model(fn)
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_moment_M(fn, s)  # noqa: E731

        def columns(z):
            return s * fn.log_value(z), np.ones(z.shape[0])

    else:
        closed = None

        def columns(z):
            f = np.abs(model(z))
            with np.errstate(divide="ignore"):
                return np.where(f > 0, f**s, 0.0 if s > 0 else np.inf)

    return _estimate(
        fn, backend, model.k, columns, lambda m: m[0] ** (1.0 / s), closed, _proposal(fn, s), budget
    )


def scaled_mean_H(fn, s: float, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E f(sqrt(s) X) for X ~ gamma_k; exactly f(0) at s = 0."""
    if s < 0:
        raise ValueError(f"H(s) needs s >= 0, got {s}")
    model = as_model(fn)
    if s == 0:
        return EstimateWithError(float(model(np.zeros((1, model.k)))[0]), Method.CLOSED_FORM, 0.0, 1)
    _guard(fn, s)
    root = math.sqrt(s)
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_scaled_mean_H(fn, s)  # noqa: E731

        def columns(z):
            return fn.log_value(root * z), np.ones(z.shape[0])

    else:
        closed = None

        def columns(z):
            return model(root * z)

    return _estimate(fn, backend, model.k, columns, _identity, closed, _proposal(fn, s, root), budget)


def geometric_mean(fn, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """exp(E log f(X)), the s -> 0 limit of M(s); zero if f vanishes on a set of positive measure."""
    closed = (lambda: closed_geometric_mean(fn)) if isinstance(fn, GaussExpFunction) else None
    model = as_model(fn)

    def columns(z):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(model(z)))

    def combine(m):
        return float(np.exp(m[0]))

    return _estimate(fn, backend, model.k, columns, combine, closed, None, budget)


def _entropy_combine(m):
    mass, mlogm = m
    if mass <= 0:
        return 0.0
    return mlogm - mass * math.log(mass)


def _xlogx(f):
    f = np.abs(f)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(f > 0, f * np.log(np.where(f > 0, f, 1.0)), 0.0)


def _oracle_cofactors(fn: GaussExpFunction, z: np.ndarray):
    """log f(z) and r = grad log f(z) = a - A z."""
    return fn.log_value(z), fn.a - z @ fn.A


def entropy(fn, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E|f| log|f| - E|f| log E|f|, with 0 log 0 = 0."""
    _guard(fn, 1.0)
    model = as_model(fn)
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_entropy(fn)  # noqa: E731

        def columns(z):
            logf = fn.log_value(z)
            return logf, np.column_stack([np.ones_like(logf), logf])

    else:
        closed = None

        def columns(z):
            f = model(z)
            return np.column_stack([np.abs(f), _xlogx(f)])

    return _estimate(fn, backend, model.k, columns, _entropy_combine, closed, _proposal(fn, 1.0), budget)


def stein_term(fn, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E <X, grad f(X)>."""
    _guard(fn, 1.0)
    model = as_model(fn)
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_stein(fn)  # noqa: E731

        def columns(z):
            logf, r = _oracle_cofactors(fn, z)
            return logf, np.sum(z * r, axis=1)

    else:
        closed = None

        def columns(z):
            return np.sum(z * model.gradient(z), axis=1)

    return _estimate(fn, backend, model.k, columns, _identity, closed, _proposal(fn, 1.0), budget)


def dirichlet_term(fn, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E |grad f(X)|^2."""
    _guard(fn, 2.0)
    model = as_model(fn)
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_dirichlet(fn)  # noqa: E731

        def columns(z):
            logf, r = _oracle_cofactors(fn, z)
            return 2 * logf, np.sum(r * r, axis=1)

    else:
        closed = None

        def columns(z):
            g = model.gradient(z)
            return np.sum(g * g, axis=1)

    return _estimate(fn, backend, model.k, columns, _identity, closed, _proposal(fn, 2.0), budget)


def deficit_term(fn, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E f(X)^2 Delta v(X) for f = exp(-v)."""
    _guard(fn, 2.0)
    model = as_model(fn)
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_deficit(fn)  # noqa: E731

        def columns(z):
            return 2 * fn.log_value(z), fn.exponent_laplacian(z)

    else:
        closed = None

        def columns(z):
            f = model(z)
            lap_v = model.exponent_laplacian(z)
            return np.where(f != 0, f * f * lap_v, 0.0)

    return _estimate(fn, backend, model.k, columns, _identity, closed, _proposal(fn, 2.0), budget)


def laplacian_term(fn, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E Delta f(X)."""
    _guard(fn, 1.0)
    model = as_model(fn)
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_laplacian(fn)  # noqa: E731
        trace = float(np.trace(fn.A))

        def columns(z):
            logf, r = _oracle_cofactors(fn, z)
            return logf, np.sum(r * r, axis=1) - trace

    else:
        closed = None
        columns = model.laplacian

    return _estimate(fn, backend, model.k, columns, _identity, closed, _proposal(fn, 1.0), budget)


def expectation(integrand: Callable[[np.ndarray], np.ndarray], covariance, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E integrand(Y) for Y ~ N(0, covariance), by quadrature or Monte Carlo."""
    from gausslm.gaussian import covariance_sqrt

    T = np.atleast_2d(np.asarray(covariance, dtype=float))
    root = covariance_sqrt(T)
    method = resolve_backend(backend)
    if method is Method.CLOSED_FORM:
        raise ValueError("no closed form for a generic integrand; use quad or mc")
    return _estimate(None, method, T.shape[0], lambda z: integrand(z @ root.T), _identity, None, None, budget)


def _split_blocks(x: np.ndarray, n: int, k: int) -> list[np.ndarray]:
    return [x[:, i * k : (i + 1) * k] for i in range(n)]


def correlated_product_mean(fns: Sequence, frame: CorrelationFrame, k: int, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E prod_i f_i(X_i) with X_i = U_i Z jointly Gaussian, Cov(X_i, X_j) = t I_k."""
    n = frame.n
    if len(fns) != n:
        raise ValueError(f"need {n} functions, got {len(fns)}")
    W = frame_matrix(frame, k)
    models = [as_model(f) for f in fns]
    if any(m.k != k for m in models):
        raise ValueError(f"every function must act on R^{k}")
    closed = transform = None
    if all(isinstance(f, GaussExpFunction) for f in fns):
        from scipy.linalg import block_diag

        A = block_diag(*[f.A for f in fns])
        b = np.concatenate([f.a for f in fns])
        c = sum(f.c for f in fns)
        closed = lambda: closed_linear_image(A, b, c, W)  # noqa: E731
        transform = _linear_image_proposal(A, b, W)
        if transform is None:
            # surfaces NotIntegrableError before any numerical backend runs
            closed_linear_image(A, b, c, W)

    def columns(z):
        blocks = _split_blocks(z @ W.T, n, k)
        if closed is not None:
            logs = sum(f.log_value(x) for f, x in zip(fns, blocks))
            return logs, np.ones(z.shape[0])
        out = np.ones(z.shape[0])
        for m, x in zip(models, blocks):
            out = out * m(x)
        return out

    return _estimate(fns[0], backend, n * k, columns, _identity, closed, transform, budget)


def mean_of_average(fn, frame: CorrelationFrame, k: int, backend=None, budget: Budget = DEFAULT_BUDGET) -> EstimateWithError:
    """E f((X_1 + ... + X_n)/n) over the frame's joint law."""
    n = frame.n
    model = as_model(fn)
    if model.k != k:
        raise ValueError(f"function acts on R^{model.k}, expected R^{k}")
    C = frame.lifted(k).sum(axis=0) / n  # k x kn
    closed = transform = None
    if isinstance(fn, GaussExpFunction):
        closed = lambda: closed_linear_image(fn.A, fn.a, fn.c, C)  # noqa: E731
        transform = _linear_image_proposal(fn.A, fn.a, C)

    def columns(z):
        if closed is not None:
            return fn.log_value(z @ C.T), np.ones(z.shape[0])
        return model(z @ C.T)

    return _estimate(fn, backend, n * k, columns, _identity, closed, transform, budget)
