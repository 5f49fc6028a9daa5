"""Function families the inequalities quantify over.

Two kinds of object share one duck-typed surface (``k``, ``__call__``,
``gradient``, ``laplacian``, ``hessian``, ``exponent_laplacian``,
``log_class``):

* :class:`GaussExpFunction`, ``f(x) = exp(-x^T A x / 2 + <a, x> + c)``, whose
  Gaussian functionals all have closed forms and serve as the oracle family;
* :class:`FunctionModel`, a callback wrapper with optional analytic
  derivatives and central-difference fallbacks.

Callbacks are vectorised: points are passed as an ``(N, k)`` array.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from gausslm.errors import NotIntegrableError

SYM_TOL = 1e-12
ADMISSIBLE_TOL = 1e-10
FD_STEP = 1e-5
FD_STEP_2 = 1e-4

LOG_CONCAVE = "LOG_CONCAVE"
LOG_CONVEX = "LOG_CONVEX"
BOTH = "BOTH"
NEITHER = "NEITHER"


def as_points(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, k) if k > 1 or x.size != 1 else x.reshape(1, 1)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    if x.shape[-1] != k:
        raise ValueError(f"expected points of dimension {k}, got shape {x.shape}")
    return x


class GaussExpFunction:
    """``f(x) = exp(-x^T A x / 2 + <a, x> + c)`` on R^k.

    The exponent ``v = x^T A x / 2 - <a, x> - c`` is convex iff A is PSD, so
    the sign of A decides log-concavity; A = 0 is both.
    """

    def __init__(self, A, a=None, c: float = 0.0, name: str | None = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if np.max(np.abs(A - A.T), initial=0.0) > SYM_TOL:
            raise ValueError("A is not symmetric")
        k = A.shape[0]
        a = np.zeros(k) if a is None else np.atleast_1d(np.asarray(a, dtype=float))
        if a.shape != (k,):
            raise ValueError(f"a must have length {k}, got {a.shape}")
        self.A = (A + A.T) / 2
        self.a = a
        self.c = float(c)
        self.k = k
        self.name = name or "gauss_exp"
        self.A.setflags(write=False)
        self.a.setflags(write=False)
        self._evals = np.linalg.eigvalsh(self.A)

    def __repr__(self) -> str:
        return f"GaussExpFunction(A={self.A.tolist()}, a={self.a.tolist()}, c={self.c})"

    @classmethod
    def scalar(cls, A: float, a: float = 0.0, c: float = 0.0, k: int = 1) -> "GaussExpFunction":
        return cls(A * np.eye(k), a * np.ones(k), c)

    # classification

    @property
    def log_class(self) -> str:
        concave = self._evals[0] >= -SYM_TOL
        convex = self._evals[-1] <= SYM_TOL
        if concave and convex:
            return BOTH
        if concave:
            return LOG_CONCAVE
        if convex:
            return LOG_CONVEX
        return NEITHER

    smooth = True
    nonnegative = True
    support_radius = math.inf

    def precision(self, s: float) -> np.ndarray:
        return np.eye(self.k) + s * self.A

    def is_admissible(self, s: float) -> bool:
        """Whether E f(X)^s is finite, i.e. I + sA is positive definite."""
        return bool(np.min(1.0 + s * self._evals) > ADMISSIBLE_TOL)

    def require_admissible(self, s: float) -> None:
        if not self.is_admissible(s):
            lam = float(np.min(1.0 + s * self._evals))
            raise NotIntegrableError(
                f"I + {s:g}A has eigenvalue {lam:.3g}; E f(X)^{s:g} is infinite"
            )

    def power(self, s: float) -> "GaussExpFunction":
        """f^s, again in the family."""
        return GaussExpFunction(s * self.A, s * self.a, s * self.c, name=f"{self.name}^{s:g}")

    def dilate(self, lam: float) -> "GaussExpFunction":
        """x -> f(lam x)."""
        return GaussExpFunction(lam * lam * self.A, lam * self.a, self.c, name=self.name)

    # pointwise

    def exponent(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        return 0.5 * np.einsum("ni,ij,nj->n", x, self.A, x) - x @ self.a - self.c

    def log_value(self, x) -> np.ndarray:
        return -self.exponent(x)

    def __call__(self, x) -> np.ndarray:
        return np.exp(self.log_value(x))

    def gradient(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        return self(x)[:, None] * (self.a - x @ self.A)

    def hessian(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        r = self.a - x @ self.A
        return self(x)[:, None, None] * (r[:, :, None] * r[:, None, :] - self.A)

    def laplacian(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        r = self.a - x @ self.A
        return self(x) * (np.sum(r * r, axis=1) - np.trace(self.A))

    def exponent_laplacian(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        return np.full(x.shape[0], float(np.trace(self.A)))

    def to_dict(self) -> dict:
        return {"kind": "gauss_exp", "k": self.k, "A": self.A.tolist(), "a": self.a.tolist(), "c": self.c}


def _fd_gradient(fun: Callable, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    h = step * np.maximum(1.0, np.linalg.norm(x, axis=1))
    out = np.empty(x.shape + np.shape(fun(x[:1]))[1:])
    for i in range(x.shape[1]):
        dx = np.zeros_like(x)
        dx[:, i] = h
        diff = fun(x + dx) - fun(x - dx)
        out[:, i, ...] = diff / (2 * h.reshape((-1,) + (1,) * (diff.ndim - 1)))
    return out


def _fd_second(fun: Callable, x: np.ndarray, step: float = FD_STEP_2) -> np.ndarray:
    """Diagonal second differences, shape (N, k)."""
    h = step * np.maximum(1.0, np.linalg.norm(x, axis=1))
    f0 = fun(x)
    out = np.empty(x.shape)
    for i in range(x.shape[1]):
        dx = np.zeros_like(x)
        dx[:, i] = h
        out[:, i] = (fun(x + dx) - 2 * f0 + fun(x - dx)) / h**2
    return out


@dataclass(frozen=True, eq=False)
class FunctionModel:
    """A function on R^k given by callbacks.

    ``exponent_convexity`` describes ``v = -log f``: CONVEX means f is
    log-concave on its support. ``smooth`` certifies membership in the class
    where Gaussian integration by parts applies (C^1 with first derivatives
    of sub-Gaussian growth); non-smooth models still evaluate, but
    derivative-based checks treat them as uncertified.
    """

    k: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    lap: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    exponent_lap: Callable[[np.ndarray], np.ndarray] | None = None
    exponent_convexity: str = "UNKNOWN"
    support_radius: float = math.inf
    name: str = "model"
    smooth: bool = True
    nonnegative: bool = True
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.value(as_points(x, self.k)), dtype=float)

    @property
    def log_class(self) -> str:
        return {"CONVEX": LOG_CONCAVE, "CONCAVE": LOG_CONVEX, "AFFINE": BOTH}.get(
            self.exponent_convexity, NEITHER
        )

    def gradient(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return _fd_gradient(self.__call__, x)

    def hessian(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        if self.grad is not None:
            return _fd_gradient(self.gradient, x)
        return _fd_gradient(self.gradient, x, FD_STEP_2)

    def laplacian(self, x) -> np.ndarray:
        x = as_points(x, self.k)
        if self.lap is not None:
            return np.asarray(self.lap(x), dtype=float)
        if self.grad is not None:
            return np.trace(_fd_gradient(self.gradient, x), axis1=1, axis2=2)
        return _fd_second(self.__call__, x).sum(axis=1)

    def exponent_laplacian(self, x) -> np.ndarray:
        """Laplacian of v = -log f; zero where f vanishes."""
        x = as_points(x, self.k)
        if self.exponent_lap is not None:
            return np.asarray(self.exponent_lap(x), dtype=float)
        f = self(x)
        g = self.gradient(x)
        num = np.sum(g * g, axis=1) - f * self.laplacian(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(f > 0, num / np.where(f > 0, f * f, 1.0), 0.0)

    def gradient_mismatch(self, points) -> float:
        """Worst relative gap between the analytic gradient and central differences."""
        x = as_points(points, self.k)
        if self.grad is None:
            return 0.0
        exact = self.gradient(x)
        approx = _fd_gradient(self.__call__, x)
        scale = np.maximum(np.abs(exact), np.max(np.abs(exact), axis=1, keepdims=True))
        scale = np.maximum(scale, 1e-300)
        return float(np.max(np.abs(exact - approx) / scale))


def as_model(fn) -> FunctionModel:
    """View any supported function object as a FunctionModel."""
    if isinstance(fn, FunctionModel):
        return fn
    if isinstance(fn, GaussExpFunction):
        cls = fn.log_class
        convexity = {LOG_CONCAVE: "CONVEX", LOG_CONVEX: "CONCAVE", BOTH: "AFFINE"}.get(cls, "UNKNOWN")
        return FunctionModel(
            k=fn.k,
            value=fn.__call__,
            grad=fn.gradient,
            lap=fn.laplacian,
            hess=fn.hessian,
            exponent_lap=fn.exponent_laplacian,
            exponent_convexity=convexity,
            name=fn.name,
            params=fn.to_dict(),
        )
    raise TypeError(f"unsupported function object {type(fn).__name__}")


def power(fn, s: float):
    """The pointwise power f^s."""
    if isinstance(fn, GaussExpFunction):
        return fn.power(s)
    fn = as_model(fn)

    def value(x):
        f = fn(x)
        with np.errstate(divide="ignore"):
            return np.where(f > 0, np.abs(f) ** s, 0.0)

    grad = None
    if fn.grad is not None:

        def grad(x):
            f = fn(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(f > 0, s * np.abs(f) ** (s - 1), 0.0)
            return factor[:, None] * fn.gradient(x)

    return FunctionModel(
        k=fn.k,
        value=value,
        grad=grad,
        exponent_convexity=fn.exponent_convexity if s > 0 else "UNKNOWN",
        support_radius=fn.support_radius,
        name=f"{fn.name}^{s:g}",
        smooth=fn.smooth,
    )


def truncate(fn, radius: float) -> FunctionModel:
    """f times the indicator of the closed centred ball of the given radius.

    Derivative callbacks are those of f on the open ball and zero outside;
    the sphere itself is a null set.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    base = as_model(fn)
    if math.isinf(radius):
        return replace(base, name=f"{base.name}|R=inf")

    def inside(x, strict=False):
        r = np.linalg.norm(x, axis=1)
        return r < radius if strict else r <= radius

    def mask(callback, strict, extra_dims=0):
        def wrapped(x):
            vals = callback(x)
            m = inside(x, strict).reshape((-1,) + (1,) * extra_dims)
            return np.where(m, vals, 0.0)

        return wrapped

    return FunctionModel(
        k=base.k,
        value=mask(base.__call__, False),
        grad=mask(base.gradient, True, 1),
        lap=mask(base.laplacian, True),
        hess=mask(base.hessian, True, 2),
        exponent_lap=mask(base.exponent_laplacian, True),
        exponent_convexity=base.exponent_convexity,
        support_radius=min(radius, base.support_radius),
        name=f"{base.name}|R={radius:g}",
        smooth=base.smooth,
        nonnegative=base.nonnegative,
        params={**base.params, "radius": radius},
    )


# catalog


def half_space_indicator(normal=(1.0,), offset: float = 0.0) -> FunctionModel:
    """1{<normal, x> <= offset}: log-concave with convex support, not differentiable."""
    theta = np.atleast_1d(np.asarray(normal, dtype=float))
    k = theta.size

    def zeros(extra):
        return lambda x: np.zeros((x.shape[0],) + extra)

    return FunctionModel(
        k=k,
        value=lambda x: (x @ theta <= offset).astype(float),
        grad=zeros((k,)),
        lap=zeros(()),
        hess=zeros((k, k)),
        exponent_lap=zeros(()),
        exponent_convexity="CONVEX",
        name="half_space_indicator",
        smooth=False,
        params={"normal": theta.tolist(), "offset": float(offset)},
    )


def convex_potential_power(beta: float = 2.0, k: int = 1) -> FunctionModel:
    """exp(-|x|^beta / beta) for beta >= 1.

    Certified smooth for beta >= 2; for 1 <= beta < 2 the exponent's Hessian
    blows up at the origin and derivative checks are not certified.
    """
    if beta < 1:
        raise ValueError(f"beta must be >= 1, got {beta}")

    def value(x):
        r = np.linalg.norm(x, axis=1)
        return np.exp(-(r**beta) / beta)

    def radial(x, power_):
        r = np.linalg.norm(x, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, r ** power_, 0.0 if power_ > 0 else (1.0 if power_ == 0 else np.inf))
        return out

    def grad_v(x):
        return radial(x, beta - 2)[:, None] * x

    def grad(x):
        return -value(x)[:, None] * grad_v(x)

    def exponent_lap(x):
        return (beta - 2 + k) * radial(x, beta - 2)

    def lap(x):
        g = grad_v(x)
        return value(x) * (np.sum(g * g, axis=1) - exponent_lap(x))

    def hess(x):
        g = grad_v(x)
        r = np.linalg.norm(x, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            outer_coef = np.where(r > 0, (beta - 2) * r ** (beta - 4), 0.0)
        hv = radial(x, beta - 2)[:, None, None] * np.eye(k) + outer_coef[:, None, None] * (
            x[:, :, None] * x[:, None, :]
        )
        return value(x)[:, None, None] * (g[:, :, None] * g[:, None, :] - hv)

    return FunctionModel(
        k=k,
        value=value,
        grad=grad,
        lap=lap,
        hess=hess,
        exponent_lap=exponent_lap,
        exponent_convexity="CONVEX",
        name=f"convex_potential_power(beta={beta:g})",
        smooth=beta >= 2,
        params={"beta": float(beta)},
    )


def monomial(power_: int = 3, k: int = 1) -> FunctionModel:
    """F(y) = sum_i y_i^m, a signed polynomial test function for integration by parts."""
    m = int(power_)
    if m < 1:
        raise ValueError(f"power must be a positive integer, got {power_}")

    def hess(x):
        out = np.zeros(x.shape + (k,))
        idx = np.arange(k)
        out[:, idx, idx] = m * (m - 1) * x ** max(m - 2, 0) if m >= 2 else 0.0
        return out

    return FunctionModel(
        k=k,
        value=lambda x: np.sum(x**m, axis=1),
        grad=lambda x: m * x ** (m - 1),
        lap=lambda x: np.sum(m * (m - 1) * x ** max(m - 2, 0), axis=1) if m >= 2 else np.zeros(x.shape[0]),
        hess=hess,
        name=f"monomial(m={m})",
        nonnegative=False,
        params={"power": m},
    )


BUILTINS: dict[str, Callable[..., FunctionModel]] = {
    "half_space_indicator": half_space_indicator,
    "convex_potential_power": convex_potential_power,
    "monomial": lambda power=3, k=1: monomial(power, k),
}


def function_from_spec(doc: dict):
    """Build a function from its JSON document.

    ``{"kind": "gauss_exp", "k", "A", "a", "c"}`` or
    ``{"kind": "builtin", "name", "params"}``. A scalar ``A`` means ``A I_k``.
    """
    kind = doc.get("kind", "gauss_exp")
    if kind == "gauss_exp":
        k = doc.get("k")
        A = np.asarray(doc.get("A", 0.0), dtype=float)
        a = doc.get("a")
        if A.ndim == 0:
            if k is None:
                k = len(np.atleast_1d(a)) if a is not None else 1
            A = float(A) * np.eye(int(k))
        elif A.ndim == 1:
            A = np.diag(A)
        k = A.shape[0]
        if a is None:
            a = np.zeros(k)
        a = np.asarray(a, dtype=float)
        if a.ndim == 0:
            a = float(a) * np.ones(k)
        fn = GaussExpFunction(A, a, doc.get("c", 0.0), name=doc.get("id", "gauss_exp"))
        return fn
    if kind == "builtin":
        name = doc["name"]
        if name not in BUILTINS:
            raise ValueError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}")
        model = BUILTINS[name](**doc.get("params", {}))
        if "id" in doc:
            model = replace(model, name=doc["id"])
        return model
    raise ValueError(f"unknown function kind {kind!r}")


_KEY_SPLIT = re.compile(r",(?=\s*[A-Za-z_]\w*\s*=)")


def _parse_number_list(text: str):
    text = text.strip()
    path = Path(text.lstrip("@"))
    if text.startswith("@") or (path.suffix in {".json", ".txt", ".csv"} and path.exists()):
        if path.suffix == ".json":
            return json.loads(path.read_text(encoding="utf-8"))
        return np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None).tolist()
    text = text.strip("[]()")
    parts = [p for p in re.split(r"[,;\s]+", text) if p]
    vals = [float(p) for p in parts]
    return vals[0] if len(vals) == 1 else vals


def parse_function_spec(text: str):
    """Parse the one-line function grammar used by the CLI.

    ``gauss:A=<scalar|diag list|matrix file>,a=<list>,c=<scalar>`` (optional
    ``k=``), ``builtin:<name>,<param>=<value>,...``, an inline JSON object, or
    the path of a JSON file.
    """
    text = text.strip()
    if text.startswith("{"):
        return function_from_spec(json.loads(text))
    if Path(text).suffix == ".json" and Path(text).exists():
        return function_from_spec(json.loads(Path(text).read_text(encoding="utf-8")))
    head, _, body = text.partition(":")
    fields = {}
    if body:
        items = _KEY_SPLIT.split(body) if head != "builtin" else body.split(",")
        for item in items:
            if "=" not in item:
                fields.setdefault("_name", item.strip())
                continue
            key, _, val = item.partition("=")
            fields[key.strip()] = val.strip()
    if head == "gauss":
        doc: dict = {"kind": "gauss_exp"}
        if "k" in fields:
            doc["k"] = int(fields["k"])
        doc["A"] = _parse_number_list(fields.get("A", "0"))
        if "a" in fields:
            doc["a"] = _parse_number_list(fields["a"])
        doc["c"] = float(fields.get("c", 0.0))
        if "k" not in doc and isinstance(doc.get("a"), list):
            doc["k"] = len(doc["a"])
        return function_from_spec(doc)
    if head == "builtin":
        name = fields.pop("_name", None)
        params = {}
        for key, val in fields.items():
            parsed = _parse_number_list(val)
            params[key] = int(parsed) if isinstance(parsed, float) and key in {"k", "power"} else parsed
        return function_from_spec({"kind": "builtin", "name": name, "params": params})
    raise ValueError(f"cannot parse function spec {text!r}")


def random_gauss_exp(rng: np.random.Generator, k: int, log_class: str, name: str | None = None) -> GaussExpFunction:
    """A random oracle-family member.

    Log-concave draws take eigenvalues of A in [0, 3]; log-convex draws take
    them in [-0.3, 0] so every order s <= 3 stays integrable. |a| <= 2 and
    |c| <= 1 throughout.
    """
    lo, hi = {LOG_CONCAVE: (0.0, 3.0), LOG_CONVEX: (-0.3, 0.0), BOTH: (0.0, 0.0)}[log_class]
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    q = q * np.sign(np.diag(r))
    evals = rng.uniform(lo, hi, size=k)
    A = (q * evals) @ q.T
    direction = rng.standard_normal(k)
    direction /= np.linalg.norm(direction)
    a = direction * rng.uniform(0.0, 2.0)
    c = rng.uniform(-1.0, 1.0)
    return GaussExpFunction((A + A.T) / 2, a, c, name=name)
