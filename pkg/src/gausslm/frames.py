"""SR-simplex vertices, equiangular correlation frames and identity decompositions.

All objects here are small dense numpy arrays wrapped in frozen dataclasses.
Construction is deterministic; the defining identities are asserted after
construction rather than trusted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

EXACT_TOL = 1e-12


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SimplexFrame:
    """Vertices of the spherico-regular simplex: ``n`` unit vectors in R^(n-1)
    with pairwise inner product -1/(n-1) and zero sum."""

    n: int
    vertices: np.ndarray  # shape (n, n - 1)

    def residuals(self) -> dict[str, float]:
        v = self.vertices
        gram = v @ v.T
        off = ~np.eye(self.n, dtype=bool)
        return {
            "norm": float(np.max(np.abs(np.diag(gram) - 1.0))),
            "sr1": float(np.max(np.abs(gram[off] + 1.0 / (self.n - 1)))) if self.n > 1 else 0.0,
            "sr2": float(np.max(np.abs(v.sum(axis=0)))),
        }


@dataclass(frozen=True, eq=False)
class CorrelationFrame:
    """Unit vectors u_1..u_n in R^n with <u_i, u_j> = t for i != j."""

    simplex: SimplexFrame
    t: float
    u: np.ndarray  # shape (n, n), row i is u_i

    @property
    def n(self) -> int:
        return self.simplex.n

    @property
    def p(self) -> float:
        return (self.n - 1) * self.t + 1.0

    @property
    def q(self) -> float:
        return 1.0 - self.t

    def residuals(self) -> dict[str, float]:
        gram = self.u @ self.u.T
        off = ~np.eye(self.n, dtype=bool)
        return {
            "norm": float(np.max(np.abs(np.diag(gram) - 1.0))),
            "equiangular": float(np.max(np.abs(gram[off] - self.t))),
        }

    def lifted(self, k: int) -> np.ndarray:
        """Stack of the k x kn blocks U_i = u_i^T (x) I_k, shape (n, k, kn)."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        eye = np.eye(k)
        return np.stack([np.kron(ui[None, :], eye) for ui in self.u])

    def basis_lifted(self, k: int) -> np.ndarray:
        """Stack of E_j = e_j^T (x) I_k for j = 1..n, shape (n, k, kn)."""
        eye_n, eye_k = np.eye(self.n), np.eye(k)
        return np.stack([np.kron(e[None, :], eye_k) for e in eye_n])


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    """Weighted decomposition sum_i c_i M_i^T M_i of the identity on R^dim.

    Each ``M_i`` is a ``block x dim`` matrix with orthonormal rows.
    """

    dim: int
    coefficients: tuple[float, ...]
    matrices: tuple[np.ndarray, ...]
    labels: tuple[str, ...] = field(default=())

    @property
    def block(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0

    def assemble(self) -> np.ndarray:
        total = np.zeros((self.dim, self.dim))
        for c, m in zip(self.coefficients, self.matrices):
            total += c * (m.T @ m)
        return total

    def residual(self) -> float:
        """Max entry of |sum c_i M_i^T M_i - I|."""
        return float(np.max(np.abs(self.assemble() - np.eye(self.dim))))

    def isometry_residual(self) -> float:
        worst = 0.0
        for m in self.matrices:
            worst = max(worst, float(np.max(np.abs(m @ m.T - np.eye(m.shape[0])))))
        return worst


def build_sr_simplex(n: int) -> SimplexFrame:
    """Vertices of the SR-simplex in R^(n-1).

    Factor the Gram matrix G = n/(n-1) I - 1/(n-1) J, which has rank n-1 and
    kernel spanned by the all-ones vector, through its symmetric
    eigendecomposition and read the vertices off the rows.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    gram = (n / (n - 1)) * np.eye(n) - np.ones((n, n)) / (n - 1)
    evals, evecs = np.linalg.eigh(gram)
    # eigh sorts ascending; index 0 is the null direction 1/sqrt(n)
    basis = evecs[:, 1:]
    # fix each column's sign by its first non-negligible entry
    for j in range(basis.shape[1]):
        col = basis[:, j]
        pivot = col[np.argmax(np.abs(col) > 1e-8)]
        if pivot < 0:
            basis[:, j] = -col
    vertices = basis * np.sqrt(evals[1:])
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    frame = SimplexFrame(n=n, vertices=_frozen(vertices))
    bad = {k: v for k, v in frame.residuals().items() if v > EXACT_TOL}
    if bad:
        raise ArithmeticError(f"SR-simplex construction lost accuracy: {bad}")
    return frame


def t_range(n: int) -> tuple[float, float]:
    return -1.0 / (n - 1), 1.0


def check_t(n: int, t: float) -> float:
    lo, hi = t_range(n)
    if not (lo - EXACT_TOL <= t <= hi + EXACT_TOL):
        raise ValueError(f"t outside [{lo:g}, {hi:g}]")
    return float(min(max(t, lo), hi))


def build_correlation_frame(simplex: SimplexFrame, t: float) -> CorrelationFrame:
    """u_i(t) = sqrt((t(n-1)+1)/n) e_n + sqrt((n-1)(1-t)/n) v_i."""
    n = simplex.n
    t = check_t(n, t)
    top = np.sqrt(max(t * (n - 1) + 1.0, 0.0) / n)
    side = np.sqrt(max((n - 1) * (1.0 - t) / n, 0.0))
    u = np.zeros((n, n))
    u[:, : n - 1] = side * simplex.vertices
    u[:, n - 1] = top
    return CorrelationFrame(simplex=simplex, t=t, u=_frozen(u))


def correlation_frame(n: int, t: float) -> CorrelationFrame:
    return build_correlation_frame(build_sr_simplex(n), t)


def identity_decomposition(frame: CorrelationFrame) -> BlockDecomposition:
    """Decompose I_n with the frame vectors.

    For t >= 0 the terms are (1/p, u_i) and (nt/p, e_j) for j < n; for t < 0
    they are (1/(1-t), u_i) and (-nt/(1-t), e_n).
    """
    n, t = frame.n, frame.t
    eye = np.eye(n)
    rows = [frame.u[i][None, :] for i in range(n)]
    labels = [f"u{i + 1}" for i in range(n)]
    if t >= 0:
        p = frame.p
        coeffs = [1.0 / p] * n + [n * t / p] * (n - 1)
        rows += [eye[j][None, :] for j in range(n - 1)]
        labels += [f"e{j + 1}" for j in range(n - 1)]
    else:
        coeffs = [1.0 / (1.0 - t)] * n + [-n * t / (1.0 - t)]
        rows.append(eye[n - 1][None, :])
        labels.append(f"e{n}")
    return BlockDecomposition(
        dim=n,
        coefficients=tuple(float(c) for c in coeffs),
        matrices=tuple(_frozen(r) for r in rows),
        labels=tuple(labels),
    )


def tensor_lift(decomp: BlockDecomposition, k: int) -> BlockDecomposition:
    """Replace each M_i by M_i (x) I_k; coefficients are unchanged."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")
    eye = np.eye(int(k))
    return BlockDecomposition(
        dim=decomp.dim * int(k),
        coefficients=decomp.coefficients,
        matrices=tuple(_frozen(np.kron(m, eye)) for m in decomp.matrices),
        labels=decomp.labels,
    )


def lift_identity_residuals(frame: CorrelationFrame, k: int) -> dict[str, float]:
    """Residuals of the block identities satisfied by U_i and E_j.

    ``adjoint``: U_i^T = sqrt(p/n) e_n (x) I_k + sqrt((n-1)q/n) v_i (x) I_k;
    ``gram``: U_i U_j^T = <u_i, u_j> I_k;
    ``cross``: U_i E_j^T = sqrt((n-1)q/n) <v_i, e_j> I_k for j < n.
    """
    n = frame.n
    U = frame.lifted(k)
    E = frame.basis_lifted(k)
    eye_k = np.eye(k)
    scale = np.sqrt(max((n - 1) * frame.q / n, 0.0))
    top = np.sqrt(max(frame.p / n, 0.0))
    en = np.eye(n)[n - 1]
    adjoint = gram = cross = 0.0
    for i in range(n):
        v_full = np.zeros(n)
        v_full[: n - 1] = frame.simplex.vertices[i]
        expected = top * np.kron(en[:, None], eye_k) + scale * np.kron(v_full[:, None], eye_k)
        adjoint = max(adjoint, float(np.max(np.abs(U[i].T - expected))))
        for j in range(n):
            ip = float(frame.u[i] @ frame.u[j])
            gram = max(gram, float(np.max(np.abs(U[i] @ U[j].T - ip * eye_k))))
        for j in range(n - 1):
            target = scale * frame.simplex.vertices[i, j] * eye_k
            cross = max(cross, float(np.max(np.abs(U[i] @ E[j].T - target))))
    return {"adjoint": adjoint, "gram": gram, "cross": cross}


def frame_to_dict(frame: CorrelationFrame, decomp: BlockDecomposition | None = None) -> dict:
    decomp = decomp if decomp is not None else identity_decomposition(frame)
    return {
        "n": frame.n,
        "t": frame.t,
        "vertices": frame.simplex.vertices.tolist(),
        "u": frame.u.tolist(),
        "terms": [
            {"c": c, "rows": m.tolist()}
            for c, m in zip(decomp.coefficients, decomp.matrices)
        ],
    }


def frame_from_dict(doc: dict) -> tuple[CorrelationFrame, BlockDecomposition]:
    n = int(doc["n"])
    vertices = np.asarray(doc["vertices"], dtype=float).reshape(n, n - 1)
    simplex = SimplexFrame(n=n, vertices=_frozen(vertices))
    frame = CorrelationFrame(
        simplex=simplex,
        t=float(doc["t"]),
        u=_frozen(np.asarray(doc["u"], dtype=float).reshape(n, n)),
    )
    mats = tuple(_frozen(np.atleast_2d(np.asarray(term["rows"], dtype=float))) for term in doc["terms"])
    dim = mats[0].shape[1] if mats else n
    decomp = BlockDecomposition(
        dim=dim,
        coefficients=tuple(float(term["c"]) for term in doc["terms"]),
        matrices=mats,
    )
    return frame, decomp


def dumps_frame(frame: CorrelationFrame, decomp: BlockDecomposition | None = None) -> str:
    return json.dumps(frame_to_dict(frame, decomp))


def loads_frame(text: str) -> tuple[CorrelationFrame, BlockDecomposition]:
    return frame_from_dict(json.loads(text))
