"""Standard and correlated Gaussian sampling, block covariances and PSD ordering."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gausslm.frames import CorrelationFrame, check_t

PSD_TOL = 1e-10
SYM_TOL = 1e-12


@dataclass(frozen=True)
class GaussianSampler:
    """Reproducible source of N(0, I_dim) draws keyed by (seed, stream).

    Streams are derived with ``numpy.random.SeedSequence`` spawn keys, so
    ``split`` yields statistically independent children and the same
    key always reproduces the same sequence.
    """

    seed: int
    stream: int = 0
    dimension: int = 1
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.path))
        return np.random.Generator(np.random.PCG64(seq))

    def split(self, count: int) -> list["GaussianSampler"]:
        return [
            GaussianSampler(self.seed, self.stream, self.dimension, (*self.path, i))
            for i in range(count)
        ]

    def with_dimension(self, dimension: int) -> "GaussianSampler":
        return GaussianSampler(self.seed, self.stream, dimension, self.path)


def sample_standard(sampler: GaussianSampler, count: int) -> np.ndarray:
    """``count`` iid N(0, I) vectors, shape (count, dimension)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return sampler.generator().standard_normal((count, sampler.dimension))


def frame_matrix(frame: CorrelationFrame, k: int) -> np.ndarray:
    """The kn x kn matrix W whose i-th block row is U_i, so X = W Z."""
    return frame.lifted(k).reshape(frame.n * k, frame.n * k)


def sample_correlated_frame(
    frame: CorrelationFrame, k: int, sampler: GaussianSampler, count: int
) -> np.ndarray:
    """Tuples (U_1 Z, ..., U_n Z) for fresh Z ~ N(0, I_kn); shape (count, n, k)."""
    n = frame.n
    w = frame_matrix(frame, k)
    z = sample_standard(sampler.with_dimension(n * k), count)
    return (z @ w.T).reshape(count, n, k)


def sample_correlated_mixture(
    t: float, n: int, k: int, sampler: GaussianSampler, count: int
) -> np.ndarray:
    """Tuples X_i = sqrt(t) Z + sqrt(1 - t) Z_i; shape (count, n, k)."""
    if t < 0:
        raise ValueError("mixture construction needs t >= 0; use the frame path for t < 0")
    if t > 1:
        raise ValueError(f"t outside [0, 1]: {t}")
    z = sample_standard(sampler.with_dimension((n + 1) * k), count).reshape(count, n + 1, k)
    return np.sqrt(t) * z[:, :1, :] + np.sqrt(1.0 - t) * z[:, 1:, :]


def empirical_covariance(tuples: np.ndarray) -> np.ndarray:
    """Sample covariance (about the known zero mean) of flattened tuples."""
    flat = tuples.reshape(tuples.shape[0], -1)
    return flat.T @ flat / flat.shape[0]


def covariance_standard_errors(tuples: np.ndarray) -> np.ndarray:
    """Entrywise standard errors of ``empirical_covariance``."""
    flat = tuples.reshape(tuples.shape[0], -1)
    prods = flat[:, :, None] * flat[:, None, :]
    return prods.std(axis=0, ddof=1) / np.sqrt(flat.shape[0])


def write_samples_csv(tuples: np.ndarray, path: str | Path) -> None:
    count, n, k = tuples.shape
    header = [f"X{i + 1}_{r + 1}" for i in range(n) for r in range(k)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in tuples.reshape(count, n * k):
            writer.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    n: int
    k: int
    T: np.ndarray

    def block(self, i: int, j: int) -> np.ndarray:
        k = self.k
        return self.T[i * k : (i + 1) * k, j * k : (j + 1) * k]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.T)


def build_block_covariance(n: int, k: int, t: float) -> BlockCovariance:
    """T with identity diagonal blocks and t I_k off-diagonal blocks."""
    t = check_t(n, t)
    base = (1.0 - t) * np.eye(n) + t * np.ones((n, n))
    T = np.kron(base, np.eye(k))
    T.setflags(write=False)
    return BlockCovariance(n=n, k=k, T=T)


def covariance_sqrt(T: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; negative rounding eigenvalues are clipped."""
    evals, evecs = np.linalg.eigh((T + T.T) / 2)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


class PSDOrder(str, enum.Enum):
    LESS_EQ = "LESS_EQ"
    GREATER_EQ = "GREATER_EQ"
    EQUAL = "EQUAL"
    INCOMPARABLE = "INCOMPARABLE"


def psd_order(A, B, tol: float = PSD_TOL) -> PSDOrder:
    """Loewner comparison of symmetric A and B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    for name, m in (("A", A), ("B", B)):
        if np.max(np.abs(m - m.T), initial=0.0) > SYM_TOL:
            raise ValueError(f"{name} is not symmetric")
    diff = (B - A + (B - A).T) / 2
    evals = np.linalg.eigvalsh(diff)
    b_ge_a = evals[0] >= -tol
    a_ge_b = evals[-1] <= tol
    if b_ge_a and a_ge_b:
        return PSDOrder.EQUAL
    if b_ge_a:
        return PSDOrder.LESS_EQ
    if a_ge_b:
        return PSDOrder.GREATER_EQ
    return PSDOrder.INCOMPARABLE
