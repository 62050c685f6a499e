"""Linear feature projections: principal components (PCT), maximum covariance
(MCV), ridge least squares (OLS) and calibrated least squares (CLS).
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

METHODS = ("PCT", "MCV", "OLS", "CLS")
_MAGIC = b"STPB"
COND_LIMIT = 1e12


class IllConditionedError(np.linalg.LinAlgError):
    def __init__(self, cond: float):
        super().__init__(f"system is ill-conditioned (condition number {cond:.3g})")
        self.cond = cond


@dataclass(frozen=True)
class ProjectionBasis:
    W: np.ndarray
    method: str
    lam: float = 0.0

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim == 1:
            W = W[:, None]
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "W", W)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def to_bytes(self) -> bytes:
        head = _MAGIC + self.method.encode("ascii").ljust(4, b"\0")
        head += struct.pack("<IId", self.d, self.k, float(self.lam))
        return head + np.asfortranarray(self.W).astype("<f8").tobytes(order="F")

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ProjectionBasis":
        if buf[:4] != _MAGIC:
            raise ValueError("not a projection basis file")
        method = buf[4:8].rstrip(b"\0").decode("ascii")
        d, k, lam = struct.unpack_from("<IId", buf, 8)
        W = np.frombuffer(buf, dtype="<f8", count=d * k, offset=24).reshape((d, k), order="F")
        return cls(W.copy(), method, lam)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ProjectionBasis":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"# method={self.method} lambda={self.lam!r}\n")
            f.write(",".join(f"w{i + 1}" for i in range(self.k)) + "\n")
            for row in self.W:
                f.write(",".join(repr(float(x)) for x in row) + "\n")


def default_lambda(X) -> float:
    """Relative ridge: 1e-3 times the mean diagonal of X^T X."""
    X = np.asarray(X, dtype=np.float64)
    return 1e-3 * float(np.einsum("ij,ij->", X, X)) / X.shape[1]


def deflate(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Remove the component along unit vector ``w`` from every row of X."""
    return X - np.outer(X @ w, w)


def _sign_fix(w: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(w)))
    return -w if w[i] < 0 else w


def _orthogonalize(w: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for b in basis:
        w = w - (w @ b) * b
    return w


def pct(X, k: int) -> ProjectionBasis:
    """Top-k eigenvectors of X^T X, eigenvalues non-increasing."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    vals, vecs = np.linalg.eigh(X.T @ X)
    order = np.argsort(vals)[::-1][:k]
    W = np.column_stack([_sign_fix(vecs[:, i]) for i in order])
    return ProjectionBasis(W, "PCT")


def mcv(Xs, Ys, k: int) -> ProjectionBasis:
    """Directions of maximum covariance with Ys, deflating after each one.

    ``Ys`` may hold several target columns; each direction then maximizes
    ``||Ys^T Xs w||``, the leading left singular vector of ``Xs^T Ys``. With
    a single column this is ``Xs^T Ys`` normalized, and deflation leaves no
    covariance for a second direction, so at most one column's worth of
    directions can be found. Stops early once the remaining covariance
    vanishes.
    """
    X = np.asarray(Xs, dtype=np.float64)
    Y = np.asarray(Ys, dtype=np.float64)
    Y = Y.reshape(len(Y), -1)
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    scale = np.linalg.norm(X.T @ Y, 2) or 1.0
    ws: list[np.ndarray] = []
    for _ in range(k):
        M = X.T @ Y
        if M.shape[1] == 1:
            w = _orthogonalize(M[:, 0], ws)
        else:
            U, sv, _ = np.linalg.svd(M, full_matrices=False)
            w = _orthogonalize(_sign_fix(U[:, 0]) * sv[0], ws)
        norm = np.linalg.norm(w)
        if norm <= 1e-12 * scale:
            logger.info("MCV stopped after %d directions: no covariance left", len(ws))
            break
        w /= norm
        ws.append(w)
        X = deflate(X, w)
    if not ws:
        raise ValueError("Ys has zero covariance with Xs")
    return ProjectionBasis(np.column_stack(ws), "MCV")


def _ridge_solve(A: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    M = A + lam * np.eye(A.shape[0])
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(float(cond))
    return np.linalg.solve(M, b)


def ols(Xs, Ys, lam: float | None = None) -> np.ndarray:
    """Ridge regression direction (Xs^T Xs + lam I)^{-1} Xs^T Ys."""
    X = np.asarray(Xs, dtype=np.float64)
    y = np.asarray(Ys, dtype=np.float64).ravel()
    lam = default_lambda(X) if lam is None else float(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return _ridge_solve(X.T @ X, X.T @ y, lam)


def cls(Xs, Ys, Xc, lam: float | None = None, k: int = 1) -> ProjectionBasis:
    """Calibrated least squares: covariance with the change rate on stego
    features, variance penalized on cover features, both deflated each round.
    Directions are stored with unit norm.
    """
    S = np.asarray(Xs, dtype=np.float64)
    C = np.asarray(Xc, dtype=np.float64)
    y = np.asarray(Ys, dtype=np.float64).ravel()
    d = S.shape[1]
    if C.shape[1] != d:
        raise ValueError("stego and cover features must share columns")
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    lam = default_lambda(C) if lam is None else float(lam)
    if not lam > 0:
        raise ValueError("CLS needs lambda > 0")
    ws: list[np.ndarray] = []
    for _ in range(k):
        w = _orthogonalize(_ridge_solve(C.T @ C, S.T @ y, lam), ws)
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        w /= norm
        ws.append(w)
        S = deflate(S, w)
        C = deflate(C, w)
    return ProjectionBasis(np.column_stack(ws), "CLS", lam)


def apply_projection(F, basis) -> np.ndarray:
    W = basis.W if isinstance(basis, ProjectionBasis) else np.asarray(basis, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if F.shape[-1] != W.shape[0]:
        raise ValueError(f"feature dimension {F.shape[-1]} does not match basis dimension {W.shape[0]}")
    return F @ W
