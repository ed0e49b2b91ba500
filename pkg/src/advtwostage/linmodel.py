"""Gaussian data generation, closed-form ridge regression and exact
leave-one-out updates.

The ridge estimate uses the ``1/n`` scaling of the penalised least-squares
objective, so the normal equations read ``(X'X + n lam I) theta = X'y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .errors import ArgumentError, DegenerateLeverageError, SingularSystemError

#: penalties below this are treated as the ridgeless limit
RIDGELESS_THRESHOLD = 1e-10

SeedLike = Union[int, Sequence[int]]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a generator keyed by ``seed``.

    ``seed`` is either an int or a tuple ``(master, stream, ...)``. Tuples are
    mapped to ``SeedSequence(master, spawn_key=stream...)`` so that every
    stream is independent of the order in which streams are consumed.
    """
    if isinstance(seed, (int, np.integer)):
        ss = np.random.SeedSequence(int(seed))
    else:
        seed = tuple(int(s) for s in seed)
        if not seed:
            raise ArgumentError("empty seed tuple")
        ss = np.random.SeedSequence(seed[0], spawn_key=seed[1:])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class GroundTruth:
    """True coefficient vector and noise level of the linear model."""

    theta0: np.ndarray
    sigma2: float
    r2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ArgumentError(f"sigma2 must be >= 0, got {self.sigma2}")

    @classmethod
    def from_theta(cls, theta0, sigma2: float) -> "GroundTruth":
        theta0 = np.asarray(theta0, dtype=float).ravel()
        return cls(theta0=theta0, sigma2=float(sigma2), r2=float(theta0 @ theta0))

    @property
    def d(self) -> int:
        return self.theta0.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Labelled sample: rows of ``X`` are feature vectors."""

    X: np.ndarray
    y: np.ndarray
    seed: Optional[SeedLike] = None
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise ArgumentError("X must be 2-D and y 1-D")
        if self.X.shape[0] != self.y.shape[0]:
            raise ArgumentError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries"
            )
        if self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ArgumentError("dataset needs n1 >= 1 and d >= 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def drop(self, j: int) -> "Dataset":
        """Dataset with row ``j`` removed."""
        keep = np.arange(self.n) != j
        return Dataset(self.X[keep], self.y[keep], self.seed, self.truth)


@dataclass(frozen=True)
class RidgeFit:
    """Clean ridge estimate with the quantities the LOO machinery reuses.

    Attributes
    ----------
    lam : float
        Ridge penalty.
    theta_hat : ndarray, shape (d,)
    gram_inv : ndarray, shape (d, d)
        ``(X'X + n lam I)^{-1}``; the pseudo-inverse of ``X'X`` in the
        overparameterised ridgeless case.
    fitted : ndarray, shape (n,)
    leverage : ndarray, shape (n,)
        ``x_j' gram_inv x_j``.
    """

    lam: float
    theta_hat: np.ndarray
    gram_inv: np.ndarray
    fitted: np.ndarray
    leverage: np.ndarray

    @property
    def ridgeless(self) -> bool:
        return self.lam < RIDGELESS_THRESHOLD


def gen_gaussian_dataset(n1: int, d: int, truth: GroundTruth, seed: SeedLike) -> Dataset:
    """Draw ``n1`` samples ``x ~ N(0, I_d)``, ``y = x'theta0 + N(0, sigma2)``."""
    if int(n1) != n1 or int(d) != d or n1 < 1 or d < 1:
        raise ArgumentError(f"need integer n1 >= 1 and d >= 1, got n1={n1}, d={d}")
    if truth.d != d:
        raise ArgumentError(f"truth has dimension {truth.d}, expected {d}")
    rng = make_rng(seed)
    X = rng.standard_normal((n1, d))
    noise = rng.standard_normal(n1) * np.sqrt(truth.sigma2)
    y = X @ truth.theta0 + noise
    return Dataset(X=X, y=y, seed=seed, truth=truth)


def sample_theta0(mode: str, d: int, seed: SeedLike = 0, sigma2: float = 1.0) -> GroundTruth:
    """Ground truth with ``theta0 ~ N(0, I/d)`` (``"spherical"``) or
    ``theta0 = 1/sqrt(d)`` (``"ones_over_sqrt_d"``)."""
    if int(d) != d or d < 1:
        raise ArgumentError(f"d must be a positive integer, got {d}")
    if mode == "spherical":
        theta0 = make_rng(seed).standard_normal(d) / np.sqrt(d)
    elif mode == "ones_over_sqrt_d":
        theta0 = np.full(d, 1.0 / np.sqrt(d))
    else:
        raise ArgumentError(f"unknown theta0 mode {mode!r}")
    return GroundTruth.from_theta(theta0, sigma2)


def _spd_inverse(A: np.ndarray, what: str) -> np.ndarray:
    try:
        c = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        rank = np.linalg.matrix_rank(A)
        raise SingularSystemError(
            f"{what} is singular: rank {rank} < {A.shape[0]}"
        ) from exc
    return linalg.cho_solve(c, np.eye(A.shape[0]), check_finite=False)


def ridge_fit(data: Dataset, lam: float) -> RidgeFit:
    """Clean ridge estimate ``(X'X + n lam I)^{-1} X'y``.

    For ``lam`` below :data:`RIDGELESS_THRESHOLD` the ordinary least-squares
    solution is returned when ``d <= n``, and the minimum-norm interpolator
    ``X'(XX')^{-1}y`` when ``d > n``.

    Raises
    ------
    SingularSystemError
        Ridgeless fit whose Gram matrix is rank deficient.
    """
    if lam < 0 or not np.isfinite(lam):
        raise ArgumentError(f"lambda must be finite and >= 0, got {lam}")
    X, y = data.X, data.y
    n, d = X.shape
    if lam >= RIDGELESS_THRESHOLD or d <= n:
        pen = n * lam if lam >= RIDGELESS_THRESHOLD else 0.0
        G = X.T @ X
        G[np.diag_indices_from(G)] += pen
        gram_inv = _spd_inverse(G, "X'X" if pen == 0.0 else "X'X + n*lam*I")
        theta = gram_inv @ (X.T @ y)
        XG = X @ gram_inv
    else:
        K_inv = _spd_inverse(X @ X.T, "XX' (minimum-norm interpolation)")
        theta = X.T @ (K_inv @ y)
        # pinv(X'X) = X' (XX')^{-2} X
        XG = K_inv @ X
        gram_inv = XG.T @ XG
        XG = X @ gram_inv
    fitted = X @ theta
    leverage = np.einsum("ij,ij->i", XG, X)
    return RidgeFit(
        lam=float(lam), theta_hat=theta, gram_inv=gram_inv, fitted=fitted, leverage=leverage
    )


def loo_delta(fit: RidgeFit, data: Dataset, j: int) -> np.ndarray:
    """Exact ``theta_hat - theta_hat^{-j}`` from the rank-one downdate.

    ``(y_j - yhat_j) / (1 - S_j) * gram_inv @ x_j``
    """
    if not 0 <= j < data.n:
        raise ArgumentError(f"sample index {j} out of range [0, {data.n})")
    s = fit.leverage[j]
    if s >= 1.0 - 1e-12:
        raise DegenerateLeverageError(
            f"leverage of sample {j} is {s:.6g} >= 1; the deleted fit is undefined", index=j
        )
    x = data.X[j]
    return (data.y[j] - fit.fitted[j]) / (1.0 - s) * (fit.gram_inv @ x)


def loo_deltas(fit: RidgeFit, data: Dataset) -> np.ndarray:
    """All rank-one downdates at once; row ``j`` is ``loo_delta(fit, data, j)``."""
    bad = np.flatnonzero(fit.leverage >= 1.0 - 1e-12)
    if bad.size:
        j = int(bad[0])
        raise DegenerateLeverageError(
            f"leverage of sample {j} is {fit.leverage[j]:.6g} >= 1; the deleted fit is undefined",
            index=j,
        )
    scale = (data.y - fit.fitted) / (1.0 - fit.leverage)
    return scale[:, None] * (data.X @ fit.gram_inv)


def ridge_path(data: Dataset, lams) -> np.ndarray:
    """Ridge estimates for many penalties from one thin SVD.

    Row ``k`` equals ``ridge_fit(data, lams[k]).theta_hat``; penalties below
    :data:`RIDGELESS_THRESHOLD` give the least-squares or minimum-norm
    solution.

    Raises
    ------
    SingularSystemError
        A ridgeless penalty with a rank-deficient design.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams < 0) or not np.all(np.isfinite(lams)):
        raise ArgumentError("penalties must be finite and >= 0")
    n, d = data.X.shape
    U, s, Vt = linalg.svd(data.X, full_matrices=False, check_finite=False)
    uy = U.T @ data.y
    out = np.empty((lams.size, d))
    tiny = s.max() * max(n, d) * np.finfo(float).eps
    for k, lam in enumerate(lams):
        if lam < RIDGELESS_THRESHOLD:
            rank = int(np.sum(s > tiny))
            if rank < min(n, d):
                raise SingularSystemError(f"design is rank deficient: rank {rank} < {min(n, d)}")
            shrink = 1.0 / s
        else:
            shrink = s / (s * s + n * lam)
        out[k] = Vt.T @ (shrink * uy)
    return out
