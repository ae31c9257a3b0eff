"""Closed-form removal of sensitive-attribute influence.

The mixed representation Z is truncated to its best rank-k
approximation and then residualized against the sensitive matrix S:

    Z_hat = (I - P_S) @ (M_k diag(D_k) N_k^T),   P_S = S (S^T S)^-1 S^T

Every column of Z_hat is orthogonal to every column of S, and the
truncation keeps the dominant variation of Z. The order is fixed:
truncate first, then residualize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import EncodedDataset
from .errors import ConfigError, NumericalError
from .linalg import explained_variance, projector, rank_k_svd, residualize

# Acceptable relative orthogonality residual of Z_hat^T S.
ORTHOGONALITY_TOL = 1e-8


@dataclass(frozen=True)
class FairProjectionConfig:
    """Rank to keep, optional intercept column for S, and an optional
    explained-variance target that overrides k when present."""

    k: int | None = None
    include_intercept: bool = False
    variance_target: float | None = None

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.variance_target is not None and not 0.0 < self.variance_target <= 1.0:
            raise ConfigError(
                f"variance_target must be in (0, 1], got {self.variance_target}"
            )
        if self.k is None and self.variance_target is None:
            raise ConfigError("either k or variance_target is required")


@dataclass
class DebiasedRepresentation:
    """The debiased matrix, the rank used, and the achieved
    orthogonality residual (max |Z_hat^T S| entry, absolute and
    relative to ||Z_hat||_F ||S||_F)."""

    Z_hat: np.ndarray
    k: int
    residual: float
    relative_residual: float


def select_k(Z, variance_target: float) -> int:
    """Smallest rank whose cumulative explained variance reaches the
    target fraction."""
    if not 0.0 < variance_target <= 1.0:
        raise ConfigError(f"variance_target must be in (0, 1], got {variance_target}")
    Z = np.asarray(Z, dtype=np.float64)
    D = np.linalg.svd(Z, compute_uv=False)
    cum = explained_variance(D)
    return int(np.searchsorted(cum, variance_target) + 1)


def build_sensitive_matrix(
    dataset: EncodedDataset,
    attributes: list[str],
    include_intercept: bool = False,
) -> np.ndarray:
    """Stack the named sensitive attributes' columns of S (multiple
    attributes are removed simultaneously), optionally appending an
    all-ones intercept column."""
    columns = []
    for name in attributes:
        hits = [
            j
            for j, col in enumerate(dataset.sensitive_names)
            if col == name or col.startswith(f"{name}=")
        ]
        if not hits:
            raise ConfigError(
                f"unknown sensitive attribute {name!r}; dataset has "
                f"{dataset.sensitive_names}"
            )
        columns.extend(dataset.S[:, j] for j in hits)
    S = np.column_stack(columns)
    if include_intercept:
        S = np.hstack([S, np.ones((S.shape[0], 1))])
    _check_full_rank(S)
    return S


def _check_full_rank(S: np.ndarray) -> None:
    sv = np.linalg.svd(S, compute_uv=False)
    if sv[0] == 0.0 or (sv[-1] / sv[0]) ** 2 < 1e-12:
        raise NumericalError(
            "sensitive matrix is rank-deficient; drop duplicate or "
            "collinear sensitive columns"
        )


def debias(Z, S, config: FairProjectionConfig, method: str = "blocked") -> DebiasedRepresentation:
    """Compute Z_hat = (I - P_S) @ rank_k(Z).

    method 'blocked' (default) applies the residualization as
    Z_k - S ((S^T S)^-1 (S^T Z_k)) and never materializes an n x n
    matrix; 'dense' forms I - P_S explicitly (small n only). Both give
    the same result to floating-point accuracy.
    """
    Z = np.asarray(Z, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or Z.ndim != 2:
        raise ConfigError("Z and S must be 2-D matrices")
    if Z.shape[0] != S.shape[0]:
        raise ConfigError(f"row mismatch: Z has {Z.shape[0]} rows, S has {S.shape[0]}")
    if config.include_intercept:
        S = np.hstack([S, np.ones((S.shape[0], 1))])
    _check_full_rank(S)
    if config.variance_target is not None:
        k = select_k(Z, config.variance_target)
    else:
        k = config.k
    n, p = Z.shape
    if not 1 <= k <= min(n, p):
        raise ConfigError(f"k={k} out of range [1, {min(n, p)}] for a {n}x{p} matrix")

    Z_k = rank_k_svd(Z, k).reconstruction()
    if method == "blocked":
        Z_hat = residualize(S, Z_k)
    elif method == "dense":
        Z_hat = (np.eye(n) - projector(S)) @ Z_k
    else:
        raise ConfigError(f"unknown method {method!r}; use 'blocked' or 'dense'")

    residual = float(np.max(np.abs(Z_hat.T @ S)))
    denom = np.linalg.norm(Z_hat) * np.linalg.norm(S) + np.finfo(np.float64).tiny
    relative = residual / denom
    if relative >= ORTHOGONALITY_TOL:
        raise NumericalError(
            f"debiasing failed orthogonality: relative residual {relative:.3e}"
        )
    return DebiasedRepresentation(
        Z_hat=Z_hat, k=k, residual=residual, relative_residual=relative
    )
