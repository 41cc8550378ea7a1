"""Dense float64 matrix kernels shared by every update rule.

All matrices are 2-D float64 arrays with finite entries.  Every function
here is pure: identical inputs produce bit-identical outputs, which the
round-based training protocol relies on to stay reproducible across
transports and across runs.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

MAX_SEED = 2**64 - 1

# Residual target for the positive-definite solver, relative to ||b||_F.
SPD_RESIDUAL_TOL = 1e-10


class NotPositiveDefiniteError(Exception):
    """Cholesky factorization failed: the system matrix is not SPD."""


def check_seed(seed) -> int:
    """Validate a seed as a 64-bit unsigned integer and return it as int."""
    if isinstance(seed, (bool, float)):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def derive_seed(seed, *key: int) -> int:
    """Derive a child seed from a base seed and a tuple of small integers.

    Used to give every randomly initialized block its own independent
    stream while keeping the whole run reproducible from one base seed.
    """
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def ensure_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a float64 2-D array with >= 1 row/col and finite entries."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def frobenius_norm_sq(m) -> float:
    """Sum of squared entries."""
    m = ensure_matrix(m)
    return float(np.sum(m * m))


def row_norms(m) -> np.ndarray:
    """Euclidean norm of each row."""
    m = ensure_matrix(m)
    return np.sqrt(np.sum(m * m, axis=1))


def l21_norm(m) -> float:
    """Sum of row-wise Euclidean norms (the row-sparsity penalty)."""
    return float(np.sum(row_norms(m)))


def solve_spd(a, b) -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a.

    Cholesky factorization followed by iterative refinement, so the
    relative residual ||a x - b||_F / ||b||_F stays within
    SPD_RESIDUAL_TOL even for poorly scaled systems.
    """
    a = ensure_matrix(a, "a")
    b = ensure_matrix(b, "b")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"a must be square, got shape {a.shape}")
    if b.shape[0] != n:
        raise ValueError(f"b has {b.shape[0]} rows, expected {n}")
    asym = float(np.max(np.abs(a - a.T)))
    if asym > 1e-10 * max(1.0, float(np.max(np.abs(a)))):
        raise ValueError("a is not symmetric")
    try:
        factor = cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    x = cho_solve(factor, b, check_finite=False)
    b_norm = float(np.linalg.norm(b))
    if b_norm > 0.0:
        for _ in range(3):
            residual = b - a @ x
            if float(np.linalg.norm(residual)) <= 1e-13 * b_norm:
                break
            x = x + cho_solve(factor, residual, check_finite=False)
    return x


def random_orthonormal(rows: int, cols: int, seed) -> np.ndarray:
    """Seeded random matrix with orthonormal columns (rows >= cols).

    QR of a standard normal draw, with column signs fixed so the result
    is a deterministic function of the seed.
    """
    if rows < cols:
        raise ValueError(f"need rows >= cols for orthonormal columns, got {rows} < {cols}")
    if cols < 1:
        raise ValueError("cols must be >= 1")
    rng = np.random.default_rng(check_seed(seed))
    gauss = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs
