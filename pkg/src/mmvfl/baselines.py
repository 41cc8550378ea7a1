"""Supervised baselines that regress features directly onto the labels.

``supfl_solve`` fits one participant's transform against the one-hot
label matrix with the same reweighted least-squares scheme the federated
training uses, i.e. the label matrix replaces the pseudo-labels.
``supmvlfl_solve`` is the summed multi-view variant; the objective is
separable across participants, so the joint fit must match independent
per-participant fits; that equivalence is pinned by tests.
"""

from __future__ import annotations

import numpy as np

from .numerics import ensure_matrix, frobenius_norm_sq, row_norms
from .optimizer import (
    MONOTONICITY_SLACK,
    NonDecreasingObjectiveError,
    _penalized_solve,
    check_one_hot,
    fit_sparse_transform,
    gram_matrix,
    has_converged,
    irls_diagonal,
    smoothed_row_penalty,
)


def supfl_solve(features, labels, sparsity: float, *, eps: float = 1e-6,
                tol: float = 1e-6, max_iter: int = 50):
    """Row-sparse regression of one feature block onto the labels.

    Returns ``(transform, objectives)`` with the per-iteration objective
    trace.
    """
    labels = check_one_hot(labels)
    transform, _, objectives = fit_sparse_transform(
        features, labels, sparsity, eps=eps, inner_tol=tol, inner_max=max_iter)
    return transform, objectives


def supmvlfl_solve(views, labels, sparsity, *, eps: float = 1e-6,
                   tol: float = 1e-6, max_iter: int = 50):
    """Joint row-sparse regression of every view onto the labels.

    All views are iterated together and the stopping rule watches the
    summed objective; each view's update only reads that view's state,
    which keeps the problem separable.  Returns
    ``(transforms, objectives)`` where ``objectives`` traces the sum.
    """
    views = [ensure_matrix(v, f"views[{k}]") for k, v in enumerate(views)]
    labels = check_one_hot(labels)
    if np.isscalar(sparsity):
        sparsity = [float(sparsity)] * len(views)
    sparsity = [float(b) for b in sparsity]
    if len(sparsity) != len(views):
        raise ValueError("one sparsity weight per view required")
    if any(not b > 0 for b in sparsity):
        raise ValueError("sparsity weights must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    for k, view in enumerate(views):
        if view.shape[0] != labels.shape[0]:
            raise ValueError(f"view {k} rows do not match the label rows")

    grams = [gram_matrix(v) for v in views]
    xtys = [v.T @ labels for v in views]
    transforms: list[np.ndarray | None] = [None] * len(views)

    objectives: list[float] = []
    guard = None
    for _ in range(max_iter):
        total = 0.0
        smoothed = 0.0
        for k, view in enumerate(views):
            if transforms[k] is None:
                diag = np.ones(view.shape[1])
            else:
                diag = irls_diagonal(transforms[k], eps)
            transforms[k] = _penalized_solve(grams[k], xtys[k], diag, sparsity[k])
            fit = frobenius_norm_sq(view @ transforms[k] - labels)
            norms = row_norms(transforms[k])
            total += fit + sparsity[k] * float(norms.sum())
            smoothed += fit + sparsity[k] * smoothed_row_penalty(norms, eps)
        if guard is not None and smoothed > guard + MONOTONICITY_SLACK * max(1.0, abs(guard)):
            raise NonDecreasingObjectiveError(
                f"smoothed objective rose from {guard!r} to {smoothed!r}")
        guard = smoothed
        if objectives:
            previous = objectives[-1]
            objectives.append(total)
            if has_converged(previous, total, tol):
                break
        else:
            objectives.append(total)
    return transforms, objectives
