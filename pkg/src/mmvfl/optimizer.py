"""Alternating-minimization training for consensus pseudo-labels.

Each participant k holds a private feature block ``X_k`` (same rows, its
own columns) and learns a transformation matrix ``W_k`` plus a local
pseudo-label matrix.  A shared consensus matrix ties the local
pseudo-labels together, and the label owner is additionally pulled toward
its one-hot label matrix ``Y``.  The training objective is

    sum_k  ||X_k W_k - Z_k||_F^2
         + sparsity_k * ||W_k||_{2,1}
         + consensus_penalty_k * ||Z_k - Z||_F^2
    + label_penalty * ||Z_owner - Y||_F^2

where ``Z_k`` are the local pseudo-labels and ``Z`` the consensus.  Every
block update below is the exact minimizer of its subproblem; ``W_k`` is
fit by iteratively reweighted least squares.  ``run_reference`` executes
the full schedule in a single process and serves as the equivalence
oracle for the federated protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    check_seed,
    derive_seed,
    ensure_matrix,
    frobenius_norm_sq,
    l21_norm,
    random_orthonormal,
    row_norms,
    solve_spd,
)

# Absolute slack allowed before a rising objective is treated as a
# numerical fault.
MONOTONICITY_SLACK = 1e-9

# Stream tags for seed derivation; every randomly initialized block gets
# its own child seed so federated and single-process runs agree bitwise.
_TRANSFORM_STREAM = 0
_PSEUDO_LABEL_STREAM = 1
_CONSENSUS_STREAM = 2


class DimensionMismatchError(Exception):
    """Participant blocks disagree on sample count or class count."""


class NonDecreasingObjectiveError(Exception):
    """The inner objective rose beyond slack: numerical fault."""


@dataclass(frozen=True)
class ProblemShape:
    """Dimensions of a multi-participant training problem."""

    num_participants: int
    num_classes: int
    num_samples: int
    dims: tuple[int, ...]

    def __post_init__(self):
        if self.num_participants < 2:
            raise ValueError("need at least two participants")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.num_samples < self.num_classes:
            raise ValueError("need at least as many samples as classes")
        if len(self.dims) != self.num_participants:
            raise ValueError("dims must list one feature count per participant")
        if any(d < 1 for d in self.dims):
            raise ValueError("every participant needs at least one feature")


@dataclass(frozen=True)
class Hyperparams:
    """Penalty weights and stopping controls for a training run.

    ``sparsity`` and ``consensus_penalty`` carry one value per
    participant; ``label_penalty`` applies only to the label owner.
    """

    sparsity: tuple[float, ...]
    consensus_penalty: tuple[float, ...]
    label_penalty: float
    eps: float = 1e-6
    inner_tol: float = 1e-6
    inner_max: int = 50
    outer_tol: float = 1e-5
    outer_max: int = 100

    def __post_init__(self):
        if len(self.sparsity) != len(self.consensus_penalty):
            raise ValueError("sparsity and consensus_penalty must have equal length")
        if any(not b > 0 for b in self.sparsity):
            raise ValueError("sparsity weights must be positive")
        if any(not z > 0 for z in self.consensus_penalty):
            raise ValueError("consensus penalties must be positive")
        if not self.label_penalty > 0:
            raise ValueError("label penalty must be positive")
        if not 0 < self.eps <= 1e-3:
            raise ValueError("eps must be in (0, 1e-3]")
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.inner_max < 1 or self.outer_max < 1:
            raise ValueError("iteration limits must be >= 1")

    @classmethod
    def uniform(cls, num_participants: int, *, sparsity: float = 0.1,
                consensus_penalty: float = 1000.0, label_penalty: float = 1000.0,
                **kwargs) -> "Hyperparams":
        """Same sparsity/consensus weight for every participant."""
        return cls(
            sparsity=(float(sparsity),) * num_participants,
            consensus_penalty=(float(consensus_penalty),) * num_participants,
            label_penalty=float(label_penalty),
            **kwargs,
        )


@dataclass
class ParticipantState:
    """Everything participant k keeps locally between rounds.

    ``features``, ``transform``, ``irls_diag``, and ``labels`` never
    leave the participant; only ``pseudo_labels`` and scalar objective
    contributions are shared.
    """

    participant_id: int
    features: np.ndarray
    transform: np.ndarray
    irls_diag: np.ndarray
    pseudo_labels: np.ndarray
    sparsity: float
    consensus_penalty: float
    is_label_owner: bool = False
    labels: np.ndarray | None = None
    label_penalty: float | None = None
    gram: np.ndarray | None = field(default=None, repr=False)

    def validate(self):
        n, d = self.features.shape
        if self.transform.shape[0] != d:
            raise DimensionMismatchError("transform rows must match feature columns")
        num_classes = self.transform.shape[1]
        if self.pseudo_labels.shape != (n, num_classes):
            raise DimensionMismatchError("pseudo-labels must be samples x classes")
        if self.irls_diag.shape != (d,):
            raise DimensionMismatchError("reweighting diagonal must have one entry per feature")
        if not np.all(self.irls_diag > 0):
            raise ValueError("reweighting diagonal must be strictly positive")
        if self.is_label_owner:
            if self.labels is None or self.label_penalty is None:
                raise ValueError("label owner needs labels and a label penalty")
            if self.labels.shape != (n, num_classes):
                raise DimensionMismatchError("labels must be samples x classes")
        elif self.labels is not None:
            raise ValueError("only the label owner may hold labels")


def one_hot(labels, num_classes: int) -> np.ndarray:
    """Encode integer class labels as a one-hot float64 matrix."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-D integer array")
    if num_classes < 2:
        raise ValueError("need at least two classes")
    if labels.size == 0:
        raise ValueError("labels must be non-empty")
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError("labels out of range")
    encoded = np.zeros((labels.size, num_classes), dtype=np.float64)
    encoded[np.arange(labels.size), labels.astype(int)] = 1.0
    return encoded


def check_one_hot(matrix) -> np.ndarray:
    """Validate a one-hot label matrix: exactly one 1 per row, rest 0."""
    matrix = ensure_matrix(matrix, "labels")
    if not np.all((matrix == 0.0) | (matrix == 1.0)):
        raise ValueError("label matrix entries must be 0 or 1")
    if not np.all(matrix.sum(axis=1) == 1.0):
        raise ValueError("each label row must contain exactly one 1")
    return matrix


# ---------------------------------------------------------------------------
# Block updates


def irls_diagonal(transform, eps: float) -> np.ndarray:
    """Reweighting diagonal 1 / (2 (||row||_2 + eps)) for the row-sparsity
    penalty; eps keeps entries finite when a row collapses to zero."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return 1.0 / (2.0 * (row_norms(transform) + eps))


def gram_matrix(features) -> np.ndarray:
    """Symmetrized feature gram matrix X^T X."""
    features = ensure_matrix(features, "features")
    g = features.T @ features
    return (g + g.T) * 0.5


def _penalized_solve(gram, xty, irls_diag, sparsity):
    a = gram.copy()
    a[np.diag_indices(a.shape[0])] += sparsity * irls_diag
    return solve_spd(a, xty)


def solve_transform(features, targets, irls_diag, sparsity: float, gram=None) -> np.ndarray:
    """Exact minimizer of ||X W - T||_F^2 + sparsity * tr(W^T diag W)."""
    features = ensure_matrix(features, "features")
    targets = ensure_matrix(targets, "targets")
    if targets.shape[0] != features.shape[0]:
        raise DimensionMismatchError("features and targets must have equal rows")
    if not sparsity > 0:
        raise ValueError("sparsity must be positive")
    irls_diag = np.asarray(irls_diag, dtype=np.float64)
    if irls_diag.shape != (features.shape[1],):
        raise DimensionMismatchError("reweighting diagonal must have one entry per feature")
    if gram is None:
        gram = gram_matrix(features)
    return _penalized_solve(gram, features.T @ targets, irls_diag, sparsity)


def fit_objective(features, targets, transform, sparsity: float) -> float:
    """Reconstruction error plus the row-sparsity penalty."""
    residual = features @ transform - targets
    return frobenius_norm_sq(residual) + sparsity * l21_norm(transform)


def smoothed_row_penalty(norms, eps: float) -> float:
    """Smoothed row-sparsity penalty sum_i (t_i - eps*log(1 + t_i/eps)).

    This is the exact penalty the reweighted solve descends on: its
    derivative in the squared row norm equals the reweighting diagonal
    1/(2(t+eps)).  It lower-bounds the plain row-norm sum and meets it
    as eps -> 0, but unlike the raw sum it is guaranteed non-increasing
    across reweighted iterations, so the monotonicity guard watches it
    rather than the raw objective (which can rise by up to eps*d/2)."""
    norms = np.asarray(norms, dtype=np.float64)
    return float(np.sum(norms - eps * np.log1p(norms / eps)))


def fit_sparse_transform(features, targets, sparsity: float, *, eps: float = 1e-6,
                         inner_tol: float = 1e-6, inner_max: int = 50,
                         init=None, gram=None):
    """Row-sparse least squares by iteratively reweighted least squares.

    Alternates the reweighting diagonal and the closed-form solve until
    the relative change of the objective drops below ``inner_tol`` or
    ``inner_max`` iterations pass.  Starts from ``init`` when given (a
    warm transform from the previous round), otherwise from a plain ridge
    step.  Returns ``(transform, irls_diag, objectives)`` where
    ``irls_diag`` is the diagonal used for the final solve, so the pair
    satisfies the reweighted stationarity condition to solver precision.

    The reported trace holds the raw objective; the internal descent
    guard watches the smoothed penalty instead, since only that one is
    mathematically non-increasing under reweighting (the raw row-norm
    sum may drift up by O(eps) near convergence).
    """
    features = ensure_matrix(features, "features")
    targets = ensure_matrix(targets, "targets")
    if not sparsity > 0:
        raise ValueError("sparsity must be positive")
    if inner_max < 1:
        raise ValueError("inner_max must be >= 1")
    if gram is None:
        gram = gram_matrix(features)
    xty = features.T @ targets
    d = features.shape[1]

    def evaluate(w):
        fit = frobenius_norm_sq(features @ w - targets)
        norms = row_norms(w)
        raw = fit + sparsity * float(norms.sum())
        smoothed = fit + sparsity * smoothed_row_penalty(norms, eps)
        return raw, smoothed

    transform = init
    objectives: list[float] = []
    guard = None
    if transform is not None:
        raw, guard = evaluate(transform)
        objectives.append(raw)
    diag = None
    for _ in range(inner_max):
        diag = irls_diagonal(transform, eps) if transform is not None else np.ones(d)
        transform = _penalized_solve(gram, xty, diag, sparsity)
        value, smoothed = evaluate(transform)
        if guard is not None and smoothed > guard + MONOTONICITY_SLACK * max(1.0, abs(guard)):
            raise NonDecreasingObjectiveError(
                f"smoothed objective rose from {guard!r} to {smoothed!r}")
        guard = smoothed
        if objectives:
            previous = objectives[-1]
            objectives.append(value)
            if abs(value - previous) <= inner_tol * max(1.0, abs(previous)):
                break
        else:
            objectives.append(value)
    return transform, diag, objectives


def owner_pseudo_label_update(projected, consensus, labels, consensus_penalty: float,
                              label_penalty: float) -> np.ndarray:
    """Label owner's pseudo-label minimizer: weighted average of the local
    projection, the consensus, and the one-hot labels."""
    return (projected + consensus_penalty * consensus + label_penalty * labels) / (
        1.0 + consensus_penalty + label_penalty)


def pseudo_label_update(projected, consensus, consensus_penalty: float) -> np.ndarray:
    """Non-owner pseudo-label minimizer: weighted average of the local
    projection and the consensus."""
    return (projected + consensus_penalty * consensus) / (1.0 + consensus_penalty)


def aggregate_consensus(pseudo_labels, penalties) -> np.ndarray:
    """Consensus minimizer: penalty-weighted average of the local
    pseudo-label matrices, accumulated in participant order."""
    pseudo_labels = list(pseudo_labels)
    penalties = [float(w) for w in penalties]
    if not pseudo_labels:
        raise ValueError("need at least one pseudo-label matrix")
    if len(penalties) != len(pseudo_labels):
        raise DimensionMismatchError("one penalty per pseudo-label matrix required")
    if any(not w > 0 for w in penalties):
        raise ValueError("consensus penalties must be positive")
    shape = pseudo_labels[0].shape
    numerator = np.zeros(shape, dtype=np.float64)
    total = 0.0
    for z, weight in zip(pseudo_labels, penalties):
        z = ensure_matrix(z, "pseudo-labels")
        if z.shape != shape:
            raise DimensionMismatchError("pseudo-label matrices must share a shape")
        numerator += weight * z
        total += weight
    return numerator / total


# ---------------------------------------------------------------------------
# Objective bookkeeping


def local_objective_part(state: ParticipantState) -> float:
    """The objective terms participant k can evaluate alone: fit error,
    sparsity penalty, and (owner only) the label attachment term."""
    projected = state.features @ state.transform
    value = frobenius_norm_sq(projected - state.pseudo_labels)
    value += state.sparsity * l21_norm(state.transform)
    if state.is_label_owner:
        value += state.label_penalty * frobenius_norm_sq(state.pseudo_labels - state.labels)
    return value


def round_objective(local_parts, pseudo_labels, penalties, consensus) -> float:
    """Total objective from local parts plus the consensus penalties.

    The coordinator and the single-process reference both use this exact
    accumulation so their objective traces agree bitwise.
    """
    total = 0.0
    for part, z, weight in zip(local_parts, pseudo_labels, penalties):
        total += float(part) + float(weight) * frobenius_norm_sq(z - consensus)
    return total


def total_objective(states, consensus) -> float:
    """Full training objective for a list of participant states."""
    parts = [local_objective_part(st) for st in states]
    return round_objective(parts, [st.pseudo_labels for st in states],
                           [st.consensus_penalty for st in states], consensus)


def has_converged(previous: float, current: float, tol: float) -> bool:
    """Relative-change stopping rule shared by every training loop."""
    return abs(current - previous) <= tol * max(1.0, abs(previous))


# ---------------------------------------------------------------------------
# Initialization


def init_transform(dim: int, num_classes: int, seed, participant_id: int) -> np.ndarray:
    """Seeded standard normal transform scaled by 1/sqrt(dim)."""
    rng = np.random.default_rng(derive_seed(seed, _TRANSFORM_STREAM, participant_id))
    return rng.standard_normal((dim, num_classes)) / np.sqrt(dim)


def init_pseudo_labels(num_samples: int, num_classes: int, seed, participant_id: int) -> np.ndarray:
    """Seeded random matrix with orthonormal columns for participant k."""
    return random_orthonormal(num_samples, num_classes,
                              derive_seed(seed, _PSEUDO_LABEL_STREAM, participant_id))


def init_consensus(num_samples: int, num_classes: int, seed) -> np.ndarray:
    """Seeded random matrix with orthonormal columns for the consensus."""
    return random_orthonormal(num_samples, num_classes,
                              derive_seed(seed, _CONSENSUS_STREAM, 0))


def init_participant_state(participant_id: int, features, hyper: Hyperparams,
                           num_classes: int, seed, labels=None) -> ParticipantState:
    """Build a participant's starting state from the shared seed."""
    features = ensure_matrix(features, f"features[{participant_id}]")
    n, d = features.shape
    transform = init_transform(d, num_classes, seed, participant_id)
    state = ParticipantState(
        participant_id=participant_id,
        features=features,
        transform=transform,
        irls_diag=irls_diagonal(transform, hyper.eps),
        pseudo_labels=init_pseudo_labels(n, num_classes, seed, participant_id),
        sparsity=hyper.sparsity[participant_id],
        consensus_penalty=hyper.consensus_penalty[participant_id],
        is_label_owner=labels is not None,
        labels=check_one_hot(labels) if labels is not None else None,
        label_penalty=hyper.label_penalty if labels is not None else None,
    )
    state.validate()
    return state


def make_states(views, labels, hyper: Hyperparams, seed) -> list[ParticipantState]:
    """States for all participants; the first one owns the labels."""
    views = [ensure_matrix(v, f"views[{k}]") for k, v in enumerate(views)]
    labels = check_one_hot(labels)
    if len(views) != len(hyper.sparsity):
        raise DimensionMismatchError("hyperparameters must cover every participant")
    n = views[0].shape[0]
    for k, view in enumerate(views):
        if view.shape[0] != n:
            raise DimensionMismatchError(
                f"view {k} has {view.shape[0]} rows, expected {n}")
    if labels.shape[0] != n:
        raise DimensionMismatchError("label rows must match sample count")
    num_classes = labels.shape[1]
    ProblemShape(len(views), num_classes, n, tuple(v.shape[1] for v in views))
    return [
        init_participant_state(k, view, hyper, num_classes, seed,
                               labels=labels if k == 0 else None)
        for k, view in enumerate(views)
    ]


# ---------------------------------------------------------------------------
# Round schedule


def participant_round(state: ParticipantState, consensus, hyper: Hyperparams) -> float:
    """One local round: refit the transform against the current
    pseudo-labels, refresh the pseudo-labels against the broadcast
    consensus, and return the local objective contribution (the only
    scalar that leaves the participant)."""
    if state.gram is None:
        state.gram = gram_matrix(state.features)
    transform, diag, _ = fit_sparse_transform(
        state.features, state.pseudo_labels, state.sparsity,
        eps=hyper.eps, inner_tol=hyper.inner_tol, inner_max=hyper.inner_max,
        init=state.transform, gram=state.gram)
    state.transform = transform
    state.irls_diag = diag
    projected = state.features @ transform
    if state.is_label_owner:
        state.pseudo_labels = owner_pseudo_label_update(
            projected, consensus, state.labels,
            state.consensus_penalty, state.label_penalty)
    else:
        state.pseudo_labels = pseudo_label_update(
            projected, consensus, state.consensus_penalty)
    part = frobenius_norm_sq(projected - state.pseudo_labels)
    part += state.sparsity * l21_norm(transform)
    if state.is_label_owner:
        part += state.label_penalty * frobenius_norm_sq(state.pseudo_labels - state.labels)
    return part


@dataclass
class TrainingResult:
    """Converged blocks plus the per-round objective trace."""

    transforms: list[np.ndarray]
    pseudo_labels: list[np.ndarray]
    consensus: np.ndarray
    objectives: list[float]

    @property
    def rounds(self) -> int:
        return len(self.objectives)


def run_reference(views, labels, hyper: Hyperparams, seed) -> TrainingResult:
    """Single-process execution of the full training schedule.

    Per round every participant refits its transform and pseudo-labels,
    then the consensus is re-aggregated and the objective recorded.
    Stops when the relative objective change drops below ``outer_tol``
    or after ``outer_max`` rounds.
    """
    seed = check_seed(seed)
    states = make_states(views, labels, hyper, seed)
    n = states[0].features.shape[0]
    num_classes = states[0].pseudo_labels.shape[1]
    consensus = init_consensus(n, num_classes, seed)
    penalties = [st.consensus_penalty for st in states]

    objectives: list[float] = []
    previous = None
    for _ in range(hyper.outer_max):
        parts = [participant_round(st, consensus, hyper) for st in states]
        consensus = aggregate_consensus([st.pseudo_labels for st in states], penalties)
        value = round_objective(parts, [st.pseudo_labels for st in states],
                                penalties, consensus)
        objectives.append(value)
        if previous is not None and has_converged(previous, value, hyper.outer_tol):
            break
        previous = value
    return TrainingResult(
        transforms=[st.transform for st in states],
        pseudo_labels=[st.pseudo_labels for st in states],
        consensus=consensus,
        objectives=objectives,
    )
