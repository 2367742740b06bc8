"""Rasch (1PL) model and joint maximum-likelihood calibration.

Abilities (theta) and difficulties (b) live on one logit scale; only
``theta - b`` enters any probability. Calibration alternates damped Newton
updates of the ability block and the difficulty block, then anchors the
scale so that the mean difficulty is zero.

No small-sample JML bias correction such as ``(n - 1) / n`` is applied.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    EmptyAfterReductionError,
    InconsistentInputError,
    InvalidArgumentError,
    NumericalFailureError,
)

ALL_CORRECT = "all_correct"
ALL_INCORRECT = "all_incorrect"
CASCADE = "cascade"

_PROPORTION_CLAMP = (0.01, 0.99)
_MAX_HALVINGS = 40


@dataclass(frozen=True)
class ItemParameters:
    item_id: str
    b: float


@dataclass(frozen=True)
class AbilityEstimate:
    learner_id: str
    theta: float


@dataclass(frozen=True)
class Exclusion:
    id: str
    kind: str  # "learner" or "item"
    reason: str


@dataclass(frozen=True)
class CalibrationConfig:
    max_iterations: int = 100
    convergence_tolerance: float = 1e-4
    newton_damping: float = 1.0
    theta_bound: float = 10.0

    def __post_init__(self):
        if not isinstance(self.max_iterations, (int, np.integer)) or self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be a positive integer")
        if not self.convergence_tolerance > 0:
            raise InvalidArgumentError("convergence_tolerance must be positive")
        if not 0 < self.newton_damping <= 1:
            raise InvalidArgumentError("newton_damping must lie in (0, 1]")
        if not self.theta_bound > 0:
            raise InvalidArgumentError("theta_bound must be positive")


class ResponseMatrix:
    """Sparse binary learner-by-item correctness matrix.

    Entries are kept in insertion order as three parallel arrays of learner
    index, item index and correctness. Ids are indexed in first-appearance
    order. Instances are read-only.
    """

    __slots__ = ("learner_ids", "item_ids", "rows", "cols", "x", "_learner_pos", "_item_pos")

    def __init__(self, learner_ids, item_ids, rows, cols, x):
        self.learner_ids = tuple(learner_ids)
        self.item_ids = tuple(item_ids)
        self.rows = _frozen(np.asarray(rows, dtype=np.int64))
        self.cols = _frozen(np.asarray(cols, dtype=np.int64))
        self.x = _frozen(np.asarray(x, dtype=np.int8))
        if not (len(self.rows) == len(self.cols) == len(self.x)):
            raise InconsistentInputError("entry arrays differ in length")
        n_l, n_i = len(self.learner_ids), len(self.item_ids)
        if len(self.rows) and (
            self.rows.min() < 0 or self.rows.max() >= n_l
            or self.cols.min() < 0 or self.cols.max() >= n_i
        ):
            raise InconsistentInputError("entry index out of range")
        if np.any((self.x != 0) & (self.x != 1)):
            raise InconsistentInputError("responses must be 0 or 1")
        keys = self.rows * max(n_i, 1) + self.cols
        if len(np.unique(keys)) != len(keys):
            raise InconsistentInputError("more than one entry for a (learner, item) pair")
        if len(self.rows) and (
            np.bincount(self.rows, minlength=n_l).min() == 0
            or np.bincount(self.cols, minlength=n_i).min() == 0
        ):
            raise InconsistentInputError("every indexed learner and item needs an entry")
        self._learner_pos = {lid: k for k, lid in enumerate(self.learner_ids)}
        self._item_pos = {iid: k for k, iid in enumerate(self.item_ids)}
        if len(self._learner_pos) != n_l or len(self._item_pos) != n_i:
            raise InconsistentInputError("duplicate ids in index")

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, int]]) -> "ResponseMatrix":
        """Build from ``(learner_id, item_id, correct)`` triples in order."""
        learners: dict[str, int] = {}
        items: dict[str, int] = {}
        rows, cols, xs = [], [], []
        for learner_id, item_id, correct in triples:
            rows.append(learners.setdefault(learner_id, len(learners)))
            cols.append(items.setdefault(item_id, len(items)))
            xs.append(int(correct))
        return cls(learners, items, rows, cols, xs)

    @classmethod
    def from_dense(cls, data, learner_ids=None, item_ids=None) -> "ResponseMatrix":
        """Build a complete matrix from a 2-D 0/1 array (row-major entries)."""
        data = np.asarray(data)
        n_l, n_i = data.shape
        learner_ids = learner_ids or [f"L{i}" for i in range(n_l)]
        item_ids = item_ids or [f"I{j}" for j in range(n_i)]
        rows, cols = np.divmod(np.arange(n_l * n_i), n_i)
        return cls(learner_ids, item_ids, rows, cols, data.reshape(-1))

    @property
    def n_learners(self) -> int:
        return len(self.learner_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def __len__(self):
        return len(self.x)

    def entries(self):
        for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.x.tolist()):
            yield self.learner_ids[r], self.item_ids[c], v

    def learner_index(self, learner_id) -> int:
        return self._learner_pos[learner_id]

    def item_index(self, item_id) -> int:
        return self._item_pos[item_id]

    def item_counts(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n_items)

    def to_dense(self, missing=np.nan) -> np.ndarray:
        out = np.full((self.n_learners, self.n_items), missing, dtype=float)
        out[self.rows, self.cols] = self.x
        return out

    def subset(self, keep_learners: np.ndarray, keep_items: np.ndarray) -> "ResponseMatrix":
        """Restrict to the given boolean masks, reindexing in original order."""
        mask = keep_learners[self.rows] & keep_items[self.cols]
        new_row = np.cumsum(keep_learners) - 1
        new_col = np.cumsum(keep_items) - 1
        return ResponseMatrix(
            [lid for lid, k in zip(self.learner_ids, keep_learners) if k],
            [iid for iid, k in zip(self.item_ids, keep_items) if k],
            new_row[self.rows[mask]],
            new_col[self.cols[mask]],
            self.x[mask],
        )

    def __eq__(self, other):
        if not isinstance(other, ResponseMatrix):
            return NotImplemented
        return (
            self.learner_ids == other.learner_ids
            and self.item_ids == other.item_ids
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.x, other.x)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"ResponseMatrix({self.n_learners} learners, {self.n_items} items, "
            f"{len(self)} entries)"
        )


@dataclass(frozen=True)
class CalibrationResult:
    items: tuple[ItemParameters, ...]
    abilities: tuple[AbilityEstimate, ...]
    standard_errors: tuple[float, ...]
    final_log_likelihood: float
    iterations_used: int
    converged: bool
    exclusions: tuple[Exclusion, ...]
    initial_log_likelihood: float = math.nan
    log_likelihood_trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def difficulties(self) -> dict[str, float]:
        return {p.item_id: p.b for p in self.items}

    @property
    def thetas(self) -> dict[str, float]:
        return {a.learner_id: a.theta for a in self.abilities}


@dataclass(frozen=True)
class Gradients:
    """Log-likelihood derivatives aligned with the matrix's learner and item index."""

    theta: np.ndarray
    b: np.ndarray
    theta_second: np.ndarray
    b_second: np.ndarray


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


def rasch_probability(theta: float, b: float) -> float:
    """Probability of a correct response, ``logistic(theta - b)``."""
    if not (math.isfinite(theta) and math.isfinite(b)):
        raise InvalidArgumentError(f"non-finite argument: theta={theta!r}, b={b!r}")
    d = theta - b
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


def _aligned(values, ids, what) -> np.ndarray:
    if isinstance(values, Mapping):
        try:
            return np.array([float(values[k]) for k in ids], dtype=float)
        except KeyError as exc:
            raise InconsistentInputError(f"no {what} for {exc.args[0]!r}") from None
    arr = np.asarray(values, dtype=float)
    if arr.shape != (len(ids),):
        raise InconsistentInputError(
            f"expected {len(ids)} {what} values, got shape {arr.shape}"
        )
    return arr


def _ll(matrix: ResponseMatrix, theta: np.ndarray, b: np.ndarray) -> float:
    d = theta[matrix.rows] - b[matrix.cols]
    # ln P = -log(1 + e^-d), ln(1 - P) = -log(1 + e^d)
    terms = -np.logaddexp(0.0, np.where(matrix.x == 1, -d, d))
    return float(terms.sum())


def log_likelihood(matrix: ResponseMatrix, abilities, items) -> float:
    """Bernoulli log-likelihood of every observed entry.

    ``abilities`` and ``items`` are either mappings from id to value or
    arrays aligned with the matrix index.
    """
    if len(matrix) == 0:
        return 0.0
    theta = _aligned(abilities, matrix.learner_ids, "theta")
    b = _aligned(items, matrix.item_ids, "b")
    return _ll(matrix, theta, b)


def _residual_and_info(matrix, theta, b):
    p = expit(theta[matrix.rows] - b[matrix.cols])
    return matrix.x - p, p * (1.0 - p)


def likelihood_gradients(matrix: ResponseMatrix, abilities, items) -> Gradients:
    theta = _aligned(abilities, matrix.learner_ids, "theta")
    b = _aligned(items, matrix.item_ids, "b")
    resid, info = _residual_and_info(matrix, theta, b)
    g_theta = np.bincount(matrix.rows, weights=resid, minlength=matrix.n_learners)
    g_b = -np.bincount(matrix.cols, weights=resid, minlength=matrix.n_items)
    h_theta = -np.bincount(matrix.rows, weights=info, minlength=matrix.n_learners)
    h_b = -np.bincount(matrix.cols, weights=info, minlength=matrix.n_items)
    return Gradients(g_theta, g_b, h_theta, h_b)


def exclude_degenerate(matrix: ResponseMatrix) -> tuple[ResponseMatrix, list[Exclusion]]:
    """Drop perfect and zero score rows/columns until none remain.

    Anything found degenerate on the first pass is tagged with its own
    reason; anything that only becomes degenerate (or empty) after earlier
    removals is tagged ``cascade``.
    """
    keep_l = np.ones(matrix.n_learners, dtype=bool)
    keep_i = np.ones(matrix.n_items, dtype=bool)
    exclusions: list[Exclusion] = []
    first_pass = True
    while True:
        live = keep_l[matrix.rows] & keep_i[matrix.cols]
        rows, cols, x = matrix.rows[live], matrix.cols[live], matrix.x[live]
        n_l = np.bincount(rows, minlength=matrix.n_learners)
        n_i = np.bincount(cols, minlength=matrix.n_items)
        s_l = np.bincount(rows, weights=x, minlength=matrix.n_learners)
        s_i = np.bincount(cols, weights=x, minlength=matrix.n_items)

        bad_l = keep_l & ((n_l == 0) | (s_l == 0) | (s_l == n_l))
        bad_i = keep_i & ((n_i == 0) | (s_i == 0) | (s_i == n_i))
        if not bad_l.any() and not bad_i.any():
            break

        def reason(n, s):
            if first_pass and n > 0:
                return ALL_CORRECT if s == n else ALL_INCORRECT
            return CASCADE

        for j in np.flatnonzero(bad_i):
            exclusions.append(Exclusion(matrix.item_ids[j], "item", reason(n_i[j], s_i[j])))
        for i in np.flatnonzero(bad_l):
            exclusions.append(Exclusion(matrix.learner_ids[i], "learner", reason(n_l[i], s_l[i])))
        keep_l &= ~bad_l
        keep_i &= ~bad_i
        first_pass = False

    if not keep_l.any() or not keep_i.any():
        raise EmptyAfterReductionError(
            "no learners or items remain after removing degenerate scores"
        )
    if len(exclusions) == 0:
        return matrix, exclusions
    return matrix.subset(keep_l, keep_i), exclusions


def _logit(p):
    p = np.clip(p, *_PROPORTION_CLAMP)
    return np.log(p / (1.0 - p))


def initial_estimates(matrix: ResponseMatrix) -> tuple[np.ndarray, np.ndarray]:
    """PROX-style start from clamped proportions correct."""
    n_l = np.bincount(matrix.rows, minlength=matrix.n_learners)
    n_i = np.bincount(matrix.cols, minlength=matrix.n_items)
    s_l = np.bincount(matrix.rows, weights=matrix.x, minlength=matrix.n_learners)
    s_i = np.bincount(matrix.cols, weights=matrix.x, minlength=matrix.n_items)
    return _logit(s_l / n_l), -_logit(s_i / n_i)


def _newton_block(matrix, theta, b, ll, block, config, iteration):
    """One damped Newton update of a parameter block with step halving.

    Returns the new parameters, their log-likelihood and the largest
    absolute change. A step that cannot be made non-worsening is dropped.
    """
    resid, info = _residual_and_info(matrix, theta, b)
    if block == "theta":
        index, n, sign, current = matrix.rows, matrix.n_learners, 1.0, theta
    else:
        index, n, sign, current = matrix.cols, matrix.n_items, -1.0, b
    grad = sign * np.bincount(index, weights=resid, minlength=n)
    curv = np.bincount(index, weights=info, minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(curv > 0, grad / curv, 0.0) * config.newton_damping

    bound = config.theta_bound
    for _ in range(_MAX_HALVINGS):
        proposal = np.clip(current + step, -bound, bound)
        if not np.all(np.isfinite(proposal)):
            raise NumericalFailureError(f"non-finite {block} iterate", iteration)
        if block == "theta":
            new_ll = _ll(matrix, proposal, b)
        else:
            new_ll = _ll(matrix, theta, proposal)
        if new_ll >= ll:
            change = float(np.max(np.abs(proposal - current))) if n else 0.0
            if block == "theta":
                return proposal, b, new_ll, change
            return theta, proposal, new_ll, change
        step = step * 0.5
    return theta, b, ll, 0.0


def calibrate_jml(matrix: ResponseMatrix, config: CalibrationConfig | None = None) -> CalibrationResult:
    """Joint maximum-likelihood calibration of a Rasch model.

    Degenerate learners and items are removed first and reported in
    ``exclusions``. Each sweep updates every ability with the difficulties
    fixed and then every difficulty with the abilities fixed. Iteration
    stops once the largest parameter change in a sweep drops below
    ``convergence_tolerance`` or after ``max_iterations`` sweeps. The
    result is shifted so that the difficulties average to zero.
    """
    config = config or CalibrationConfig()
    reduced, exclusions = exclude_degenerate(matrix)
    theta, b = initial_estimates(reduced)
    bound = config.theta_bound
    theta = np.clip(theta, -bound, bound)
    b = np.clip(b, -bound, bound)

    ll = _ll(reduced, theta, b)
    if not math.isfinite(ll):
        raise NumericalFailureError("non-finite initial log-likelihood", 0)
    initial_ll = ll
    trace = [ll]
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        theta, b, ll, d_theta = _newton_block(reduced, theta, b, ll, "theta", config, iteration)
        theta, b, ll, d_b = _newton_block(reduced, theta, b, ll, "b", config, iteration)
        trace.append(ll)
        if max(d_theta, d_b) < config.convergence_tolerance:
            converged = True
            break

    shift = float(np.mean(b))
    b = b - shift
    theta = theta - shift
    final_ll = _ll(reduced, theta, b)
    if not math.isfinite(final_ll):
        raise NumericalFailureError("non-finite final log-likelihood", iteration)

    ses = _item_standard_errors(reduced, theta, b)
    return CalibrationResult(
        items=tuple(ItemParameters(i, float(v)) for i, v in zip(reduced.item_ids, b)),
        abilities=tuple(
            AbilityEstimate(lid, float(v)) for lid, v in zip(reduced.learner_ids, theta)
        ),
        standard_errors=tuple(float(s) for s in ses),
        final_log_likelihood=final_ll,
        iterations_used=iteration,
        converged=converged,
        exclusions=tuple(exclusions),
        initial_log_likelihood=initial_ll,
        log_likelihood_trace=tuple(trace),
    )


def _item_standard_errors(matrix, theta, b):
    _, info = _residual_and_info(matrix, theta, b)
    total = np.bincount(matrix.cols, weights=info, minlength=matrix.n_items)
    counts = np.bincount(matrix.cols, minlength=matrix.n_items)
    if np.any(counts == 0):
        missing = matrix.item_ids[int(np.flatnonzero(counts == 0)[0])]
        raise InconsistentInputError(f"item {missing!r} has no responses")
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(total)


def standard_errors(matrix: ResponseMatrix, result: CalibrationResult) -> dict[str, float]:
    """Asymptotic standard error of each calibrated difficulty, ``1/sqrt(information)``.

    Only entries whose learner and item both appear in ``result`` count.
    """
    thetas = result.thetas
    bs = result.difficulties
    info = {iid: 0.0 for iid in bs}
    for learner_id, item_id, _ in matrix.entries():
        if item_id in info and learner_id in thetas:
            p = rasch_probability(thetas[learner_id], bs[item_id])
            info[item_id] += p * (1.0 - p)
    out = {}
    for item_id, total in info.items():
        if total <= 0.0:
            raise InconsistentInputError(f"item {item_id!r} has no responses")
        out[item_id] = 1.0 / math.sqrt(total)
    return out
