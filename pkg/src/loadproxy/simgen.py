"""Synthetic item banks, learners, adaptive sessions and questionnaires.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence`` with an entropy list ``[seed, stream, ...]``. Each stream
(population, database responses, study learners, per-learner sessions)
has its own key so that results do not depend on evaluation order.
Changing this scheme changes the golden fixtures.

Difficulty levels are plain logits; ``routing_level`` plays the role of
the fixed starting grade of the real system.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import BankExhaustedError, InvalidArgumentError
from .ingest import (
    INDEPENDENT,
    InteractionEvent,
    ItemMeta,
    QuestionnaireAdministration,
    SubscaleMap,
    serialize_events,
    serialize_items,
    serialize_questionnaires,
)
from .irt import ResponseMatrix, rasch_probability

EVENT_SPACING_S = 30.0

_STREAM_POPULATION = 0
_STREAM_RESPONSES = 1
_STREAM_STUDY = 2
_STREAM_SESSION = 3

FIXTURE_FILES = {
    "events": "events.csv",
    "session_events": "session_events.csv",
    "items": "items.csv",
    "questionnaires": "questionnaires.csv",
    "subscale_map": "subscale_map.json",
    "ground_truth": "ground_truth.json",
}


@dataclass(frozen=True)
class SimConfig:
    n_learners: int = 1000
    n_items: int = 200
    theta_mean: float = 0.0
    theta_sd: float = 1.0
    b_min: float = -3.0
    b_max: float = 3.0
    routing_item_count: int = 20
    routing_level: float = 1.5
    adaptation_step: float = 0.3
    session_item_count: int = 90
    administration_every: int = 10
    noise_sd: float = 0.05
    seed: int = 0
    study_learners: int = 35
    el_low: float = 0.1
    el_high: float = 0.9
    gl_level: float = 0.75

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise InvalidArgumentError(f"{name}: {msg}")

        for name in ("n_learners", "n_items", "session_item_count",
                     "administration_every", "study_learners"):
            v = getattr(self, name)
            need(isinstance(v, (int, np.integer)) and v >= 1, name, "must be a positive integer")
        need(isinstance(self.routing_item_count, (int, np.integer)) and self.routing_item_count >= 0,
             "routing_item_count", "must be a non-negative integer")
        for name in ("theta_mean", "theta_sd", "b_min", "b_max", "routing_level",
                     "adaptation_step", "noise_sd", "el_low", "el_high", "gl_level"):
            need(math.isfinite(getattr(self, name)), name, "must be finite")
        need(self.theta_sd >= 0, "theta_sd", "must be non-negative")
        need(self.b_min < self.b_max, "b_min", "must be below b_max")
        need(self.adaptation_step > 0, "adaptation_step", "must be positive")
        need(self.noise_sd >= 0, "noise_sd", "must be non-negative")
        need(self.session_item_count >= self.routing_item_count, "session_item_count",
             "must be at least routing_item_count")
        need(0 <= self.el_low <= self.el_high <= 1, "el_low", "need 0 <= el_low <= el_high <= 1")
        need(0 <= self.gl_level <= 1, "gl_level", "must lie in [0, 1]")
        need(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ItemBank:
    item_ids: tuple[str, ...]
    true_b: tuple[float, ...]

    def __len__(self):
        return len(self.item_ids)


@dataclass(frozen=True)
class Population:
    learner_ids: tuple[str, ...]
    thetas: tuple[float, ...]
    bank: ItemBank


@dataclass(frozen=True)
class SessionTruth:
    """Ground truth for one simulated session."""

    learner_id: str
    theta: float
    extraneous: float
    routing_end_ts: float
    chosen_levels: tuple[float, ...]
    served_b: tuple[float, ...]
    interval_mean_b: tuple[float, ...]
    intrinsic: tuple[float, ...]


@dataclass(frozen=True)
class Session:
    events: tuple[InteractionEvent, ...]
    administrations: tuple[QuestionnaireAdministration, ...]
    truth: SessionTruth


@dataclass(frozen=True)
class Study:
    """Database population with its response matrix plus the adaptive sessions."""

    config: SimConfig
    population: Population
    responses: ResponseMatrix
    sessions: tuple[Session, ...]
    subscale_map: SubscaleMap = field(default_factory=SubscaleMap.default)

    def database_events(self) -> list[InteractionEvent]:
        return matrix_events(self.responses)

    def session_events(self) -> list[InteractionEvent]:
        return [e for s in self.sessions for e in s.events]

    def administrations(self) -> list[QuestionnaireAdministration]:
        return [a for s in self.sessions for a in s.administrations]


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *stream])


def _width(n: int) -> int:
    return max(3, len(str(n)))


def sample_population(config: SimConfig) -> Population:
    """Normal abilities and an equally spaced difficulty grid."""
    config.validate()
    rng = _rng(config.seed, _STREAM_POPULATION)
    thetas = config.theta_mean + config.theta_sd * rng.standard_normal(config.n_learners)
    true_b = np.linspace(config.b_min, config.b_max, config.n_items)
    lw, iw = _width(config.n_learners), _width(config.n_items)
    return Population(
        learner_ids=tuple(f"L{i + 1:0{lw}d}" for i in range(config.n_learners)),
        thetas=tuple(float(t) for t in thetas),
        bank=ItemBank(
            item_ids=tuple(f"I{j + 1:0{iw}d}" for j in range(config.n_items)),
            true_b=tuple(float(b) for b in true_b),
        ),
    )


def simulate_responses(thetas, true_b, seed, learner_ids=None, item_ids=None) -> ResponseMatrix:
    """Complete Rasch response matrix with Bernoulli draws."""
    th = np.asarray(thetas, dtype=float)
    bs = np.asarray(true_b, dtype=float)
    if not (np.all(np.isfinite(th)) and np.all(np.isfinite(bs))):
        raise InvalidArgumentError("abilities and difficulties must be finite")
    rng = _rng(seed, _STREAM_RESPONSES)
    d = th[:, None] - bs[None, :]
    draws = rng.random(d.shape) < expit(d)
    return ResponseMatrix.from_dense(draws.astype(np.int8), learner_ids, item_ids)


def matrix_events(matrix: ResponseMatrix) -> list[InteractionEvent]:
    """One event per entry, timestamped by the entry's position in its row."""
    position: dict[int, int] = {}
    out = []
    for r, c, x in zip(matrix.rows.tolist(), matrix.cols.tolist(), matrix.x.tolist()):
        k = position.get(r, 0) + 1
        position[r] = k
        out.append(
            InteractionEvent(matrix.learner_ids[r], matrix.item_ids[c], EVENT_SPACING_S * k, x)
        )
    return out


def _rating(value: float, noise: float) -> int:
    return int(min(10, max(1, round(1 + 9 * (value + noise)))))


def simulate_session(
    theta: float,
    bank: ItemBank,
    config: SimConfig,
    seed: int,
    *,
    learner_id: str = "S001",
    extraneous: float | None = None,
    intrinsic_bounds: tuple[float, float] | None = None,
    subscale_map: SubscaleMap | None = None,
) -> Session:
    """Run one adaptive session.

    The first ``routing_item_count`` items are served at ``routing_level``.
    After that the level starts from ``routing_level`` and moves by
    ``adaptation_step`` after every response (up when correct, down when
    not), clamped to the bank's range. Each served
    item is the unused bank item closest to the level, lower difficulty
    first on ties. A questionnaire follows every ``administration_every``
    items at the timestamp of the interval's last item.

    Intrinsic ratings track the interval's mean served difficulty scaled
    by ``intrinsic_bounds`` (default: the bank's range); extraneous ratings
    track a per-learner constant; germane ratings track ``gl_level``.
    Every rating gets Normal(0, noise_sd) noise before rounding onto 1..10.
    """
    if len(bank) < config.session_item_count:
        raise BankExhaustedError(
            f"bank has {len(bank)} items but the session needs {config.session_item_count}"
        )
    if not math.isfinite(theta):
        raise InvalidArgumentError("theta must be finite")
    subscale_map = subscale_map or SubscaleMap.default()
    rng = _rng(seed, _STREAM_SESSION)
    if extraneous is None:
        extraneous = float(rng.uniform(config.el_low, config.el_high))
    lo_b, hi_b = min(bank.true_b), max(bank.true_b)

    available = np.ones(len(bank), dtype=bool)
    bank_b = np.asarray(bank.true_b, dtype=float)
    level = config.routing_level
    events, levels, served = [], [], []
    for k in range(config.session_item_count):
        routing = k < config.routing_item_count
        chosen = config.routing_level if routing else level
        if not available.any():
            raise BankExhaustedError(f"bank exhausted after {k} items")
        dist = np.where(available, np.abs(bank_b - chosen), np.inf)
        # argmin returns the first minimum; the bank is sorted by b, so ties go lower
        j = int(np.argmin(dist))
        available[j] = False
        b = bank_b[j]
        correct = int(rng.random() < rasch_probability(theta, b))
        if not routing:
            move = config.adaptation_step if correct else -config.adaptation_step
            level = min(hi_b, max(lo_b, level + move))
        ts = EVENT_SPACING_S * (k + 1)
        events.append(InteractionEvent(learner_id, bank.item_ids[j], ts, correct))
        levels.append(chosen)
        served.append(float(b))

    lo_i, hi_i = intrinsic_bounds if intrinsic_bounds is not None else (lo_b, hi_b)
    every = config.administration_every
    n_admin = config.session_item_count // every
    admins, interval_means, intrinsic = [], [], []
    for a in range(n_admin):
        chunk = served[a * every:(a + 1) * every]
        mean_b = sum(chunk) / len(chunk)
        il = (mean_b - lo_i) / (hi_i - lo_i) if hi_i > lo_i else 0.5
        il = min(1.0, max(0.0, il))
        noise = rng.normal(0.0, config.noise_sd, 10) if config.noise_sd > 0 else np.zeros(10)
        target = {"intrinsic": il, "extraneous": extraneous, "germane": config.gl_level}
        ratings = tuple(_rating(target[s], float(n)) for s, n in zip(subscale_map.assignment, noise))
        admins.append(QuestionnaireAdministration(learner_id, events[(a + 1) * every - 1].timestamp, ratings))
        interval_means.append(mean_b)
        intrinsic.append(il)

    truth = SessionTruth(
        learner_id=learner_id,
        theta=float(theta),
        extraneous=extraneous,
        routing_end_ts=EVENT_SPACING_S * config.routing_item_count,
        chosen_levels=tuple(levels),
        served_b=tuple(served),
        interval_mean_b=tuple(interval_means),
        intrinsic=tuple(intrinsic),
    )
    return Session(tuple(events), tuple(admins), truth)


def simulate_study(config: SimConfig, subscale_map: SubscaleMap | None = None) -> Study:
    """Database responses for the population plus ``study_learners`` sessions.

    Intrinsic ratings are scaled by the min and max interval difficulty
    across the whole study, the same way the analysis standardizes
    difficulty, so that reported load has a known relation to the proxy.
    """
    subscale_map = subscale_map or SubscaleMap.default()
    population = sample_population(config)
    responses = simulate_responses(
        population.thetas, population.bank.true_b, config.seed,
        population.learner_ids, population.bank.item_ids,
    )
    rng = _rng(config.seed, _STREAM_STUDY)
    study_thetas = config.theta_mean + config.theta_sd * rng.standard_normal(config.study_learners)
    sw = _width(config.study_learners)
    ids = [f"S{i + 1:0{sw}d}" for i in range(config.study_learners)]

    def run(i, bounds):
        return simulate_session(
            float(study_thetas[i]), population.bank, config,
            _session_seed(config.seed, i), learner_id=ids[i],
            intrinsic_bounds=bounds, subscale_map=subscale_map,
        )

    first = [run(i, None) for i in range(config.study_learners)]
    means = [m for s in first for m in s.truth.interval_mean_b]
    bounds = (min(means), max(means)) if means else None
    sessions = tuple(run(i, bounds) for i in range(config.study_learners))
    return Study(config, population, responses, sessions, subscale_map)


def _session_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence([int(seed), _STREAM_SESSION, index])
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64).dot([1, 2**32]))


def default_items(bank: ItemBank) -> list[ItemMeta]:
    return [ItemMeta(i, INDEPENDENT) for i in bank.item_ids]


def ground_truth_dict(study: Study) -> dict:
    pop = study.population
    return {
        "theta": dict(zip(pop.learner_ids, pop.thetas)),
        "b": dict(zip(pop.bank.item_ids, pop.bank.true_b)),
        "routing_end_ts": {s.truth.learner_id: s.truth.routing_end_ts for s in study.sessions},
        "study_theta": {s.truth.learner_id: s.truth.theta for s in study.sessions},
        "study_extraneous": {s.truth.learner_id: s.truth.extraneous for s in study.sessions},
        "config": study.config.to_dict(),
        "seed": study.config.seed,
    }


def emit_fixture(study: Study, out_dir) -> dict[str, Path]:
    """Write the study in the ingest CSV schemas plus ``ground_truth.json``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror or exc}") from exc
    contents = {
        "events": serialize_events(study.database_events()),
        "session_events": serialize_events(study.session_events()),
        "items": serialize_items(default_items(study.population.bank)),
        "questionnaires": serialize_questionnaires(study.administrations()),
        "subscale_map": study.subscale_map.to_json(),
        "ground_truth": json.dumps(ground_truth_dict(study), indent=2) + "\n",
    }
    paths = {}
    for key, text in contents.items():
        path = out / FIXTURE_FILES[key]
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"{path}: {exc.strerror or exc}") from exc
        paths[key] = path
    return paths
