"""Reading interaction logs, item metadata and questionnaires.

All files are UTF-8 CSV with LF line endings. Floats are written with
``repr`` (shortest round-trip form), so parse/serialize/parse is lossless.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .errors import (
    DuplicateEventError,
    InconsistentInputError,
    InvalidArgumentError,
    ParseError,
)
from .irt import ResponseMatrix

EVENTS_HEADER = ("learner_id", "item_id", "timestamp_s", "correct")
ITEMS_HEADER = ("item_id", "kind", "passage_id", "level")
RATING_COLUMNS = tuple(f"r{k}" for k in range(1, 11))
QUESTIONNAIRE_HEADER = ("learner_id", "timestamp_s") + RATING_COLUMNS

SUBSCALES = ("intrinsic", "extraneous", "germane")
INDEPENDENT = "independent"
PASSAGE = "passage"


@dataclass(frozen=True)
class InteractionEvent:
    learner_id: str
    item_id: str
    timestamp: float
    correct: int
    line: int | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ItemMeta:
    item_id: str
    kind: str
    passage_id: str | None = None
    level: int | None = None

    def __post_init__(self):
        if self.kind not in (INDEPENDENT, PASSAGE):
            raise InvalidArgumentError(f"unknown item kind {self.kind!r}")
        if self.kind == PASSAGE and not self.passage_id:
            raise InvalidArgumentError(f"passage item {self.item_id!r} lacks passage_id")


@dataclass(frozen=True)
class QuestionnaireAdministration:
    learner_id: str
    timestamp: float
    ratings: tuple[int, ...]

    def __post_init__(self):
        if len(self.ratings) != 10:
            raise InvalidArgumentError(f"expected 10 ratings, got {len(self.ratings)}")
        if any(not 1 <= r <= 10 for r in self.ratings):
            raise InvalidArgumentError(f"ratings must lie in 1..10: {self.ratings}")


@dataclass(frozen=True)
class SubscaleScores:
    intrinsic: float
    extraneous: float
    germane: float
    overall: float


@dataclass(frozen=True)
class SubscaleMap:
    """Subscale assigned to each of the ten rating positions, in order."""

    assignment: tuple[str, ...]

    def __post_init__(self):
        if len(self.assignment) != 10:
            raise InvalidArgumentError("subscale map must cover exactly 10 positions")
        unknown = set(self.assignment) - set(SUBSCALES)
        if unknown:
            raise InvalidArgumentError(f"unknown subscales {sorted(unknown)}")
        for name in SUBSCALES:
            if name not in self.assignment:
                raise InvalidArgumentError(f"subscale {name!r} has no positions")

    @classmethod
    def default(cls) -> "SubscaleMap":
        return cls(("intrinsic",) * 3 + ("extraneous",) * 3 + ("germane",) * 4)

    @classmethod
    def from_json(cls, text: str) -> "SubscaleMap":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        if not isinstance(raw, dict) or set(raw) != set(RATING_COLUMNS):
            raise ParseError("subscale map must have exactly the keys r1..r10")
        try:
            return cls(tuple(raw[c] for c in RATING_COLUMNS))
        except InvalidArgumentError as exc:
            raise ParseError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(dict(zip(RATING_COLUMNS, self.assignment)), indent=2) + "\n"

    def positions(self, subscale: str) -> list[int]:
        return [k for k, s in enumerate(self.assignment) if s == subscale]


def _as_text(stream) -> str:
    if isinstance(stream, (bytes, bytearray)):
        data = bytes(stream)
    elif isinstance(stream, str):
        return stream
    else:
        data = stream.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8 at byte {exc.start}") from None


def read_rows(stream, header: Sequence[str]):
    """Yield ``(line_number, row_dict)`` after checking the header."""
    reader = csv.reader(io.StringIO(_as_text(stream), newline=""))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError("missing header", line=1) from None
    if tuple(first) != tuple(header):
        raise ParseError(f"expected header {','.join(header)}", line=1)
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", line=reader.line_num
            )
        yield reader.line_num, dict(zip(header, row))


def _parse_time(text, line, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line, column) from None
    if not math.isfinite(value) or value < 0:
        raise ParseError(f"timestamp must be finite and non-negative: {text!r}", line, column)
    return value


def _parse_id(text, line, column):
    if text == "":
        raise ParseError("empty identifier", line, column)
    return text


def parse_events(stream) -> list[InteractionEvent]:
    """Parse an ``events.csv`` stream (bytes, str or file object)."""
    events = []
    seen = set()
    for line, row in read_rows(stream, EVENTS_HEADER):
        learner = _parse_id(row["learner_id"], line, "learner_id")
        item = _parse_id(row["item_id"], line, "item_id")
        ts = _parse_time(row["timestamp_s"], line, "timestamp_s")
        if row["correct"] not in ("0", "1"):
            raise ParseError(f"correct must be 0 or 1, got {row['correct']!r}", line, "correct")
        key = (learner, item, ts)
        if key in seen:
            raise DuplicateEventError(
                f"duplicate event for learner {learner!r}, item {item!r} at {ts!r}", line
            )
        seen.add(key)
        events.append(InteractionEvent(learner, item, ts, int(row["correct"]), line))
    return events


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def format_float(value: float) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(value))


def serialize_events(events: Iterable[InteractionEvent]) -> str:
    return write_csv(
        EVENTS_HEADER,
        ((e.learner_id, e.item_id, format_float(e.timestamp), e.correct) for e in events),
    )


def parse_items(stream) -> list[ItemMeta]:
    items = []
    seen = set()
    for line, row in read_rows(stream, ITEMS_HEADER):
        item_id = _parse_id(row["item_id"], line, "item_id")
        if item_id in seen:
            raise ParseError(f"duplicate item {item_id!r}", line, "item_id")
        seen.add(item_id)
        kind = row["kind"]
        if kind not in (INDEPENDENT, PASSAGE):
            raise ParseError(f"unknown kind {kind!r}", line, "kind")
        passage = row["passage_id"] or None
        if kind == PASSAGE and passage is None:
            raise ParseError("passage item needs passage_id", line, "passage_id")
        if kind == INDEPENDENT and passage is not None:
            raise ParseError("independent item must not have passage_id", line, "passage_id")
        level = None
        if row["level"] != "":
            try:
                level = int(row["level"])
            except ValueError:
                raise ParseError(f"level must be an integer: {row['level']!r}", line, "level") from None
        items.append(ItemMeta(item_id, kind, passage, level))
    return items


def serialize_items(items: Iterable[ItemMeta]) -> str:
    return write_csv(
        ITEMS_HEADER,
        (
            (m.item_id, m.kind, m.passage_id or "", "" if m.level is None else m.level)
            for m in items
        ),
    )


def parse_questionnaires(stream) -> list[QuestionnaireAdministration]:
    out = []
    for line, row in read_rows(stream, QUESTIONNAIRE_HEADER):
        learner = _parse_id(row["learner_id"], line, "learner_id")
        ts = _parse_time(row["timestamp_s"], line, "timestamp_s")
        ratings = []
        for col in RATING_COLUMNS:
            text = row[col]
            if not text.isdigit() or not 1 <= int(text) <= 10:
                raise ParseError(f"rating must be an integer 1-10, got {text!r}", line, col)
            ratings.append(int(text))
        out.append(QuestionnaireAdministration(learner, ts, tuple(ratings)))
    return out


def serialize_questionnaires(admins: Iterable[QuestionnaireAdministration]) -> str:
    return write_csv(
        QUESTIONNAIRE_HEADER,
        ((a.learner_id, format_float(a.timestamp), *a.ratings) for a in admins),
    )


def first_attempts(events: Sequence[InteractionEvent]) -> list[InteractionEvent]:
    """Keep each learner's earliest attempt at each item, preserving order."""
    earliest: dict[tuple[str, str], int] = {}
    for k, e in enumerate(events):
        key = (e.learner_id, e.item_id)
        best = earliest.get(key)
        if best is None or e.timestamp < events[best].timestamp:
            earliest[key] = k
    keep = sorted(earliest.values())
    return [events[k] for k in keep]


def filter_min_responses(
    events: Sequence[InteractionEvent], threshold: int = 100
) -> tuple[list[InteractionEvent], int, int]:
    """Drop items answered by fewer than ``threshold`` distinct learners.

    Returns the surviving events and the removed and kept item counts.
    """
    if not isinstance(threshold, int) or threshold < 1:
        raise InvalidArgumentError(f"threshold must be a positive integer, got {threshold!r}")
    learners_per_item: dict[str, set[str]] = {}
    for e in events:
        learners_per_item.setdefault(e.item_id, set()).add(e.learner_id)
    kept_items = {i for i, ls in learners_per_item.items() if len(ls) >= threshold}
    kept = [e for e in events if e.item_id in kept_items]
    return kept, len(learners_per_item) - len(kept_items), len(kept_items)


def build_response_matrix(events: Iterable[InteractionEvent]) -> ResponseMatrix:
    triples = []
    seen = set()
    for e in events:
        key = (e.learner_id, e.item_id)
        if key in seen:
            raise InconsistentInputError(
                f"learner {e.learner_id!r} has more than one response to item {e.item_id!r}; "
                "apply first_attempts first"
            )
        seen.add(key)
        triples.append((e.learner_id, e.item_id, e.correct))
    return ResponseMatrix.from_triples(triples)


def score_questionnaire(
    admin: QuestionnaireAdministration, subscale_map: SubscaleMap
) -> SubscaleScores:
    """Mean of each subscale's ratings after mapping 1..10 onto [0, 1]."""
    if len(admin.ratings) != len(subscale_map.assignment):
        raise InconsistentInputError(
            f"{len(admin.ratings)} ratings but the map covers {len(subscale_map.assignment)}"
        )
    unit = [(r - 1) / 9 for r in admin.ratings]
    means = {}
    for name in SUBSCALES:
        vals = [unit[k] for k in subscale_map.positions(name)]
        means[name] = math.fsum(vals) / len(vals)
    return SubscaleScores(
        intrinsic=means["intrinsic"],
        extraneous=means["extraneous"],
        germane=means["germane"],
        overall=math.fsum(unit) / len(unit),
    )


def response_counts(events: Iterable[InteractionEvent]) -> Counter:
    """Distinct-learner response count per item."""
    return Counter(item for _, item in {(e.learner_id, e.item_id) for e in events})
