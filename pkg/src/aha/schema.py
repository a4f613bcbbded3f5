"""Domain model: attribute/metric schemas, sessions, epochs, cohort patterns.

Attributes take discrete values only. Each attribute owns a dictionary that
maps values to dense integer codes (0..cardinality-1) in first-seen order;
dictionaries are append-only and codes are never recycled. A cohort pattern
fixes some attributes to concrete codes and leaves the rest as wildcards;
a pattern with no wildcards is a leaf pattern.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, PatternError, SchemaError, UnknownValueError

#: Selector code meaning "this attribute may take any value".
WILDCARD = -1

#: Largest M for which a full 2^M grouping-set enumeration is allowed.
DEFAULT_MAX_CUBE_ATTRIBUTES = 20

MANIFEST_VERSION = 1


class Dictionary:
    """Append-only value <-> code mapping for one attribute."""

    __slots__ = ("_values", "_codes")

    def __init__(self, values: Iterable[str] = ()):
        self._values: list[str] = []
        self._codes: dict[str, int] = {}
        for v in values:
            self.add(v)

    def add(self, value: str) -> int:
        """Return the code for ``value``, assigning the next code if new."""
        code = self._codes.get(value)
        if code is None:
            code = len(self._values)
            self._codes[value] = code
            self._values.append(value)
        return code

    def encode(self, value: str) -> int:
        try:
            return self._codes[value]
        except KeyError:
            raise UnknownValueError(f"value {value!r} not in dictionary") from None

    def decode(self, code: int) -> str:
        if 0 <= code < len(self._values):
            return self._values[code]
        raise UnknownValueError(f"code {code} out of range (cardinality {len(self._values)})")

    def __contains__(self, value: str) -> bool:
        return value in self._codes

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Dictionary) and self._values == other._values

    def __repr__(self) -> str:
        return f"Dictionary({self._values!r})"


class AttributeSchema:
    """Ordered attribute dimensions, each with a non-empty value dictionary."""

    def __init__(self, attributes: Sequence[tuple[str, Iterable[str]]]):
        names = [name for name, _ in attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate attribute names in {names}")
        self.names: tuple[str, ...] = tuple(names)
        self.dictionaries: tuple[Dictionary, ...] = tuple(
            Dictionary(values) for _, values in attributes
        )
        for name, d in zip(self.names, self.dictionaries):
            if len(d) == 0:
                raise SchemaError(f"attribute {name!r} has an empty dictionary")
        self._index = {name: i for i, name in enumerate(self.names)}

    @property
    def attribute_count(self) -> int:
        return len(self.names)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.dictionaries)

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise PatternError(f"unknown attribute {name!r}") from None

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, AttributeSchema)
            and self.names == other.names
            and self.dictionaries == other.dictionaries
        )

    def __repr__(self) -> str:
        return f"AttributeSchema({list(zip(self.names, self.cardinalities))!r})"


@dataclass(frozen=True)
class MetricSchema:
    """Ordered metric names; K >= 1."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise SchemaError("at least one metric is required")
        if len(set(self.names)) != len(self.names):
            raise SchemaError(f"duplicate metric names in {self.names}")

    @property
    def metric_count(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown metric {name!r}") from None


class DatasetSchema:
    """An attribute schema plus a metric schema; the unit of manifest I/O."""

    def __init__(self, attributes: AttributeSchema, metrics: MetricSchema):
        self.attributes = attributes
        self.metrics = metrics

    @property
    def attribute_count(self) -> int:
        return self.attributes.attribute_count

    @property
    def metric_count(self) -> int:
        return self.metrics.metric_count

    def to_manifest(self) -> dict:
        return {
            "attributes": [
                {"name": name, "values": list(d)}
                for name, d in zip(self.attributes.names, self.attributes.dictionaries)
            ],
            "metrics": list(self.metrics.names),
            "version": MANIFEST_VERSION,
        }

    @classmethod
    def from_manifest(cls, doc: dict) -> "DatasetSchema":
        try:
            attrs = [(a["name"], a["values"]) for a in doc["attributes"]]
            metrics = tuple(doc["metrics"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema manifest: {exc}") from exc
        return cls(AttributeSchema(attrs), MetricSchema(metrics))

    def to_json(self) -> str:
        return json.dumps(self.to_manifest(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DatasetSchema":
        return cls.from_manifest(json.loads(text))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DatasetSchema)
            and self.attributes == other.attributes
            and self.metrics == other.metrics
        )

    def __repr__(self) -> str:
        return f"DatasetSchema({self.attributes!r}, {self.metrics!r})"


@dataclass(frozen=True, order=True)
class EpochId:
    """One ingestion time-step: a non-negative ordinal plus optional wall clock."""

    index: int
    wall_clock_start: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.index < 0:
            raise SchemaError(f"epoch index must be non-negative, got {self.index}")

    def __int__(self) -> int:
        return self.index


@dataclass(frozen=True)
class SessionRecord:
    """One session: M attribute codes and K finite metric values."""

    attribute_codes: tuple[int, ...]
    metric_values: tuple[float, ...]


@dataclass(frozen=True)
class SessionBatch:
    """All sessions observed in one epoch."""

    epoch: EpochId
    sessions: tuple[SessionRecord, ...]

    def __len__(self) -> int:
        return len(self.sessions)


@dataclass(frozen=True)
class CohortPattern:
    """A sequence of M selectors; each is a value code or WILDCARD."""

    selectors: tuple[int, ...]

    @property
    def is_leaf(self) -> bool:
        return WILDCARD not in self.selectors

    def __len__(self) -> int:
        return len(self.selectors)

    @classmethod
    def all_wildcards(cls, m: int) -> "CohortPattern":
        return cls((WILDCARD,) * m)

    @classmethod
    def parse(cls, text: str, schema: AttributeSchema) -> "CohortPattern":
        """Parse ``attr=value`` pairs separated by commas.

        Omitted attributes are wildcards; an explicit ``attr=*`` is also a
        wildcard. Unknown attribute names raise PatternError, unknown values
        raise UnknownValueError (schema drift is surfaced, never silently
        treated as an empty cohort).
        """
        selectors = [WILDCARD] * schema.attribute_count
        text = text.strip()
        if text in ("", "*"):
            return cls(tuple(selectors))
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise PatternError(f"bad selector {part!r}, expected attr=value")
            name, _, value = part.partition("=")
            i = schema.index_of(name.strip())
            value = value.strip()
            if value == "*":
                selectors[i] = WILDCARD
            else:
                selectors[i] = schema.dictionaries[i].encode(value)
        return cls(tuple(selectors))

    def render(self, schema: AttributeSchema) -> str:
        """Canonical string form, one ``attr=value`` pair per attribute."""
        parts = []
        for i, sel in enumerate(self.selectors):
            value = "*" if sel == WILDCARD else schema.dictionaries[i].decode(sel)
            parts.append(f"{schema.names[i]}={value}")
        return ",".join(parts)

    def validate(self, schema: AttributeSchema) -> None:
        if len(self.selectors) != schema.attribute_count:
            raise SchemaError(
                f"pattern has {len(self.selectors)} selectors, schema has "
                f"{schema.attribute_count} attributes"
            )
        for i, sel in enumerate(self.selectors):
            if sel == WILDCARD:
                continue
            if not 0 <= sel < len(schema.dictionaries[i]):
                raise UnknownValueError(
                    f"attribute {schema.names[i]!r}: code {sel} out of range"
                )


def pattern_matches(pattern: CohortPattern, leaf: Sequence[int]) -> bool:
    """True iff every concrete selector equals the leaf code at its position.

    Wildcards match anything. ``leaf`` is a fully-specified attribute tuple.
    """
    sels = pattern.selectors
    if len(sels) != len(leaf):
        raise SchemaError(
            f"pattern length {len(sels)} does not match leaf length {len(leaf)}"
        )
    for s, code in zip(sels, leaf):
        if s != WILDCARD and s != code:
            return False
    return True


def possible_cohort_count(schema: AttributeSchema) -> int:
    """Number of addressable cohorts: prod(cardinality_i + 1) - 1.

    The product counts every selector combination (each attribute is either
    one of its values or a wildcard) and subtracts one. The all-wildcard
    grand total remains queryable even though this count excludes one
    combination; Python integers do not overflow, so the result is exact for
    any schema.
    """
    return math.prod(c + 1 for c in schema.cardinalities) - 1


def possible_leaf_count(schema: AttributeSchema) -> int:
    """Number of fully-specified attribute tuples: prod(cardinality_i)."""
    return math.prod(schema.cardinalities)


def leaf_fraction(leaf_count: int, schema: AttributeSchema) -> float:
    """leaf_count over the possible leaf count, safe for huge cardinality products."""
    possible = possible_leaf_count(schema)
    if leaf_count < 0 or leaf_count > possible:
        raise SchemaError(f"leaf_count {leaf_count} outside [0, {possible}]")
    # Fraction -> float underflows gracefully instead of overflowing.
    return float(Fraction(leaf_count, possible))


def enumerate_grouping_sets(
    schema_or_m: AttributeSchema | int,
    max_attributes: int = DEFAULT_MAX_CUBE_ATTRIBUTES,
) -> list[tuple[int, ...]]:
    """All 2^M subsets of attribute indices {0..M-1}, subsets before supersets.

    Ordered by (size, lexicographic), so every subset appears before any of
    its supersets; a roll-up that processes the list in reverse sees each
    set only after all of its supersets.
    """
    m = (
        schema_or_m
        if isinstance(schema_or_m, int)
        else schema_or_m.attribute_count
    )
    if m > max_attributes:
        raise CapacityError(
            f"{m} attributes would enumerate 2^{m} grouping sets; "
            f"limit is {max_attributes}. Use explicit grouping sets instead."
        )
    out: list[tuple[int, ...]] = []
    for size in range(m + 1):
        out.extend(itertools.combinations(range(m), size))
    return out
