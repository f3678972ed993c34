"""
Declarative description of the survey and assessment instruments.

Instruments are loaded from `app/config/instruments.json`, one document per test.
"""

from enum import Enum
from typing import Annotated, Literal, Self

from pydantic import BaseModel, Field, model_validator

from app.internal.errors import ScopeError
from app.internal.models import CohortLabel


class InstrumentConfigError(ScopeError):
    pass


class ItemValueError(ScopeError):
    pass


class InstrumentKind(str, Enum):
    subjective = "Subjective"
    objective = "Objective"


class ItemSpec(BaseModel, frozen=True):
    item_id: str
    min_value: int
    max_value: int
    reverse: bool = False

    @model_validator(mode="after")
    def _check_range(self) -> Self:
        if self.min_value >= self.max_value:
            raise ValueError(
                f"Item {self.item_id}: min_value {self.min_value} must be below max_value {self.max_value}"
            )
        return self


class SumAll(BaseModel, frozen=True):
    variant: Literal["SumAll"] = "SumAll"
    feature: str | None = None
    """Output feature name. Defaults to `<instrument>_total`."""


class PassThrough(BaseModel, frozen=True):
    variant: Literal["PassThrough"] = "PassThrough"


class SumGroups(BaseModel, frozen=True):
    variant: Literal["SumGroups"] = "SumGroups"
    groups: dict[str, list[str]]
    """Feature name -> item ids summed into it. Groups must be disjoint."""


class HvltMapping(BaseModel, frozen=True):
    trial1: str
    trial2: str
    trial3: str
    delayed_recall: str
    recognition_true_pos: str
    recognition_false_pos: str

    def item_ids(self) -> list[str]:
        return [
            self.trial1,
            self.trial2,
            self.trial3,
            self.delayed_recall,
            self.recognition_true_pos,
            self.recognition_false_pos,
        ]


class HvltComposites(BaseModel, frozen=True):
    variant: Literal["HvltComposites"] = "HvltComposites"
    mapping: HvltMapping
    prefix: str = "HVLT"


class DropThenPassThrough(BaseModel, frozen=True):
    variant: Literal["DropThenPassThrough"] = "DropThenPassThrough"
    dropped: list[str]


class SingleScore(BaseModel, frozen=True):
    variant: Literal["SingleScore"] = "SingleScore"
    item: str | None = None
    """Item carrying the score. May be omitted when the instrument has a single item."""


ScoringRule = Annotated[
    SumAll | PassThrough | SumGroups | HvltComposites | DropThenPassThrough | SingleScore,
    Field(discriminator="variant"),
]


def rule_item_ids(rule: ScoringRule) -> list[str]:
    """Items explicitly referenced by a rule (pass-through rules reference none)."""
    match rule:
        case SumGroups():
            return [item for items in rule.groups.values() for item in items]
        case HvltComposites():
            return rule.mapping.item_ids()
        case DropThenPassThrough():
            return list(rule.dropped)
        case SingleScore():
            return [rule.item] if rule.item else []
        case SumAll() | PassThrough():
            return []


class InstrumentSpec(BaseModel, frozen=True):
    name: str
    kind: InstrumentKind
    items: list[ItemSpec]
    rule: ScoringRule
    flip_for_alignment: bool = False

    @model_validator(mode="after")
    def _check_references(self) -> Self:
        ids = [item.item_id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Instrument {self.name}: item ids must be unique")
        unknown = [item for item in rule_item_ids(self.rule) if item not in ids]
        if unknown:
            raise ValueError(
                f"Instrument {self.name}: rule references unknown items {unknown}"
            )
        if isinstance(self.rule, SumGroups):
            grouped = [item for items in self.rule.groups.values() for item in items]
            if len(set(grouped)) != len(grouped):
                raise ValueError(f"Instrument {self.name}: groups must be disjoint")
        if isinstance(self.rule, SingleScore) and self.rule.item is None and len(ids) != 1:
            raise ValueError(
                f"Instrument {self.name}: SingleScore without an item needs exactly one item"
            )
        if self.kind == InstrumentKind.subjective and self.flip_for_alignment:
            raise ValueError(
                f"Instrument {self.name}: subjective instruments are never flipped"
            )
        return self

    def item(self, item_id: str) -> ItemSpec:
        for item in self.items:
            if item.item_id == item_id:
                return item
        raise InstrumentConfigError(
            f"Instrument {self.name} has no item {item_id}"
        )


class ResponseRecord(BaseModel, frozen=True):
    """One participant's raw answers to one instrument. `None` marks a missing answer."""

    participant_id: str
    cohort: CohortLabel
    instrument: str
    values: dict[str, int | None]
