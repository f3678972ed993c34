from collections.abc import Iterable
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import final

import numpy as np
import pandas as pd
from pydantic import TypeAdapter, ValidationError

from app.internal.models import CohortLabel, FeatureMatrix
from app.internal.scoring.instruments import (
    InstrumentConfigError,
    InstrumentKind,
    InstrumentSpec,
    ResponseRecord,
)
from app.internal.scoring.score import align_direction, feature_bounds, score_instrument
from app.util.log import logger

RESPONSE_COLUMNS = ["participant_id", "cohort", "instrument", "item_id", "value"]


class DatasetSelection(str, Enum):
    subjective = "subjective"
    objective = "objective"
    combined = "combined"

    def kinds(self) -> set[InstrumentKind]:
        match self:
            case DatasetSelection.subjective:
                return {InstrumentKind.subjective}
            case DatasetSelection.objective:
                return {InstrumentKind.objective}
            case DatasetSelection.combined:
                return {InstrumentKind.subjective, InstrumentKind.objective}


def default_instruments_path() -> Path:
    return Path(str(resources.files("app") / "config" / "instruments.json"))


@final
class Battery:
    """An ordered, validated collection of instruments."""

    def __init__(self, instruments: list[InstrumentSpec]):
        names = [spec.name for spec in instruments]
        if len(set(names)) != len(names):
            raise InstrumentConfigError("Instrument names must be unique")
        features = [f for spec in instruments for f in feature_bounds(spec)]
        duplicated = {f for f in features if features.count(f) > 1}
        if duplicated:
            raise InstrumentConfigError(
                f"Feature names produced by more than one instrument: {sorted(duplicated)}"
            )
        self.instruments = instruments
        self._by_name = {spec.name: spec for spec in instruments}

    def __getitem__(self, name: str) -> InstrumentSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise InstrumentConfigError(f"Unknown instrument {name}")

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def of_kind(self, kinds: set[InstrumentKind]) -> list[InstrumentSpec]:
        return [spec for spec in self.instruments if spec.kind in kinds]

    def feature_names(self, kinds: set[InstrumentKind]) -> list[str]:
        return [f for spec in self.of_kind(kinds) for f in feature_bounds(spec)]

    def item_ids(self) -> set[str]:
        return {item.item_id for spec in self.instruments for item in spec.items}


_instrument_list = TypeAdapter(list[InstrumentSpec])


def load_battery(path: Path | None = None) -> Battery:
    path = path or default_instruments_path()
    if not path.exists():
        raise InstrumentConfigError(f"Instrument config {path} does not exist")
    try:
        instruments = _instrument_list.validate_json(path.read_bytes())
    except ValidationError as e:
        raise InstrumentConfigError(f"Invalid instrument config {path}: {e}")
    battery = Battery(instruments)
    logger.debug("Loaded instrument battery", path=str(path), instruments=len(instruments))
    return battery


def score_participant(
    battery: Battery,
    records: dict[str, ResponseRecord],
    kinds: set[InstrumentKind],
) -> dict[str, float | None]:
    """Score and direction-align every instrument of the given kinds. Absent instruments yield missing features."""
    features: dict[str, float | None] = {}
    for spec in battery.of_kind(kinds):
        record = records.get(spec.name)
        if record is None:
            features.update(dict.fromkeys(feature_bounds(spec)))
            continue
        features.update(align_direction(score_instrument(spec, record), spec))
    return features


def _csv_line(index: object) -> int:
    # header is line 1
    return int(index) + 2  # pyright: ignore[reportArgumentType]


def _integer_values(path: Path, raw: pd.Series) -> pd.Series:
    numeric = pd.to_numeric(raw, errors="coerce")
    bad = (numeric.isna() & raw.notna()) | (numeric.notna() & (numeric != numeric.round()))
    if bad.any():
        index = bad.idxmax()
        raise InstrumentConfigError(
            f"Response file {path} line {_csv_line(index)}: value {raw[index]!r} is not an integer"
        )
    return numeric.astype("Int64")


def _check_cohorts(path: Path, cohorts: pd.Series) -> None:
    known = {label.value for label in CohortLabel}
    bad = ~cohorts.isin(known)
    if bad.any():
        index = bad.idxmax()
        raise InstrumentConfigError(
            f"Response file {path} line {_csv_line(index)}: cohort {cohorts[index]!r} "
            f"is not one of {sorted(known)}"
        )


def read_responses(path: Path) -> list[ResponseRecord]:
    """Read the long-format response CSV into one record per participant and instrument."""
    if not path.exists():
        raise InstrumentConfigError(f"Response file {path} does not exist")
    frame = pd.read_csv(
        path,
        dtype={"participant_id": str, "cohort": str, "instrument": str, "item_id": str, "value": str},
    )
    missing_columns = [c for c in RESPONSE_COLUMNS if c not in frame.columns]
    if missing_columns:
        raise InstrumentConfigError(
            f"Response file {path} lacks columns {missing_columns}"
        )
    frame = frame.assign(value=_integer_values(path, frame["value"]))
    _check_cohorts(path, frame["cohort"])

    records: list[ResponseRecord] = []
    for (participant_id, cohort, instrument), group in frame.groupby(
        ["participant_id", "cohort", "instrument"], sort=False
    ):
        records.append(
            ResponseRecord(
                participant_id=str(participant_id),
                cohort=CohortLabel(str(cohort)),
                instrument=str(instrument),
                values={
                    str(item): (None if pd.isna(value) else int(value))
                    for item, value in zip(group["item_id"], group["value"])
                },
            )
        )
    logger.info("Read responses", path=str(path), rows=len(frame), records=len(records))
    return records


def build_feature_matrix(
    battery: Battery,
    records: Iterable[ResponseRecord],
    selection: DatasetSelection,
) -> FeatureMatrix:
    kinds = selection.kinds()
    by_participant: dict[str, dict[str, ResponseRecord]] = {}
    cohorts: dict[str, CohortLabel] = {}
    for record in records:
        if record.instrument not in battery:
            logger.warning("Skipping unknown instrument", instrument=record.instrument)
            continue
        known = cohorts.setdefault(record.participant_id, record.cohort)
        if known != record.cohort:
            raise InstrumentConfigError(
                f"Participant {record.participant_id} listed under cohorts {known.value} and {record.cohort.value}"
            )
        by_participant.setdefault(record.participant_id, {})[record.instrument] = record

    feature_names = battery.feature_names(kinds)
    rows = np.full((len(by_participant), len(feature_names)), np.nan)
    for row, instrument_records in enumerate(by_participant.values()):
        scored = score_participant(battery, instrument_records, kinds)
        rows[row] = [np.nan if scored[f] is None else scored[f] for f in feature_names]

    ids = list(by_participant)
    matrix = FeatureMatrix(
        feature_names=tuple(feature_names),
        values=rows,
        labels=tuple(cohorts[pid] for pid in ids),
        participant_ids=tuple(ids),
    )
    logger.info(
        "Built feature matrix",
        dataset=selection.value,
        participants=matrix.n_samples,
        features=matrix.n_features,
    )
    return matrix
