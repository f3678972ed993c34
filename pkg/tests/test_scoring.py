import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from app.internal.models import CohortLabel
from app.internal.scoring.battery import (
    Battery,
    DatasetSelection,
    build_feature_matrix,
    load_battery,
    read_responses,
    score_participant,
)
from app.internal.scoring.instruments import (
    InstrumentConfigError,
    InstrumentKind,
    InstrumentSpec,
    ItemSpec,
    ItemValueError,
    ResponseRecord,
    SumAll,
)
from app.internal.scoring.score import align_direction, hvlt_composites, reverse_item, score_instrument


def record_for(spec: InstrumentSpec, value_of, participant_id: str = "P1") -> ResponseRecord:
    return ResponseRecord(
        participant_id=participant_id,
        cohort=CohortLabel.PD,
        instrument=spec.name,
        values={item.item_id: value_of(item) for item in spec.items},
    )


def complete_records(battery: Battery) -> dict[str, ResponseRecord]:
    return {spec.name: record_for(spec, lambda item: item.min_value) for spec in battery.instruments}


def test_reverse_item_examples():
    assert reverse_item(1, ItemSpec(item_id="A", min_value=1, max_value=4)) == 4
    assert reverse_item(3, ItemSpec(item_id="B", min_value=0, max_value=4)) == 1
    assert reverse_item(2, ItemSpec(item_id="C", min_value=0, max_value=4)) == 2


def test_reverse_item_rejects_out_of_range():
    with pytest.raises(ItemValueError):
        reverse_item(5, ItemSpec(item_id="A", min_value=0, max_value=4))


@given(low=st.integers(-5, 5), span=st.integers(1, 10), data=st.data())
def test_reverse_item_is_an_involution(low: int, span: int, data: st.DataObject):
    spec = ItemSpec(item_id="A", min_value=low, max_value=low + span)
    value = data.draw(st.integers(low, low + span))
    assert reverse_item(reverse_item(value, spec), spec) == value


def test_item_range_must_be_proper():
    with pytest.raises(ValidationError):
        ItemSpec(item_id="A", min_value=3, max_value=3)


def test_epworth_sum(battery: Battery):
    spec = battery["EPW"]
    assert score_instrument(spec, record_for(spec, lambda item: 0)) == {"EPW_total": 0.0}
    assert score_instrument(spec, record_for(spec, lambda item: 3)) == {"EPW_total": 24.0}


@given(data=st.data())
def test_gds_sum_matches_reversed_oracle(battery: Battery, data: st.DataObject):
    spec = battery["GDS"]
    answers = {item.item_id: data.draw(st.integers(0, 1)) for item in spec.items}
    expected = sum(1 - answers[i.item_id] if i.reverse else answers[i.item_id] for i in spec.items)
    scored = score_instrument(spec, record_for(spec, lambda item: answers[item.item_id]))
    assert scored == {"GDS_total": float(expected)}


def test_stai_groups_with_reversal(battery: Battery):
    spec = battery["STAI"]
    scored = score_instrument(spec, record_for(spec, lambda item: 1))
    state_items = [spec.item(f"STAIAD{i}") for i in range(1, 21)]
    trait_items = [spec.item(f"STAIAD{i}") for i in range(21, 41)]
    assert scored["STAI_state"] == sum(4 if item.reverse else 1 for item in state_items)
    assert scored["STAI_trait"] == sum(4 if item.reverse else 1 for item in trait_items)


def test_sum_oracles_on_random_records(battery: Battery):
    rng = np.random.default_rng(1000)
    epw, gds, stai = battery["EPW"], battery["GDS"], battery["STAI"]
    for i in range(1000):
        draws = {
            spec.name: {item.item_id: int(rng.integers(item.min_value, item.max_value + 1)) for item in spec.items}
            for spec in (epw, gds, stai)
        }
        pid = f"P{i}"
        scored = score_instrument(epw, record_for(epw, lambda item: draws["EPW"][item.item_id], pid))
        assert scored["EPW_total"] == sum(draws["EPW"].values())
        scored = score_instrument(gds, record_for(gds, lambda item: draws["GDS"][item.item_id], pid))
        assert scored["GDS_total"] == sum(
            reverse_item(draws["GDS"][item.item_id], item) if item.reverse else draws["GDS"][item.item_id]
            for item in gds.items
        )
        for item in stai.items:
            value = draws["STAI"][item.item_id]
            assert reverse_item(reverse_item(value, item), item) == value


def test_rem_drops_parkinsonism_item(battery: Battery):
    spec = battery["REM"]
    scored = score_instrument(spec, record_for(spec, lambda item: 1))
    assert "PARKISM" not in scored
    assert len(scored) == 20


@pytest.mark.parametrize(
    ("scores", "expected"),
    [
        ([12, 12, 12, 12, 12, 0, 0], (36.0, 12.0, 100.0, 12.0)),
        ([8, 10, 9, 7, 11, 2, 0], (27.0, 7.0, 70.0, 9.0)),
        ([0, 0, 0, 0, 0, 0, 0], (0.0, 0.0, 0.0, 0.0)),
    ],
)
def test_hvlt_composites(scores: list[int], expected: tuple[float, ...]):
    assert hvlt_composites(scores) == pytest.approx(expected)


def test_hvlt_rejects_out_of_range():
    with pytest.raises(ItemValueError):
        hvlt_composites([13, 0, 0, 0, 0, 0, 0])
    with pytest.raises(ItemValueError):
        hvlt_composites([1, 2, 3])


def test_feature_counts(battery: Battery):
    assert len(battery.feature_names(DatasetSelection.subjective.kinds())) == 79
    assert len(battery.feature_names(DatasetSelection.objective.kinds())) == 67
    assert len(battery.feature_names(DatasetSelection.combined.kinds())) == 146


def test_complete_participant_has_no_missing_features(battery: Battery):
    features = score_participant(battery, complete_records(battery), DatasetSelection.combined.kinds())
    assert len(features) == 146
    assert all(value is not None for value in features.values())


def test_missing_answer_propagates_to_sum(battery: Battery):
    spec = battery["EPW"]
    first = spec.items[0].item_id
    record = record_for(spec, lambda item: None if item.item_id == first else 1)
    assert score_instrument(spec, record) == {"EPW_total": None}


def test_absent_instrument_yields_missing_features(battery: Battery):
    records = complete_records(battery)
    del records["HVLT"]
    features = score_participant(battery, records, {InstrumentKind.objective})
    assert features["HVLT_total_recall"] is None
    assert features["SDMTOTAL"] is not None


def test_moca_best_score_aligns_to_zero(battery: Battery):
    spec = battery["MOCA"]
    best = align_direction(score_instrument(spec, record_for(spec, lambda item: item.max_value)), spec)
    assert all(value == 0.0 for value in best.values())


def test_sdmt_zero_aligns_to_maximum(battery: Battery):
    spec = battery["SDMT"]
    aligned = align_direction(score_instrument(spec, record_for(spec, lambda item: 0)), spec)
    assert aligned == {"SDMTOTAL": 110.0}


def test_updrs_part_three_is_not_flipped(battery: Battery):
    spec = battery["MDS-UPDRS III"]
    scored = score_instrument(spec, record_for(spec, lambda item: 2))
    assert align_direction(scored, spec) == scored


def test_flip_reverses_rank_order(battery: Battery):
    spec = battery["BJLO"]
    low = align_direction(score_instrument(spec, record_for(spec, lambda item: 0)), spec)
    high = align_direction(score_instrument(spec, record_for(spec, lambda item: 1)), spec)
    assert low["BJLO_total"] > high["BJLO_total"]


def test_hvlt_best_performance_aligns_to_floor(battery: Battery):
    spec = battery["HVLT"]
    best = {"HVLTRT1": 12, "HVLTRT2": 12, "HVLTRT3": 12, "HVLTRDLY": 12, "HVLTREC": 12, "HVLTFPRL": 0}
    record = record_for(spec, lambda item: best.get(item.item_id, 0))
    aligned = align_direction(score_instrument(spec, record), spec)
    assert aligned == {
        "HVLT_total_recall": 0.0,
        "HVLT_delayed_recall": 0.0,
        "HVLT_retention": 0.0,
        "HVLT_discrimination": -12.0,
    }


def test_rule_referencing_unknown_item_is_rejected():
    with pytest.raises(ValidationError):
        InstrumentSpec.model_validate(
            {
                "name": "X",
                "kind": "Objective",
                "items": [{"item_id": "A", "min_value": 0, "max_value": 1}],
                "rule": {"variant": "SingleScore", "item": "B"},
            }
        )


def test_subjective_instruments_are_never_flipped():
    with pytest.raises(ValidationError):
        InstrumentSpec.model_validate(
            {
                "name": "X",
                "kind": "Subjective",
                "flip_for_alignment": True,
                "items": [{"item_id": "A", "min_value": 0, "max_value": 1}],
                "rule": {"variant": "SumAll"},
            }
        )


def test_duplicate_feature_names_are_rejected(battery: Battery):
    with pytest.raises(InstrumentConfigError):
        clash = battery["EPW"].model_copy(update={"name": "EPW2", "rule": SumAll(feature="EPW_total")})
        Battery([battery["EPW"], clash])


def test_load_battery_errors(tmp_path: Path):
    with pytest.raises(InstrumentConfigError):
        load_battery(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps([{"name": "X"}]))
    with pytest.raises(InstrumentConfigError):
        load_battery(broken)


def test_build_feature_matrix_from_csv(tmp_path: Path, battery: Battery):
    epw_items = [item.item_id for item in battery["EPW"].items]
    rows = [("A", "PD", "EPW", item, 1) for item in epw_items]
    rows += [("B", "HC", "EPW", item, None if item == epw_items[0] else 2) for item in epw_items]
    path = tmp_path / "responses.csv"
    pd.DataFrame(rows, columns=["participant_id", "cohort", "instrument", "item_id", "value"]).to_csv(
        path, index=False
    )

    matrix = build_feature_matrix(battery, read_responses(path), DatasetSelection.subjective)
    assert matrix.participant_ids == ("A", "B")
    assert matrix.labels == (CohortLabel.PD, CohortLabel.HC)
    epw = matrix.feature_names.index("EPW_total")
    assert matrix.values[0, epw] == 8.0
    assert np.isnan(matrix.values[1, epw])
    gds = matrix.feature_names.index("GDS_total")
    assert np.isnan(matrix.values[:, gds]).all()


def test_participant_in_two_cohorts_is_rejected(battery: Battery):
    epw = record_for(battery["EPW"], lambda item: 0)
    gds = record_for(battery["GDS"], lambda item: 0).model_copy(update={"cohort": CohortLabel.HC})
    with pytest.raises(InstrumentConfigError):
        build_feature_matrix(battery, [epw, gds], DatasetSelection.subjective)
