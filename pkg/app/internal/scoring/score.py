from collections.abc import Mapping

from app.internal.scoring.instruments import (
    DropThenPassThrough,
    HvltComposites,
    InstrumentConfigError,
    InstrumentSpec,
    ItemSpec,
    ItemValueError,
    PassThrough,
    ResponseRecord,
    SingleScore,
    SumAll,
    SumGroups,
)

HVLT_SCORE_MAX = 12

type FeatureValues = dict[str, float | None]


def check_item_value(value: int, spec: ItemSpec) -> int:
    if not spec.min_value <= value <= spec.max_value:
        raise ItemValueError(
            f"Item {spec.item_id}: value {value} outside [{spec.min_value}, {spec.max_value}]"
        )
    return value


def reverse_item(value: int, spec: ItemSpec) -> int:
    """Reflect a value on the item's scale: min + max - value."""
    check_item_value(value, spec)
    return spec.min_value + spec.max_value - value


def _oriented(value: int, spec: ItemSpec) -> int:
    if spec.reverse:
        return reverse_item(value, spec)
    return check_item_value(value, spec)


def _sum_items(spec: InstrumentSpec, record: ResponseRecord, item_ids: list[str]) -> float | None:
    total = 0
    for item_id in item_ids:
        value = record.values.get(item_id)
        if value is None:
            return None
        total += _oriented(value, spec.item(item_id))
    return float(total)


def _pass_items(spec: InstrumentSpec, record: ResponseRecord, item_ids: list[str]) -> FeatureValues:
    features: FeatureValues = {}
    for item_id in item_ids:
        value = record.values.get(item_id)
        features[item_id] = (
            None if value is None else float(_oriented(value, spec.item(item_id)))
        )
    return features


def hvlt_composites(seven_scores: list[int]) -> tuple[float, float, float, float]:
    """
    Summarise the seven HVLT scores, ordered
    (trial1, trial2, trial3, delayed_recall, recognition_true_pos, recognition_false_pos, unused),
    into total recall, delayed recall, retention percent and recognition discrimination.
    """
    if len(seven_scores) != 7:
        raise ItemValueError(f"HVLT needs 7 scores, got {len(seven_scores)}")
    for position, score in enumerate(seven_scores):
        if not 0 <= score <= HVLT_SCORE_MAX:
            raise ItemValueError(
                f"HVLT score #{position + 1}: value {score} outside [0, {HVLT_SCORE_MAX}]"
            )
    trial1, trial2, trial3, delayed, true_pos, false_pos, _ = seven_scores
    denominator = max(trial2, trial3)
    retention = 100.0 * delayed / denominator if denominator > 0 else 0.0
    return (
        float(trial1 + trial2 + trial3),
        float(delayed),
        retention,
        float(true_pos - false_pos),
    )


def hvlt_feature_names(rule: HvltComposites) -> list[str]:
    return [
        f"{rule.prefix}_total_recall",
        f"{rule.prefix}_delayed_recall",
        f"{rule.prefix}_retention",
        f"{rule.prefix}_discrimination",
    ]


def _sum_feature_name(spec: InstrumentSpec, rule: SumAll) -> str:
    return rule.feature or f"{spec.name}_total"


def _single_item(spec: InstrumentSpec, rule: SingleScore) -> str:
    return rule.item or spec.items[0].item_id


def score_instrument(spec: InstrumentSpec, record: ResponseRecord) -> FeatureValues:
    """Convert one instrument's raw answers into its engineered features."""
    if record.instrument != spec.name:
        raise InstrumentConfigError(
            f"Record for {record.instrument} scored with instrument {spec.name}"
        )
    all_items = [item.item_id for item in spec.items]
    match spec.rule:
        case SumAll():
            return {_sum_feature_name(spec, spec.rule): _sum_items(spec, record, all_items)}
        case PassThrough():
            return _pass_items(spec, record, all_items)
        case SumGroups():
            return {
                name: _sum_items(spec, record, items)
                for name, items in spec.rule.groups.items()
            }
        case DropThenPassThrough():
            kept = [item for item in all_items if item not in spec.rule.dropped]
            return _pass_items(spec, record, kept)
        case SingleScore():
            return _pass_items(spec, record, [_single_item(spec, spec.rule)])
        case HvltComposites():
            names = hvlt_feature_names(spec.rule)
            raw = [record.values.get(item) for item in spec.rule.mapping.item_ids()]
            if any(value is None for value in raw):
                return dict.fromkeys(names)
            scores = [value for value in raw if value is not None]
            return dict(zip(names, hvlt_composites([*scores, 0])))


def feature_bounds(spec: InstrumentSpec) -> dict[str, tuple[float, float]]:
    """Theoretical (min, max) of every feature the instrument produces."""

    def span(item_ids: list[str]) -> tuple[float, float]:
        items = [spec.item(item_id) for item_id in item_ids]
        return (
            float(sum(item.min_value for item in items)),
            float(sum(item.max_value for item in items)),
        )

    all_items = [item.item_id for item in spec.items]
    match spec.rule:
        case SumAll():
            return {_sum_feature_name(spec, spec.rule): span(all_items)}
        case PassThrough():
            return {item: span([item]) for item in all_items}
        case SumGroups():
            return {name: span(items) for name, items in spec.rule.groups.items()}
        case DropThenPassThrough():
            return {
                item: span([item]) for item in all_items if item not in spec.rule.dropped
            }
        case SingleScore():
            item = _single_item(spec, spec.rule)
            return {item: span([item])}
        case HvltComposites():
            bounds = [
                (0.0, 3.0 * HVLT_SCORE_MAX),
                (0.0, float(HVLT_SCORE_MAX)),
                (0.0, 100.0),
                (-float(HVLT_SCORE_MAX), float(HVLT_SCORE_MAX)),
            ]
            return dict(zip(hvlt_feature_names(spec.rule), bounds))


def align_direction(features: Mapping[str, float | None], spec: InstrumentSpec) -> FeatureValues:
    """Flip features so a higher value always means a worse condition."""
    if not spec.flip_for_alignment:
        return dict(features)
    bounds = feature_bounds(spec)
    aligned: FeatureValues = {}
    for name, value in features.items():
        if value is None:
            aligned[name] = None
            continue
        low, high = bounds[name]
        aligned[name] = low + high - value
    return aligned
