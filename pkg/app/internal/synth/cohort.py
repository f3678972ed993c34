"""
Synthetic cohorts in the raw response schema with planted PD signal.

Every item is drawn from a normal distribution truncated to [min - 0.5, max + 0.5],
then rounded and clamped to the item range. Items named by an `EffectSpec` have
their PD mean shifted; all other items are identically distributed in both classes.
"""

from pathlib import Path
from typing import Self

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator
from scipy.stats import truncnorm

from app.internal.errors import ConfigurationError
from app.internal.models import CohortLabel
from app.internal.scoring.battery import RESPONSE_COLUMNS
from app.internal.scoring.instruments import InstrumentSpec, ItemSpec, ResponseRecord
from app.util.log import logger


class EffectSpec(BaseModel, frozen=True):
    feature_name: str
    """Item whose PD responses are shifted."""
    shift: float = 2.5
    noise: float = Field(default=0.6, ge=0)
    """Standard deviation (in scale points) for this item in both classes."""


class CohortPlan(BaseModel, frozen=True):
    n_pd: int = Field(default=400, gt=0)
    n_hc: int = Field(default=100, gt=0)
    effects: list[EffectSpec] = Field(default_factory=list)
    seed: int = 42
    base_location: float = Field(default=0.25, ge=0, le=1)
    """Mean of unaffected items as a fraction of the item span above its minimum."""
    base_noise: float = Field(default=0.3, ge=0)
    """Standard deviation of unaffected items as a fraction of the item span."""
    item_missing_rates: dict[str, float] = Field(default_factory=dict)
    sporadic_missing_rate: float = Field(default=0.0, ge=0, lt=1)

    @model_validator(mode="after")
    def _check_rates(self) -> Self:
        bad = {item: rate for item, rate in self.item_missing_rates.items() if not 0 <= rate < 1}
        if bad:
            raise ValueError(f"Missing rates must lie in [0, 1): {bad}")
        names = [effect.feature_name for effect in self.effects]
        if len(set(names)) != len(names):
            raise ValueError("Each item may carry at most one effect")
        return self


def participant_ids(n: int) -> list[str]:
    return [f"SYN{i:05d}" for i in range(1, n + 1)]


def draw_item(
    item: ItemSpec, location: np.ndarray, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """Discretized truncated normal on the item's integer range."""
    if scale == 0:
        continuous = location
    else:
        low = (item.min_value - 0.5 - location) / scale
        high = (item.max_value + 0.5 - location) / scale
        continuous = truncnorm.rvs(low, high, loc=location, scale=scale, random_state=rng)
    return np.clip(np.rint(continuous), item.min_value, item.max_value).astype(np.int64)


def generate_cohort(plan: CohortPlan, schema: list[InstrumentSpec]) -> list[ResponseRecord]:
    """Records ordered by participant (PD first, then HC), then by instrument in schema order."""
    items = {item.item_id: item for spec in schema for item in spec.items}
    for name in [e.feature_name for e in plan.effects] + list(plan.item_missing_rates):
        if name not in items:
            raise ConfigurationError(f"Synthetic plan references unknown item {name}")
    effects = {effect.feature_name: effect for effect in plan.effects}

    rng = np.random.default_rng(plan.seed)
    n = plan.n_pd + plan.n_hc
    is_pd = np.arange(n) < plan.n_pd
    cohorts = np.where(is_pd, CohortLabel.PD.value, CohortLabel.HC.value)
    ids = participant_ids(n)

    columns: dict[str, list[int | None]] = {}
    for spec in schema:
        for item in spec.items:
            span = item.max_value - item.min_value
            base = item.min_value + plan.base_location * span
            effect = effects.get(item.item_id)
            if effect is None:
                values = draw_item(item, np.full(n, base), plan.base_noise * span, rng)
            else:
                location = np.where(is_pd, base + effect.shift, base)
                values = draw_item(item, location, effect.noise, rng)
            missing = rng.random(n) < plan.item_missing_rates.get(item.item_id, 0.0)
            if plan.sporadic_missing_rate > 0:
                missing |= rng.random(n) < plan.sporadic_missing_rate
            columns[item.item_id] = [None if m else int(v) for v, m in zip(values, missing)]

    records = [
        ResponseRecord(
            participant_id=ids[row],
            cohort=CohortLabel(str(cohorts[row])),
            instrument=spec.name,
            values={item.item_id: columns[item.item_id][row] for item in spec.items},
        )
        for row in range(n)
        for spec in schema
    ]
    logger.info(
        "Generated synthetic cohort",
        pd=plan.n_pd,
        hc=plan.n_hc,
        effects=sorted(effects),
        records=len(records),
        seed=plan.seed,
    )
    return records


def write_responses(records: list[ResponseRecord], path: Path):
    """Long-format CSV: one row per participant, instrument and item."""
    rows = [
        (record.participant_id, record.cohort.value, record.instrument, item_id, value)
        for record in records
        for item_id, value in record.values.items()
    ]
    frame = pd.DataFrame(rows, columns=RESPONSE_COLUMNS)
    frame["value"] = frame["value"].astype("Int64")
    frame.to_csv(path, index=False)
    logger.info("Wrote responses", path=str(path), rows=len(frame))
