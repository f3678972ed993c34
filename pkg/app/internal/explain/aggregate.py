from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, Field

from app.internal.explain.treeshap import Attribution
from app.internal.models import CohortLabel, LabelError
from app.util.log import logger


class GlobalContribution(BaseModel, frozen=True):
    feature_name: str
    mean_abs_hc: float = Field(ge=0)
    mean_abs_pd: float = Field(ge=0)

    @property
    def total(self) -> float:
        return self.mean_abs_hc + self.mean_abs_pd


def global_contributions(
    attributions: Sequence[Attribution],
    labels: Sequence[CohortLabel] | None = None,
    top_k: int | None = None,
) -> list[GlobalContribution]:
    """
    Mean |phi| per feature within HC and within PD, ranked by their sum.
    `labels` defaults to the label stored on each attribution.
    """
    if not attributions:
        return []
    if labels is None:
        labels = [a.label for a in attributions]  # pyright: ignore[reportAssignmentType]
    if len(labels) != len(attributions):
        raise ValueError(f"{len(attributions)} attributions but {len(labels)} labels")
    for attribution, label in zip(attributions, labels):
        if label not in (CohortLabel.HC, CohortLabel.PD):
            raise LabelError(
                f"Attribution for {attribution.participant_id} has label {label}; expected HC or PD"
            )

    names = list(attributions[0].phi)
    magnitudes = np.abs(np.array([[a.phi[name] for name in names] for a in attributions]))
    label_array = np.array([label.value for label in labels])

    means: dict[CohortLabel, np.ndarray] = {}
    for cohort in (CohortLabel.HC, CohortLabel.PD):
        rows = magnitudes[label_array == cohort.value]
        if rows.shape[0] == 0:
            logger.warning("No attributions for cohort; reporting zero contributions", cohort=cohort.value)
            means[cohort] = np.zeros(len(names))
        else:
            means[cohort] = rows.mean(axis=0)

    contributions = [
        GlobalContribution(
            feature_name=name,
            mean_abs_hc=float(means[CohortLabel.HC][i]),
            mean_abs_pd=float(means[CohortLabel.PD][i]),
        )
        for i, name in enumerate(names)
    ]
    # stable: equal totals keep model feature order
    contributions.sort(key=lambda c: -c.total)
    return contributions[:top_k] if top_k is not None else contributions


class WaterfallStep(BaseModel, frozen=True):
    feature_name: str
    contribution: float


class Waterfall(BaseModel, frozen=True):
    participant_id: str
    base_value: float
    steps: list[WaterfallStep]
    remainder: float
    """Sum of the contributions beyond top_k."""
    n_remaining: int
    prediction: float
    output_space: str


def local_waterfall(attribution: Attribution, top_k: int) -> Waterfall:
    """Contributions ordered by |phi| descending; everything past `top_k` is folded into one remainder."""
    if top_k < 1:
        raise ValueError(f"top_k must be at least 1, got {top_k}")
    ordered = sorted(attribution.phi.items(), key=lambda item: -abs(item[1]))
    shown = ordered[:top_k]
    rest = ordered[top_k:]
    return Waterfall(
        participant_id=attribution.participant_id,
        base_value=attribution.base_value,
        steps=[WaterfallStep(feature_name=name, contribution=value) for name, value in shown],
        remainder=float(sum(value for _, value in rest)),
        n_remaining=len(rest),
        prediction=attribution.prediction,
        output_space=attribution.output_space,
    )
