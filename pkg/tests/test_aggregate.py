import pytest

from app.internal.explain.aggregate import global_contributions, local_waterfall
from app.internal.explain.treeshap import Attribution
from app.internal.models import CohortLabel, LabelError


def attribution(pid: str, label: CohortLabel | None, **phi: float) -> Attribution:
    return Attribution(
        participant_id=pid,
        label=label,
        base_value=0.5,
        phi=phi,
        prediction=0.5 + sum(phi.values()),
    )


def test_class_conditional_means_and_ranking():
    attributions = [
        attribution("1", CohortLabel.PD, a=0.4, b=-0.1, c=0.0),
        attribution("2", CohortLabel.PD, a=-0.2, b=0.1, c=0.0),
        attribution("3", CohortLabel.HC, a=0.0, b=-0.5, c=0.1),
    ]
    ranked = global_contributions(attributions)
    assert [c.feature_name for c in ranked] == ["b", "a", "c"]
    b = ranked[0]
    assert b.mean_abs_pd == pytest.approx(0.1)
    assert b.mean_abs_hc == pytest.approx(0.5)
    assert ranked[1].mean_abs_pd == pytest.approx(0.3)
    assert len(global_contributions(attributions, top_k=2)) == 2


def test_explicit_labels_override_stored_ones():
    attributions = [attribution("1", None, a=1.0), attribution("2", None, a=-3.0)]
    ranked = global_contributions(attributions, labels=[CohortLabel.HC, CohortLabel.PD])
    assert ranked[0].mean_abs_hc == 1.0
    assert ranked[0].mean_abs_pd == 3.0


def test_empty_class_contributes_zero():
    ranked = global_contributions([attribution("1", CohortLabel.PD, a=0.2)])
    assert ranked[0].mean_abs_hc == 0.0
    assert ranked[0].mean_abs_pd == pytest.approx(0.2)


def test_non_binary_label_is_rejected():
    with pytest.raises(LabelError):
        global_contributions([attribution("1", CohortLabel.SWEDD, a=0.2)])
    with pytest.raises(LabelError):
        global_contributions([attribution("1", None, a=0.2)])


def test_equal_totals_keep_feature_order():
    ranked = global_contributions([attribution("1", CohortLabel.PD, z=0.1, y=-0.1, x=0.1)])
    assert [c.feature_name for c in ranked] == ["z", "y", "x"]


def test_waterfall_folds_the_tail():
    waterfall = local_waterfall(attribution("1", CohortLabel.PD, a=0.05, b=-0.3, c=0.2, d=0.01), top_k=2)
    assert [s.feature_name for s in waterfall.steps] == ["b", "c"]
    assert waterfall.remainder == pytest.approx(0.06)
    assert waterfall.n_remaining == 2
    total = waterfall.base_value + sum(s.contribution for s in waterfall.steps) + waterfall.remainder
    assert total == pytest.approx(waterfall.prediction)


def test_waterfall_without_tail():
    waterfall = local_waterfall(attribution("1", CohortLabel.HC, a=0.1), top_k=5)
    assert waterfall.n_remaining == 0
    assert waterfall.remainder == 0.0
    with pytest.raises(ValueError):
        local_waterfall(attribution("1", CohortLabel.HC, a=0.1), top_k=0)


def test_all_zero_attributions():
    ranked = global_contributions(
        [attribution("1", CohortLabel.PD, a=0.0, b=0.0), attribution("2", CohortLabel.HC, a=0.0, b=0.0)]
    )
    assert all(c.total == 0.0 for c in ranked)
