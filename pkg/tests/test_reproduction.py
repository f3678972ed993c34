import numpy as np

from app.internal.classifiers.ensemble import TreeEnsemble
from app.internal.classifiers.families import Family, fit_pipeline
from app.internal.classifiers.params import Hyperparams
from app.internal.dataset.cleaning import drop_missing, filter_cohorts
from app.internal.dataset.split import SplitPlan
from app.internal.env_settings import SynthSettings
from app.internal.evaluation.search import oof_predictions
from app.internal.explain.aggregate import global_contributions
from app.internal.explain.treeshap import treeshap_batch
from app.internal.models import CohortLabel
from app.internal.scoring.battery import Battery, DatasetSelection, build_feature_matrix
from app.internal.synth.cohort import generate_cohort

PLANTED = {"NP2TRMR", "NP3BRADY", "NP3FACXP"}


def test_planted_signal_is_recovered_and_explained(battery: Battery):
    records = generate_cohort(SynthSettings().plan(seed=42), battery.instruments)
    matrix = build_feature_matrix(battery, records, DatasetSelection.combined)
    matrix = filter_cohorts(matrix, [CohortLabel.PD, CohortLabel.HC])
    assert matrix.n_samples == 500
    matrix = drop_missing(matrix, int(0.1 * matrix.n_samples))
    assert "VLTANIM" not in matrix.feature_names
    assert 400 <= matrix.n_samples < 500
    assert PLANTED <= set(matrix.feature_names)

    params = Hyperparams(n_trees=50, max_depth=6)
    oof = oof_predictions(Family.rf, params, matrix, SplitPlan())
    assert np.trace(oof.counts) / matrix.n_samples >= 0.95

    pipeline = fit_pipeline(Family.rf, matrix, params)
    assert isinstance(pipeline.model, TreeEnsemble)
    scaled = pipeline.transform(matrix)
    attributions = treeshap_batch(pipeline.model, scaled.values, scaled.participant_ids, scaled.labels)
    assert max(a.additivity_gap() for a in attributions) < 1e-9
    top = global_contributions(attributions, top_k=3)
    assert {c.feature_name for c in top} == PLANTED
