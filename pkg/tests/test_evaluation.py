import numpy as np
import pytest

from svmpool.dataio import SyntheticSpec, synthesize
from svmpool.errors import InvalidConfig
from svmpool.evaluation import (
    EvalConfig,
    cross_validate,
    fit_model,
    predict_model,
    stratified_folds,
)
from svmpool.model import eval_config_from_dict, load_model, save_model


@pytest.fixture(scope="module")
def ds():
    return synthesize(SyntheticSpec(class_count=3, sequences_per_class=6, seed=2))


def test_stratified_folds():
    labels = np.repeat([0, 1, 2], [6, 7, 5])
    f = stratified_folds(labels, 3, seed=1)
    for c in range(3):
        counts = np.bincount(f[labels == c], minlength=3)
        assert counts.max() - counts.min() <= 1
    assert np.array_equal(f, stratified_folds(labels, 3, seed=1))
    with pytest.raises(InvalidConfig):
        stratified_folds(labels, 1)


@pytest.mark.parametrize("pipeline", ["avg", "max", "svmp", "nsvmp", "fused", "joint"])
def test_cross_validate_shapes(ds, pipeline):
    res = cross_validate(ds, pipeline, EvalConfig(), folds=3)
    assert len(res.fold_accuracies) == 3
    assert res.confusion.sum() == len(ds)
    assert np.all(res.predictions >= 0)
    assert res.mean_accuracy == pytest.approx(np.mean(res.fold_accuracies))
    assert set(res.timings) >= {"centralize"}


def test_split_assignments_respected(ds):
    from dataclasses import replace
    assign = np.arange(len(ds)) % 2
    res = cross_validate(replace(ds, split_assignments=assign), "avg", EvalConfig(), folds=3)
    assert len(res.fold_accuracies) == 2


def test_unknown_pipeline(ds):
    with pytest.raises(InvalidConfig):
        fit_model(ds, "median", EvalConfig())


@pytest.mark.parametrize("pipeline", ["svmp", "fused", "joint", "nsvmp"])
def test_model_round_trip(ds, tmp_path, pipeline):
    model = fit_model(ds, pipeline, EvalConfig())
    save_model(model, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert back.pipeline == pipeline and back.class_ids == model.class_ids
    assert np.array_equal(predict_model(back, ds), predict_model(model, ds))


def test_config_dict_round_trip():
    cfg = EvalConfig(c2=3.0, max_bcd_iters=2)
    assert eval_config_from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
