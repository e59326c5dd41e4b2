"""Smoke test for the m2fgb extension module."""

import math
import os
import tempfile

import m2fgb


def main():
    w = m2fgb.project_simplex([1.0, 0.2, -0.1], 1.0)
    assert all(abs(a - b) < 1e-12 for a, b in zip(w, [0.9, 0.1, 0.0])), w

    loss, grad = m2fgb.pointwise_loss("logistic", 1.0, 0.0)
    assert abs(loss - math.log(2.0)) < 1e-12 and abs(grad + 0.5) < 1e-12

    groups = [("a", 0.6, 0.5, 0.0), ("b", 0.3, 0.4, -0.3), ("c", 0.1, 0.3, -0.8)]
    ds = m2fgb.Dataset.synthetic(2000, groups, num_features=4, noise=1.0, seed=1)
    assert len(ds) == 2000 and ds.num_groups == 3
    train, valid, test = ds.split(0.6, 0.2, 0.2, seed=0)
    train, pre = train.preprocess()
    valid = pre.transform(valid)

    results = {}
    for lam in (0.0, 0.7):
        config = m2fgb.BoosterConfig(lambda_=lam, rounds=60, group_loss="true_positive")
        model, trace = m2fgb.train(train, config)
        assert model.num_trees == 60 and len(trace) == 60
        assert abs(sum(trace.multipliers[-1]) - lam) < 1e-12
        labels = model.predict_labels(train, 0.5)
        report = m2fgb.group_metric("tpr", train.labels, labels, train.groups, train.num_groups)
        results[lam] = report["worst_group_value"]
    assert results[0.7] > results[0.0], results

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.txt")
        model.save(path)
        loaded = m2fgb.Model.load(path)
        assert loaded.to_text() == model.to_text()
        assert loaded.predict_scores(valid) == model.predict_scores(valid)

    plain = m2fgb.train_plain(train, m2fgb.BoosterConfig(lambda_=0.0, rounds=10))
    fair0, _ = m2fgb.train(train, m2fgb.BoosterConfig(lambda_=0.0, rounds=10))
    assert plain.to_text() == fair0.to_text()

    try:
        m2fgb.BoosterConfig(lambda_=1.5)
    except ValueError as e:
        assert "[0, 1]" in str(e)
    else:
        raise AssertionError("lambda 1.5 accepted")

    acc = m2fgb.overall_metric("accuracy", valid.labels, model.predict(valid))
    print(f"ok: worst-group TPR {results[0.0]:.3f} -> {results[0.7]:.3f}, validation accuracy {acc:.3f}")


if __name__ == "__main__":
    main()
