"""Smoke test for the tplrec extension module.

Build and install first, e.g. `maturin develop` or `maturin build` plus
`pip install` of the wheel, then run `python python/smoke_test.py`.
"""

import tempfile

import tplrec

FAST = dict(
    dim=8,
    embed_batch_size=128,
    negatives=8,
    max_epochs=10,
    patience=3,
    hidden=16,
    agent_batch_size=32,
    epochs=2,
    target_sync=20,
    seed=3,
)


def main():
    toy = tplrec.Dataset.from_pairs([("p1", "a"), ("p1", "b"), ("p2", "a"), ("p2", "a")])
    assert (toy.n_projects, toy.n_libraries, toy.n_interactions) == (2, 2, 3)
    assert toy.libraries_of("p1") == ["a", "b"]
    assert toy.popularity() == [1.0, 0.5]

    ds = tplrec.Dataset.planted(projects=80, libraries=40, communities=4, per_project=6, seed=5)
    cfg = tplrec.Config(**FAST)
    assert "dim = 8" in cfg.to_toml()

    with tempfile.TemporaryDirectory() as out:
        model = tplrec.Model.train(ds, cfg, output=out)
        reloaded = tplrec.Model.load(out)
    query = ds.library_ids()[:2]
    recs = model.recommend(query, k=5, mode="one-shot")
    assert len(recs) == 5
    assert not {lib for lib, _ in recs} & set(query)
    assert all(a[1] >= b[1] for a, b in zip(recs, recs[1:]))
    assert reloaded.n_libraries == model.n_libraries == 40

    try:
        model.recommend(["not-a-library"])
    except ValueError as e:
        assert "not-a-library" in str(e)
    else:
        raise AssertionError("unknown id accepted")

    report = tplrec.evaluate(ds, tplrec.Config(protocol="coldstart-30", folds=2, **FAST))
    assert report["protocol"] == "coldstart-30" and not report["incomplete"]
    assert len(report["folds"]) == 2
    for name in ("precision", "recall", "epc", "coverage"):
        assert 0.0 <= report["average"][name] <= 100.0
    assert report["kv"].startswith("# protocol=coldstart-30")

    assert tplrec.precision_recall_at_k([1, 2, 3], [2, 9], 2) == (50.0, 50.0)
    assert tplrec.precision_recall_at_k([1], [], 1) is None
    assert tplrec.coverage_at_k([[0, 1], [1, 2]], 4, 2) == 75.0

    print("tplrec", tplrec.__version__, "smoke test passed:", report["average"])


if __name__ == "__main__":
    main()
