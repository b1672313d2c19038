import dataclasses
import math

import numpy as np
import pytest

from graphword.evaluation import (MetricReport, RankedList, evaluate_lists,
                                  evaluate_task, hit_rate, ndcg, rerank)


def _brute_force(lists, labels, k):
    hits, gains = 0.0, 0.0
    for items, label in zip(lists, labels):
        for rank, item in enumerate(items[:k], start=1):
            if item == label:
                hits += 1
                gains += 1 / math.log2(rank + 1)
    return hits / len(labels), gains / len(labels)


def _random_case(rng, num_items=30):
    length = int(rng.integers(1, num_items))
    items = rng.permutation(num_items)[:length]
    scores = np.sort(rng.normal(size=length))[::-1]
    label = int(rng.integers(num_items))
    return RankedList(tuple(int(i) for i in items), tuple(scores)), label


def test_metrics_match_brute_force():
    rng = np.random.default_rng(0)
    cases = [_random_case(rng) for _ in range(1000)]
    lists = [c[0] for c in cases]
    labels = [c[1] for c in cases]
    for k in (1, 5, 10, 20):
        hr, gain = _brute_force([r.items for r in lists], labels, k)
        assert hit_rate(lists, labels, k) == hr
        assert ndcg(lists, labels, k) == pytest.approx(gain, abs=1e-12)
        assert ndcg(lists, labels, k) <= hit_rate(lists, labels, k)


def test_label_at_rank_three():
    assert ndcg([[7, 8, 9]], [9], 3) == pytest.approx(0.5)
    assert hit_rate([[7, 8, 9]], [9], 2) == 0.0


def test_metric_edge_cases():
    assert hit_rate([], [], 5) == 0.0
    assert ndcg([], [], 5) == 0.0
    with pytest.raises(ValueError):
        hit_rate([[1]], [1], 0)
    with pytest.raises(ValueError):
        ndcg([[1]], [1, 2], 3)


def test_ranked_list_validation():
    with pytest.raises(ValueError):
        RankedList((1, 2), (0.0,))
    with pytest.raises(ValueError):
        RankedList((1, 1), (0.0, -1.0))
    with pytest.raises(ValueError):
        RankedList((1, 2), (-1.0, 0.0))


def test_ranked_list_from_scores():
    ranked = RankedList.from_scores([4, 2, 9, 4], [-1.0, -0.5, -0.5, -0.2])
    assert ranked.items == (4, 2, 9)
    assert ranked.scores == (-0.2, -0.5, -0.5)
    assert ranked.rank_of(9) == 3
    assert ranked.rank_of(1) is None
    assert ranked.head(1).items == (4,)


def test_rerank_examples():
    ranked = RankedList((1, 2, 3, 4, 5), (-1, -2, -3, -4, -5))
    assert rerank(ranked, {1, 3}, k=2, n_extra=0).items == (1, 2)
    assert rerank(ranked, {1, 3}, k=2, n_extra=1).items == (2,)
    assert rerank(ranked, {1, 3}, k=2, n_extra=2).items == (2, 4)
    assert rerank(ranked, set(), k=3, n_extra=10).items == (1, 2, 3)
    assert rerank(RankedList(), {1}, k=3, n_extra=2).items == ()
    with pytest.raises(ValueError):
        rerank(ranked, set(), k=0, n_extra=1)
    with pytest.raises(ValueError):
        rerank(ranked, set(), k=1, n_extra=-1)


def test_rerank_without_extra_candidates_matches_no_rerank():
    ranked = RankedList((1, 2, 3, 4, 5), (-1, -2, -3, -4, -5))
    plain = rerank(ranked, {1}, k=3, n_extra=0)
    assert plain.items == (1, 2, 3)
    assert ndcg([plain], [2], 3) == pytest.approx(ndcg([ranked], [2], 3))
    assert ndcg([plain], [2], 3) == pytest.approx(1 / math.log2(3))
    assert ndcg([rerank(ranked, {1}, k=3, n_extra=1)], [2], 3) == 1.0


def test_rerank_properties():
    rng = np.random.default_rng(1)
    k = 10
    users = []
    for _ in range(1000):
        ranked, label = _random_case(rng, num_items=40)
        interacted = set(int(i) for i in rng.choice(40, size=8,
                                                    replace=False))
        interacted.discard(label)
        users.append((ranked, label, interacted))

    previous = None
    for n_extra in range(0, 11):
        lists = []
        for ranked, label, interacted in users:
            once = rerank(ranked, interacted, k, n_extra)
            assert rerank(once, interacted, k, n_extra) == once
            if n_extra == 0:
                assert once == ranked.head(k)
            else:
                assert not set(once.items) & interacted
            before = ranked.head(k).rank_of(label)
            after = once.rank_of(label)
            if before is not None:
                assert after is not None and after <= before
            lists.append(once)
        labels = [label for _, label, _ in users]
        metrics = (hit_rate(lists, labels, k), ndcg(lists, labels, k))
        if previous is not None:
            assert metrics[0] >= previous[0]
            assert metrics[1] >= previous[1]
        previous = metrics


def test_report_frame_and_table():
    report = evaluate_lists([[1, 2], [3, 4]], [2, 9], ks=(1, 2),
                            task='direct')
    assert report.hr_at == {1: 0.0, 2: 0.5}
    assert report.ndcg_at[2] == pytest.approx(0.5 / math.log2(3))
    frame = report.to_frame()
    assert list(frame.columns) == ['metric', 'k', 'value']
    assert list(frame['metric']) == ['HR', 'HR', 'NDCG', 'NDCG']
    text = report.table()
    assert 'HR@2' in text and 'users=2' in text
    assert isinstance(report, MetricReport)


def _tiny_setup(seed=0):
    from graphword.ingest import (Interaction, make_splits,
                                  sample_direct_candidates)
    from graphword.model import MicroModel, ModelConfig
    from graphword.propagation import OmegaTable

    events = [Interaction(u, (3 * u + k) % 25, k)
              for u in range(6) for k in range(5)]
    splits = sample_direct_candidates(make_splits(events), 9, seed)
    config = ModelConfig(dim=16, heads=2, enc_layers=1, dec_layers=1,
                         max_index=10, beams=5, seed=seed)
    rng = np.random.default_rng(seed)
    omega = OmegaTable(rng.normal(size=(6 + 25, 16)), rng.normal(size=16),
                       6, 25)
    return splits, MicroModel(config), omega


@pytest.mark.filterwarnings('ignore::UserWarning')
def test_evaluate_direct_task():
    from graphword.wholeword import WholeWordScheme

    splits, model, omega = _tiny_setup()
    report = evaluate_task(model, WholeWordScheme.graph_aware(omega), splits,
                           'direct', ks=(1, 5))
    assert report.num_users == 6 and report.failures == 0
    assert 0 <= report.ndcg_at[5] <= report.hr_at[5] <= 1
    assert report.hr_at[1] <= report.hr_at[5]
    assert report.task == 'direct'


@pytest.mark.filterwarnings('ignore::UserWarning')
def test_evaluate_sequential_task_filters_seen_items():
    splits, model, _ = _tiny_setup(seed=1)
    scheme = model.index_scheme()
    plain = evaluate_task(model, scheme, splits, 'sequential', ks=(5,),
                          n_extra=0, beams=10, max_history=5)
    extra = evaluate_task(model, scheme, splits, 'sequential', ks=(5,),
                          n_extra=5, beams=10, max_history=5)
    assert plain.num_users + plain.failures == 6
    assert extra.hr_at[5] >= plain.hr_at[5]


def test_evaluate_task_rejects_unknown_tasks():
    splits, model, omega = _tiny_setup()
    with pytest.raises(ValueError):
        evaluate_task(model, None, splits, 'explanation')
    with pytest.raises(ValueError):
        evaluate_task(model, None, dataclasses.replace(
            splits, direct_candidates={}), 'direct')


@pytest.mark.filterwarnings('ignore::UserWarning')
def test_sequential_evaluation_clips_long_histories():
    from graphword.ingest import Interaction, make_splits
    from graphword.model import MicroModel, ModelConfig

    events = [Interaction(0, k, k) for k in range(30)]
    splits = make_splits(events)
    model = MicroModel(ModelConfig(dim=16, heads=2, enc_layers=1,
                                   dec_layers=1, beams=5))
    report = evaluate_task(model, model.index_scheme(), splits, 'sequential',
                           ks=(5,))
    assert report.num_users + report.failures == 1
    shuffled = model.index_scheme(shuffled=True, seed=2)
    report = evaluate_task(model, shuffled, splits, 'sequential', ks=(5,),
                           max_history=100)
    assert report.num_users + report.failures == 1


def test_index_overflow_counts_as_failure(monkeypatch):
    import graphword.evaluation as evaluation
    from graphword.errors import IndexOverflowError

    splits, model, _ = _tiny_setup()

    def overflow(*args, **kwargs):
        raise IndexOverflowError('table too small')
    monkeypatch.setattr(evaluation, 'generate', overflow)
    report = evaluate_task(model, model.index_scheme(), splits, 'sequential',
                           ks=(5,))
    assert report.num_users == 0 and report.failures == 6
    assert report.hr_at[5] == 0.0
