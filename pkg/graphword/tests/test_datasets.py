import numpy as np
import pytest

from graphword.datasets import (block_density, block_labels,
                                load_example_data, make_block_corpus,
                                write_interactions)
from graphword.ingest import build_graph, make_splits, parse_interactions


def test_block_corpus_has_dense_diagonal_blocks():
    log = make_block_corpus(blocks=4, users=200, items=100, per_user=20,
                            p_in=0.9, seed=0)
    assert len(log) == 200 * 20
    graph = build_graph(make_splits(log))
    density = block_density(graph, block_labels(200, 4),
                            block_labels(100, 4))
    assert density.shape == (4, 4)
    diagonal = np.diag(density)
    off = density[~np.eye(4, dtype=bool)]
    assert diagonal.min() > 5 * off.max()


def test_block_corpus_sequences_are_distinct_and_ordered():
    log = make_block_corpus(blocks=2, users=10, items=20, per_user=8,
                            seed=1)
    per_user = {}
    for user, item, stamp in log:
        per_user.setdefault(user, []).append((stamp, item))
    for events in per_user.values():
        stamps = [s for s, _ in events]
        assert stamps == sorted(stamps) and len(set(stamps)) == len(stamps)
        assert len({i for _, i in events}) == 8


def test_block_corpus_is_seeded():
    a = make_block_corpus(blocks=2, users=10, items=20, per_user=5, seed=2)
    b = make_block_corpus(blocks=2, users=10, items=20, per_user=5, seed=2)
    c = make_block_corpus(blocks=2, users=10, items=20, per_user=5, seed=3)
    assert list(a) == list(b)
    assert list(a) != list(c)


@pytest.mark.parametrize('kwargs', [{'p_in': 1.5}, {'per_user': 0},
                                    {'per_user': 21}, {'blocks': 30}])
def test_block_corpus_validation(kwargs):
    params = dict(blocks=2, users=10, items=20, per_user=5)
    params.update(kwargs)
    with pytest.raises(ValueError):
        make_block_corpus(**params)


def test_written_corpus_parses_back(tmp_path):
    log = make_block_corpus(blocks=2, users=12, items=16, per_user=6, seed=4)
    path = tmp_path / 'corpus.tsv'
    write_interactions(log, path)
    again = parse_interactions(path)
    assert len(again) == len(log)
    assert again.declared == (again.num_users, again.num_items)
    assert again.user_ids == list(range(12))
    raw = [(again.user_ids[u], again.item_ids[v], t) for u, v, t in again]
    assert raw == [tuple(e) for e in log]


def test_example_data():
    log = load_example_data()
    assert log.num_users == 60
    splits = make_splits(log)
    assert len(splits.users) == 60
