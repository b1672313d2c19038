import numpy as np
import pytest

from graphword.errors import (EmptyDatasetError, InsufficientNegativesError,
                              ParseError)
from graphword.ingest import (Interaction, InteractionGraph, build_graph,
                              interacted_items, make_splits,
                              parse_interactions, read_edge_list,
                              read_id_map, read_split_manifest,
                              sample_direct_candidates, write_edge_list,
                              write_id_map, write_split_manifest)


def _write(path, text):
    path.write_text(text, encoding='utf-8')
    return path


def _events(seqs):
    """Interactions with increasing timestamps from per-user item lists"""
    out = []
    for user, items in seqs.items():
        out.extend(Interaction(user, v, t) for t, v in enumerate(items))
    return out


def test_parse_densifies_in_first_appearance_order(tmp_path):
    path = _write(tmp_path / 'log.tsv',
                  '# comment\n\n70\t9\t5\n30\t9\t6\n70\t4\t1\n')
    log = parse_interactions(path)
    assert list(log) == [Interaction(0, 0, 5), Interaction(1, 0, 6),
                         Interaction(0, 1, 1)]
    assert log.user_ids == [70, 30]
    assert log.item_ids == [9, 4]
    assert (log.num_users, log.num_items) == (2, 2)


@pytest.mark.parametrize('line,lineno', [
    ('1\t2\n', 2),
    ('1\tx\t3\n', 2),
    ('1\t2\t-4\n', 2),
    ('1\t2\t3\t4\n', 2),
])
def test_parse_rejects_malformed_lines(tmp_path, line, lineno):
    path = _write(tmp_path / 'log.tsv', '0\t0\t0\n' + line)
    with pytest.raises(ParseError) as err:
        parse_interactions(path)
    assert err.value.lineno == lineno
    assert str(err.value).startswith(f'line {lineno}:')


def test_parse_checks_declared_counts(tmp_path):
    ok = _write(tmp_path / 'ok.tsv', '# users=2 items=1\n0\t5\t0\n1\t5\t0\n')
    assert parse_interactions(ok).declared == (2, 1)
    bad = _write(tmp_path / 'bad.tsv', '# users=3 items=1\n0\t5\t0\n')
    with pytest.raises(ParseError):
        parse_interactions(bad)


def test_splits_are_leave_last_out():
    events = [Interaction(0, 3, 30), Interaction(0, 1, 10),
              Interaction(0, 2, 20), Interaction(0, 4, 40),
              Interaction(1, 0, 1), Interaction(1, 1, 2)]
    splits = make_splits(events)
    assert splits.users == (0,)
    assert splits.train_seqs[0] == (1, 2)
    assert splits.val_label[0] == 3
    assert splits.test_label[0] == 4
    assert splits.sequence(0) == (1, 2, 3, 4)


def test_split_ties_keep_input_order():
    events = [Interaction(0, 5, 1), Interaction(0, 6, 1),
              Interaction(0, 7, 1)]
    splits = make_splits(events)
    assert (splits.train_seqs[0], splits.val_label[0],
            splits.test_label[0]) == ((5,), 6, 7)


def test_split_errors():
    with pytest.raises(EmptyDatasetError):
        make_splits([Interaction(0, 0, 0), Interaction(0, 1, 1)])
    with pytest.raises(ValueError):
        make_splits([Interaction(0, 0, 0)], min_len=2)


def test_candidates_exclude_every_interacted_item():
    seqs = {u: [(4 * u + k) % 40 for k in range(6)] for u in range(10)}
    splits = sample_direct_candidates(make_splits(_events(seqs)), num_neg=19,
                                      seed=3)
    for user in splits.users:
        cands = splits.direct_candidates[user]
        assert len(cands) == 20
        assert len(set(cands)) == 20
        assert splits.test_label[user] in cands
        negatives = set(cands) - {splits.test_label[user]}
        assert not negatives & splits.interacted(user)


def test_candidates_are_deterministic_per_seed():
    seqs = {u: [(3 * u + k) % 30 for k in range(5)] for u in range(8)}
    splits = make_splits(_events(seqs))
    a = sample_direct_candidates(splits, 10, seed=1)
    b = sample_direct_candidates(splits, 10, seed=1)
    c = sample_direct_candidates(splits, 10, seed=2)
    assert a.direct_candidates == b.direct_candidates
    assert a.direct_candidates != c.direct_candidates


def test_candidates_need_enough_items():
    splits = make_splits(_events({0: [0, 1, 2, 3]}))
    with pytest.raises(InsufficientNegativesError):
        sample_direct_candidates(splits, num_neg=99)


def test_graph_uses_training_edges_only():
    splits = make_splits(_events({0: [0, 1, 0, 2, 3], 1: [2, 3, 4]}))
    graph = build_graph(splits)
    assert graph.num_users == 2
    assert graph.num_items == 5
    # duplicate purchase of item 0 collapses; labels never become edges
    assert graph.num_edges == 3
    dense = graph.dense()
    np.testing.assert_array_equal(dense, dense.T)
    assert set(np.unique(dense)) <= {0.0, 1.0}
    assert list(graph.neighbors(0)) == [2, 3]
    assert list(graph.neighbors(1)) == [4]
    assert graph.degrees[graph.item_node(4)] == 0


def test_graph_rejects_same_side_edges():
    import scipy.sparse as sp
    a = sp.csr_matrix(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))
    with pytest.raises(ValueError):
        InteractionGraph(a, num_users=2, num_items=1)


def test_normalized_adjacency_handles_isolated_nodes():
    graph = build_graph({0: [0], 1: []}, num_users=2, num_items=2)
    norm = graph.normalized_adjacency().toarray()
    assert np.all(norm[1] == 0) and np.all(norm[:, 3] == 0)
    assert norm[0, 2] == pytest.approx(1.0)


def test_manifest_round_trip(tmp_path):
    seqs = {u: [(5 * u + k) % 25 for k in range(4 + u % 3)]
            for u in range(6)}
    splits = sample_direct_candidates(make_splits(_events(seqs)), 9, seed=0)
    path = tmp_path / 'splits.tsv'
    write_split_manifest(splits, path)
    assert read_split_manifest(path) == splits


def test_manifest_rejects_unknown_role(tmp_path):
    path = _write(tmp_path / 's.tsv',
                  '# users=1 items=2\nuser\trole\titem\n0\tbogus\t1\n')
    with pytest.raises(ParseError):
        read_split_manifest(path)


def test_edge_list_and_id_map_round_trip(tmp_path):
    path = _write(tmp_path / 'log.tsv',
                  '5\t7\t0\n5\t8\t1\n5\t9\t2\n6\t9\t0\n')
    log = parse_interactions(path)
    graph = build_graph({0: [0, 1], 1: [2]}, log.num_users, log.num_items)
    write_edge_list(graph, tmp_path / 'g.tsv')
    again = read_edge_list(tmp_path / 'g.tsv')
    assert (again.adjacency != graph.adjacency).nnz == 0
    write_id_map(log, tmp_path / 'ids.tsv')
    assert read_id_map(tmp_path / 'ids.tsv') == ([5, 6], [7, 8, 9])


def test_interacted_items():
    splits = make_splits(_events({0: [4, 5, 6, 7]}))
    assert interacted_items(splits, 0) == {4, 5, 6}
    assert interacted_items(splits, 0, include_val=False) == {4, 5}


def test_written_files_start_with_counts_and_columns(tmp_path):
    splits = make_splits(_events({0: [3, 1, 2], 1: [2, 0, 1]}))
    write_split_manifest(splits, tmp_path / 'splits.tsv')
    write_edge_list(build_graph(splits), tmp_path / 'graph.tsv')
    manifest = (tmp_path / 'splits.tsv').read_text().splitlines()
    edges = (tmp_path / 'graph.tsv').read_text().splitlines()
    assert manifest[:3] == ['# users=2 items=4', 'user\trole\titem',
                            '0\ttrain\t3']
    assert edges[:2] == ['# users=2 items=4', 'user\titem']

    headless = _write(tmp_path / 'headless.tsv', '\n'.join(manifest[1:]))
    with pytest.raises(ParseError, match='header'):
        read_split_manifest(headless)
