import numpy as np
import pytest

from graphword.errors import ColdEntityError, IndexOverflowError
from graphword.propagation import OmegaTable
from graphword.wholeword import (DIGITS, KIND_ITEM, KIND_NONE, KIND_USER,
                                 NONE, UNK, WholeWordScheme,
                                 build_direct_prompt,
                                 build_explanation_prompt,
                                 build_sequential_prompt, detokenize,
                                 get_vocab, history_limit, lookup_wholeword,
                                 marker_tokens, max_index_for, parse_tokens,
                                 target_tokens, tokenize_id)


@pytest.mark.parametrize('entity,tokens', [
    ('user_1234', ['user', '_', '12', '34']),
    ('item_7', ['item', '_', '7']),
    ('item_10', ['item', '_', '10']),
    ('user_123', ['user', '_', '12', '3']),
    (('item', 0), ['item', '_', '0']),
])
def test_tokenize_id(entity, tokens):
    assert tokenize_id(entity) == tokens
    assert parse_tokens(tokens + ['</s>']) == tuple(
        entity if isinstance(entity, tuple)
        else (entity.split('_')[0], int(entity.split('_')[1])))


@pytest.mark.parametrize('tokens', [
    ['item', '_'],
    ['shop', '_', '12'],
    ['item', '12'],
    ['item', '_', '1', '23'],
    ['item', '_', '01'],
    ['item', '_', '<pad>'],
])
def test_parse_rejects_non_canonical(tokens):
    with pytest.raises(ValueError):
        parse_tokens(tokens)


def test_bad_entities():
    with pytest.raises(ValueError):
        tokenize_id('shop_1')
    with pytest.raises(ValueError):
        tokenize_id(('item', -1))


def test_detokenize():
    assert detokenize(['user', '_', '42']) == 'user_42'
    assert target_tokens(5) == ['item', '_', '5', '</s>']


def test_vocab_layout():
    vocab = get_vocab(3)
    assert vocab is get_vocab(3)
    assert vocab.digital_count == len(DIGITS) == 110
    assert len(vocab) == 4 + 9 + 3 + 110
    for token in marker_tokens('sequential') + ['user', '_', '07']:
        assert token in vocab
    ids = vocab.encode(['item', '_', 'nope'])
    assert ids[-1] == UNK
    assert vocab.decode(ids[:2]) == ['item', '_']
    slots = [vocab.marker_slot[vocab.index[m]]
             for m in marker_tokens('explanation')]
    assert slots == [6, 7, 8]
    assert vocab.marker_slot[vocab.index['user']] == -1


def test_direct_prompt_spans():
    prompt = build_direct_prompt(12, [5, 305], prompt_words=2)
    assert prompt.tokens == ('<P1.0>', '<P1.1>', 'user', '_', '12',
                             'item', '_', '5', 'item', '_', '30', '5')
    assert prompt.kinds[:2] == (KIND_NONE, KIND_NONE)
    assert prompt.kinds[2:5] == (KIND_USER,) * 3
    assert prompt.kinds[5:] == (KIND_ITEM,) * 7
    assert prompt.entities[5:8] == (5, 5, 5)
    assert prompt.appearance == (NONE, NONE, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2)
    assert prompt.num_spans == 3
    assert prompt.dump().split()[2] == 'user/user_12#0'
    with pytest.raises(ValueError):
        build_direct_prompt(1, [])


def test_sequential_prompt_truncates_history():
    prompt = build_sequential_prompt(0, [1, 2, 3, 4], max_history=2)
    items = {e for e, k in zip(prompt.entities, prompt.kinds)
             if k == KIND_ITEM}
    assert items == {3, 4}
    assert prompt.num_spans == 3
    assert prompt.task == 'sequential'
    with pytest.raises(ValueError):
        build_sequential_prompt(0, [])


def _omega(num_users=3, num_items=4, dim=5):
    rng = np.random.default_rng(0)
    return OmegaTable(rng.normal(size=(num_users + num_items, dim)),
                      rng.normal(size=dim), num_users, num_items)


def test_graph_aware_lookup_shares_rows_per_entity():
    omega = _omega()
    scheme = WholeWordScheme.graph_aware(omega)
    prompt = build_direct_prompt(2, [3, 1])
    x = lookup_wholeword(scheme, prompt)
    assert x.shape == (len(prompt), 5)
    kinds = np.asarray(prompt.kinds)
    ents = np.asarray(prompt.entities)
    np.testing.assert_array_equal(x[kinds == KIND_NONE],
                                  np.tile(omega.omega0, (3, 1)))
    np.testing.assert_array_equal(x[kinds == KIND_USER][0],
                                  omega.user_rows[2])
    for item in (3, 1):
        rows = x[(kinds == KIND_ITEM) & (ents == item)]
        np.testing.assert_array_equal(rows,
                                      np.tile(omega.item_rows[item],
                                              (len(rows), 1)))


def test_graph_aware_rejects_cold_entities():
    scheme = WholeWordScheme.graph_aware(_omega())
    with pytest.raises(ColdEntityError):
        scheme.indices(build_direct_prompt(0, [4]))
    with pytest.raises(KeyError):
        scheme.indices(build_direct_prompt(3, [0]))


def test_constant_scheme_uses_omega0_everywhere():
    omega = _omega()
    x = lookup_wholeword(WholeWordScheme.constant(omega),
                         build_sequential_prompt(1, [0, 2]))
    np.testing.assert_array_equal(x, np.tile(omega.omega0, (len(x), 1)))


def test_incremental_scheme_follows_appearance():
    scheme = WholeWordScheme.incremental(max_index_for(3), 4, seed=1)
    prompt = build_sequential_prompt(9, [40, 40, 7])
    rows = scheme.indices(prompt)
    expected = [0 if a == NONE else a + 1 for a in prompt.appearance]
    np.testing.assert_array_equal(rows, expected)
    # the same item at two positions gets two different rows
    assert len(set(rows[np.asarray(prompt.entities) == 40])) == 2
    too_long = build_sequential_prompt(9, [1, 2, 3, 4])
    with pytest.raises(IndexOverflowError):
        scheme.indices(too_long)


def test_random_index_is_a_deterministic_permutation():
    scheme = WholeWordScheme.random_index(10, 4, seed=5)
    prompt = build_sequential_prompt(1, [2, 3, 4, 5, 6])
    rows = scheme.indices(prompt)
    np.testing.assert_array_equal(rows, scheme.indices(prompt))
    app = np.asarray(prompt.appearance)
    per_span = {a: set(rows[app == a]) for a in range(prompt.num_spans)}
    assert all(len(r) == 1 for r in per_span.values())
    assert sorted(r.pop() for r in per_span.values()) == list(range(1, 7))
    assert np.all(rows[app == NONE] == 0)


def test_incremental_table_shape_is_checked():
    with pytest.raises(ValueError):
        WholeWordScheme.incremental(4, 3, table=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        WholeWordScheme('mystery', np.zeros((1, 2)))
    scheme = WholeWordScheme.incremental(4, 3)
    assert scheme.with_table(np.ones((4, 3))).mode == 'incremental'
    assert build_explanation_prompt(1, 2).num_spans == 2


def test_ids_below_a_million_round_trip():
    rng = np.random.default_rng(0)
    numbers = [0, 9, 10, 99, 100, 101, 999, 1000, 99999, 100000, 999999]
    numbers += [int(n) for n in rng.integers(0, 10**6, size=2000)]
    for kind in ('user', 'item'):
        for n in numbers:
            tokens = tokenize_id((kind, n))
            assert detokenize(tokens) == f'{kind}_{n}'
            assert parse_tokens(tokens) == (kind, n)
            assert tokenize_id(detokenize(tokens)) == tokens


def test_history_limit_inverts_table_size():
    for history in range(1, 30):
        assert history_limit(max_index_for(history)) == history
    assert history_limit(22, max_history=5) == 5
    assert history_limit(22, max_history=50) == 20
