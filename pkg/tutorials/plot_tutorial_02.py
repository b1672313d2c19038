# -*- coding: utf-8 -*-
"""
.. _tutorial02_ref:

Tutorial 2: Prompts and Whole-Word Schemes
==========================================

A language model sees an ID as several subword tokens. This tutorial shows
how prompts are tokenized and how every token of an ID receives the same
whole-word vector. It ends with the training-free rerank rule used at
evaluation time.

Tokenizing IDs
--------------

Digits are split into pairs, so ``item_1234`` becomes four tokens:
"""
from graphword import tokenize_id

print(tokenize_id('item_1234'))
print(tokenize_id('user_7'))
###############################################################################
# Building a prompt
# -----------------
#
# A direct recommendation prompt names a user and a list of candidate items.
# Every token remembers which ID it belongs to, which lets the whole-word
# lookup give all subwords of one ID the same vector.
from graphword import build_direct_prompt

prompt = build_direct_prompt(user=3, candidates=[12, 5, 30])
print(prompt.dump())
###############################################################################
# Looking up whole-word vectors
# -----------------------------
#
# The graph-aware scheme reads each ID's row of the propagated table and uses
# the shared vector omega0 for every other token. Here the table comes from
# the packaged example log.
import numpy as np

from graphword import (PropagationConfig, WholeWordScheme, build_graph,
                       lookup_wholeword, make_splits,
                       random_feature_propagation)
from graphword.datasets import load_example_data

splits = make_splits(load_example_data())
omega = random_feature_propagation(build_graph(splits),
                                   PropagationConfig(dim=16))
graph_aware = WholeWordScheme.graph_aware(omega)
x_omega = lookup_wholeword(graph_aware, prompt)
print(x_omega.shape)
###############################################################################
# Rows of tokens belonging to the same ID are identical:
span = [i for i, ent in enumerate(prompt.entities) if ent == 12]
print(np.allclose(x_omega[span], x_omega[span[0]]))
###############################################################################
# Other schemes
# -------------
#
# For sequential recommendation the order in which IDs appear in the history
# matters more than the graph. The incremental scheme numbers IDs by their
# position in the prompt, while the random-index scheme shuffles those
# numbers. The constant scheme gives every token omega0.
from graphword import build_sequential_prompt

history = build_sequential_prompt(user=3, history=[8, 2, 30, 2])
incremental = WholeWordScheme.incremental(max_index=8, dim=16)
shuffled = WholeWordScheme.random_index(max_index=8, dim=16, seed=1)
constant = WholeWordScheme.constant(omega)
for scheme in (incremental, shuffled, constant):
    print(f'{scheme.mode:>13}', scheme.indices(history))
###############################################################################
# Reranking
# ---------
#
# Beam search returns more items than the cut-off needs. The (k+N) rule keeps
# the top k+N, drops items the user already interacted with and keeps the
# first k of the rest. It never pushes an unseen item further down the list.
# With N = 0 the list is only cut to k, which is the no-rerank baseline.
from graphword import RankedList, rerank

beams = RankedList(items=(8, 17, 2, 9, 23, 30),
                   scores=(-0.1, -0.4, -0.5, -0.9, -1.2, -1.3))
seen = {8, 2, 30}
print(rerank(beams, seen, k=3, n_extra=0).items)
print(rerank(beams, seen, k=3, n_extra=3).items)
