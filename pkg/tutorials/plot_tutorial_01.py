# -*- coding: utf-8 -*-
"""
.. _tutorial01_ref:

Tutorial 1: Quick Start
=======================

This tutorial goes from a raw interaction log to graph-aware whole-word
embeddings. Later tutorials build prompts on top of these embeddings.

Loading interactions
--------------------

``graphword`` ships a small example log of 60 users. Every line is
``user<TAB>item<TAB>timestamp``. :func:`~graphword.datasets.load_example_data`
parses it and maps raw IDs to dense ones in order of first appearance:
"""
from graphword.datasets import load_example_data

log = load_example_data()
print(log.num_users, 'users,', log.num_items, 'items,', len(log), 'events')
###############################################################################
# Splitting and building the graph
# --------------------------------
#
# Each user's history is sorted by time. The last item becomes the test
# label and the one before it the validation label. Only the remaining
# training interactions form edges of the bipartite user-item graph.
from graphword import build_graph, make_splits

splits = make_splits(log)
graph = build_graph(splits)
print(graph.num_nodes, 'nodes,', graph.num_edges, 'training edges')
###############################################################################
# Propagating random features
# ---------------------------
#
# Every node starts from an independent normal vector. Parameter-free LightGCN
# layers then average each node with its neighbours, and the mean over all
# layers becomes the whole-word table. Users who share items end up with
# similar vectors even though none of them was ever trained.
from graphword import PropagationConfig, random_feature_propagation

config = PropagationConfig(sigma=5.0, layers=4, dim=64, seed=0)
omega = random_feature_propagation(graph, config)
print(omega.rows.shape, omega.omega0.shape)
###############################################################################
# The example users fall into six communities of items. Cosine similarity
# between user rows is far higher within a community than across:
import numpy as np

from graphword.datasets import block_labels
from graphword.propagation import block_similarity

user_blocks = block_labels(omega.num_users, 6)
within, across = block_similarity(omega.user_rows, user_blocks)
print(f'within {within:.3f}, across {across:.3f}')
###############################################################################
# Plotting the embeddings
# -----------------------
#
# :func:`~graphword.plotting.plot_embedding_projection` scatters the two
# leading principal components of the rows. Colouring users by community
# shows the clusters the propagation produced:
import matplotlib.pyplot as plt

from graphword.plotting import plot_embedding_projection

fig, ax = plt.subplots(figsize=(5, 5))
plot_embedding_projection(omega.user_rows, user_blocks, ax=ax)
ax.set_title('user whole-word embeddings')
fig.show()
###############################################################################
# Compare this with the unpropagated starting noise, which has no structure:
from graphword import init_embeddings

noise = init_embeddings(graph, config).layers[0]
fig, ax = plt.subplots(figsize=(5, 5))
plot_embedding_projection(noise[:omega.num_users], user_blocks, ax=ax)
ax.set_title('layer 0 only')
fig.show()
print(np.round(block_similarity(noise[:omega.num_users], user_blocks), 3))
