# -*- coding: utf-8 -*-
"""
.. _example02_ref:

Example 2: Attention Rank
=========================

ID embeddings assembled from a handful of digit subwords span a
low-dimensional space, so the attention score matrix between them is low
rank. Adding a distinct whole-word vector to every token lifts the rank up
to the model width.
"""
import matplotlib.pyplot as plt
import numpy as np

from graphword.rank_analysis import RankExperiment, run_rank_trials

exp = RankExperiment(n=64, d_x=6, d_p=32, d_n=16, trials=20)
ranks = run_rank_trials(exp, seed=0)
print(ranks.describe().loc[['min', 'max'], ['rank_x', 'rank_xp']])
###############################################################################
# Ranks per trial, with and without whole-word vectors:
fig, ax = plt.subplots(figsize=(6, 3))
bins = np.arange(0, exp.d_n + 2) - 0.5
ax.hist(ranks['rank_x'], bins=bins, label='ID tokens only')
ax.hist(ranks['rank_xp'], bins=bins, label='with whole-word vectors')
ax.set_xlabel('numerical rank')
ax.set_ylabel('trials')
ax.legend(frameon=False)
fig.show()
