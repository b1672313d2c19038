# -*- coding: utf-8 -*-
"""
.. _example01_ref:

Example 1: Training on a Block Corpus
=====================================

A small encoder-decoder is trained on a synthetic corpus where users mostly
interact with items of their own block. Direct recommendation uses the
graph-aware scheme and sequential recommendation the incremental one.
"""
import matplotlib.pyplot as plt

from graphword import (PropagationConfig, build_graph, make_splits,
                       random_feature_propagation, sample_direct_candidates)
from graphword.experiments import model_config
from graphword.config import RunConfig
from graphword.datasets import make_block_corpus
from graphword.evaluation import evaluate_task
from graphword.model import MicroModel, TrainSchedule, train
from graphword.plotting import plot_loss_curve
from graphword.tasks import build_task_data, make_scheme

config = RunConfig(dim=32, heads=2, enc_layers=1, dec_layers=1, epochs=6,
                   num_negatives=19, max_history=8, beams=10, lr=0.005)

log = make_block_corpus(blocks=4, users=80, items=60, per_user=12)
splits = sample_direct_candidates(make_splits(log), config.num_negatives)
omega = random_feature_propagation(
    build_graph(splits), PropagationConfig(config.sigma, config.gcn_layers,
                                           config.dim))

model = MicroModel(model_config(config))
datasets = build_task_data(splits, model, omega, config)
result = train(model, datasets, TrainSchedule(epochs=config.epochs,
                                              lr=config.lr))

fig, ax = plt.subplots(figsize=(6, 4))
plot_loss_curve(result.curve, ax=ax)
fig.show()
###############################################################################
# Both tasks are scored on the held-out test items. Sequential results are
# reranked with N extra candidates to filter items the user already saw.
direct = evaluate_task(result.model,
                       make_scheme('graph_aware', result.model, omega),
                       splits, 'direct', alpha=config.alpha_direct)
print(direct.table())

sequential = evaluate_task(result.model, make_scheme('incremental',
                                                     result.model),
                           splits, 'sequential', n_extra=config.rerank_n,
                           beams=config.beams, alpha=config.alpha_sequential,
                           max_history=config.max_history)
print(sequential.table())
