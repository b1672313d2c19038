"""Leave-one-out ranking metrics and task evaluation

Each user has exactly one relevant item, so the ideal DCG is 1 and NDCG@k
reduces to ``1 / log2(rank + 1)`` when the label sits at rank <= k.
"""
import dataclasses
import logging

import numpy as np
import pandas as pd

from .errors import ColdEntityError, EmptyOutputError, IndexOverflowError
from .ingest import interacted_items
from .model import generate, item_trie, score_candidates
from .ranking import RankedList, rerank
from .wholeword import (build_direct_prompt, build_sequential_prompt,
                        history_limit)

logger = logging.getLogger(__name__)

__all__ = ['RankedList', 'rerank', 'MetricReport', 'hit_rate', 'ndcg',
           'evaluate_lists', 'evaluate_task']


def _check_k(k):
    if k <= 0:
        raise ValueError(f'k must be > 0, got {k}')


def _check_labels(lists, labels):
    if len(lists) != len(labels):
        raise ValueError(f'{len(lists)} lists but {len(labels)} labels')


def _items(ranked):
    return ranked.items if isinstance(ranked, RankedList) else tuple(ranked)


def hit_rate(lists, labels, k):
    """Fraction of users whose label is in their top `k`

    Parameters
    ----------
    lists : sequence of RankedList or sequence of item sequences
        Ranked items per user
    labels : sequence of int
        One label per list
    k : int
        Cutoff

    Returns
    -------
    float
        HR@k in [0, 1]; 0 for no users

    Raises
    ------
    ValueError
        `k` <= 0 or lengths differ
    """
    _check_k(k)
    _check_labels(lists, labels)
    if len(labels) == 0:
        return 0.0
    hits = [label in _items(r)[:k] for r, label in zip(lists, labels)]
    return float(np.mean(hits))


def ndcg(lists, labels, k):
    """Mean NDCG@k with a single relevant item per user

    Returns
    -------
    float
        NDCG@k in [0, 1]; 0 for no users

    Raises
    ------
    ValueError
        `k` <= 0 or lengths differ
    """
    _check_k(k)
    _check_labels(lists, labels)
    if len(labels) == 0:
        return 0.0
    gains = []
    for ranked, label in zip(lists, labels):
        top = _items(ranked)[:k]
        gains.append(1.0 / np.log2(top.index(label) + 2)
                     if label in top else 0.0)
    return float(np.mean(gains))


@dataclasses.dataclass
class MetricReport:
    """HR@k and NDCG@k of one task

    Attributes
    ----------
    hr_at, ndcg_at : dict[int, float]
        Metric per cutoff
    num_users : int
        Users that were scored
    failures : int
        Users skipped because generation failed
    task : str
        Task name
    """
    hr_at: dict
    ndcg_at: dict
    num_users: int
    failures: int = 0
    task: str = ''

    def to_frame(self):
        """Long table with columns metric, k, value"""
        rows = [('HR', k, v) for k, v in sorted(self.hr_at.items())]
        rows += [('NDCG', k, v) for k, v in sorted(self.ndcg_at.items())]
        return pd.DataFrame(rows, columns=['metric', 'k', 'value'])

    def table(self):
        """Human-readable summary"""
        ks = sorted(self.hr_at)
        head = f"{self.task or 'task':<12}" + ''.join(
            f'{f"HR@{k}":>10}{f"NDCG@{k}":>10}' for k in ks)
        body = f'{"":<12}' + ''.join(
            f'{self.hr_at[k]:>10.4f}{self.ndcg_at[k]:>10.4f}' for k in ks)
        foot = f'users={self.num_users} failures={self.failures}'
        return '\n'.join([head, body, foot])


def evaluate_lists(lists, labels, ks=(5, 10), failures=0, task=''):
    """Build a :class:`MetricReport` from ranked lists"""
    return MetricReport({k: hit_rate(lists, labels, k) for k in ks},
                        {k: ndcg(lists, labels, k) for k in ks},
                        len(labels), failures, task)


def evaluate_task(model, scheme, splits, task, ks=(5, 10), n_extra=0,
                  beams=None, alpha=None, max_history=None, users=None):
    """Score the test labels of one task

    Direct recommendation ranks each user's candidate list by likelihood.
    Sequential recommendation beam-searches the item catalogue from the
    user's training history plus validation label, then applies the
    (k+N) rerank against those interacted items for every cutoff.

    Parameters
    ----------
    model : MicroModel
        Trained model
    scheme : WholeWordScheme
        Whole-word source of the task
    splits : SplitDataset
        Split; direct needs candidates
    task : {'direct', 'sequential'}
        Task
    ks : sequence of int, optional
        Cutoffs. Default: (5, 10)
    n_extra : int, optional
        Rerank extra candidates N (sequential only). Default: 0
    beams : int, optional
        Beam width; raised to at least ``max(ks) + N``. Default: model's
    alpha : float, optional
        Whole-word scale. Default: model's
    max_history : int, optional
        History truncation for sequential prompts. Index-based schemes clip
        it to what the scheme's index table can number. Default: None (full
        history, or that limit)
    users : sequence of int, optional
        Subset of users. Default: all

    Returns
    -------
    MetricReport
        Metrics over users that could be scored
    """
    users = splits.users if users is None else users
    prompt_words = model.config.prompt_words
    labels, failures = [], 0
    ranked = {k: [] for k in ks}

    if task == 'direct':
        if not splits.direct_candidates:
            raise ValueError('direct evaluation needs sampled candidates')
        for user in users:
            cands = splits.direct_candidates[user]
            prompt = build_direct_prompt(user, cands, prompt_words)
            try:
                result = score_candidates(model, prompt, scheme, cands, alpha)
            except ColdEntityError as err:
                logger.warning('user %d skipped: %s', user, err)
                failures += 1
                continue
            labels.append(splits.test_label[user])
            for k in ks:
                ranked[k].append(result)

    elif task == 'sequential':
        width = max(beams or model.config.beams, max(ks) + n_extra)
        if scheme.mode in ('incremental', 'random_index'):
            max_history = history_limit(scheme.max_index, max_history)
        catalogue = item_trie(model.vocab, range(splits.num_items))
        for user in users:
            history = splits.train_seqs[user] + (splits.val_label[user],)
            prompt = build_sequential_prompt(user, history, prompt_words,
                                             max_history)
            try:
                result = generate(model, prompt, scheme, width, alpha=alpha,
                                  allowed_items=catalogue)
            except (EmptyOutputError, ColdEntityError,
                    IndexOverflowError) as err:
                logger.warning('user %d skipped: %s', user, err)
                failures += 1
                continue
            seen = interacted_items(splits, user, include_val=True)
            labels.append(splits.test_label[user])
            for k in ks:
                ranked[k].append(rerank(result, seen, k, n_extra))
    else:
        raise ValueError("task must be 'direct' or 'sequential'")

    report = MetricReport({k: hit_rate(ranked[k], labels, k) for k in ks},
                          {k: ndcg(ranked[k], labels, k) for k in ks},
                          len(labels), failures, task)
    logger.info('%s: %s', task, report.to_frame().to_dict('records'))
    return report
