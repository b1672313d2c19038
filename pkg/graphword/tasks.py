"""Training pairs and whole-word schemes for each recommendation task"""
import logging

import numpy as np

from .model import TaskData
from .utils import rng_stream
from .wholeword import (WholeWordScheme, build_direct_prompt,
                        build_explanation_prompt, build_sequential_prompt,
                        history_limit, target_tokens)

logger = logging.getLogger(__name__)


def _negatives(splits, user, num_neg, rng):
    pool = np.setdiff1d(np.arange(splits.num_items),
                        np.fromiter(splits.interacted(user), dtype=int))
    return rng.choice(pool, size=min(num_neg, len(pool)), replace=False)


def direct_examples(splits, num_neg=19, seed=0, prompt_words=3):
    """Candidate-list pairs for direct recommendation

    Every training item of a user becomes the positive of one pair, with
    `num_neg` never-interacted negatives; the validation label gets one
    pair of its own.

    Returns
    -------
    tuple of list
        (train pairs, validation pairs)
    """
    train, val = [], []
    for user in splits.users:
        rng = rng_stream(seed, 'direct_pairs', user)
        positives = [(v, train) for v in splits.train_seqs[user]]
        positives.append((splits.val_label[user], val))
        for item, bucket in positives:
            cands = np.append(_negatives(splits, user, num_neg, rng), item)
            rng.shuffle(cands)
            prompt = build_direct_prompt(user, [int(c) for c in cands],
                                         prompt_words)
            bucket.append((prompt, target_tokens(item)))
    return train, val


def sequential_examples(splits, max_history=None, prompt_words=3,
                        max_index=None):
    """Next-item pairs from every prefix of each training sequence

    The validation pair predicts the validation label from the whole
    training sequence.

    Parameters
    ----------
    splits : SplitDataset
        Split
    max_history : int, optional
        Items kept in each prompt. Default: None (whole prefix)
    prompt_words : int, optional
        Prompt vectors per task. Default: 3
    max_index : int, optional
        Rows of the index table the prompts will be numbered with;
        `max_history` is clipped so every prompt fits. Default: None

    Returns
    -------
    tuple of list
        (train pairs, validation pairs)
    """
    if max_index is not None:
        max_history = history_limit(max_index, max_history)
    train, val = [], []
    for user in splits.users:
        seq = splits.train_seqs[user]
        for cut in range(1, len(seq)):
            prompt = build_sequential_prompt(user, seq[:cut], prompt_words,
                                             max_history)
            train.append((prompt, target_tokens(seq[cut])))
        prompt = build_sequential_prompt(user, seq, prompt_words, max_history)
        val.append((prompt, target_tokens(splits.val_label[user])))
    return train, val


def explanation_examples(splits, prompt_words=3):
    """Copy pairs standing in for explanation generation

    The target repeats the item named in the prompt, which exercises the
    third prompt family without text supervision.

    Returns
    -------
    tuple of list
        (train pairs, validation pairs)
    """
    train, val = [], []
    for user in splits.users:
        for item in splits.train_seqs[user]:
            train.append((build_explanation_prompt(user, item, prompt_words),
                          target_tokens(item)))
        item = splits.val_label[user]
        val.append((build_explanation_prompt(user, item, prompt_words),
                    target_tokens(item)))
    return train, val


def make_scheme(mode, model, omega=None, seed=0):
    """Whole-word scheme of `mode` for `model`

    Parameters
    ----------
    mode : {'graph_aware', 'constant', 'incremental', 'random_index'}
        Scheme kind
    model : MicroModel
        Model whose index table serves index-based modes
    omega : OmegaTable, optional
        Graph-aware table; required by 'graph_aware' and 'constant'
    seed : int, optional
        Shuffle seed of 'random_index'. Default: 0

    Returns
    -------
    WholeWordScheme
        Scheme
    """
    if mode in ('incremental', 'random_index'):
        return model.index_scheme(shuffled=mode == 'random_index', seed=seed)
    if omega is None:
        raise ValueError(f'{mode!r} needs a graph-aware table')
    if mode == 'graph_aware':
        return WholeWordScheme.graph_aware(omega)
    if mode == 'constant':
        return WholeWordScheme.constant(omega)
    raise ValueError(f'mode must be one of {WholeWordScheme.MODES}')


def build_task_data(splits, model, omega, config, tasks=None):
    """Assemble :class:`~graphword.model.TaskData` for every task

    Parameters
    ----------
    splits : SplitDataset
        Split
    model : MicroModel
        Model to train
    omega : OmegaTable
        Graph-aware table
    config : RunConfig
        Run settings (schemes, scales, negatives, history length)
    tasks : sequence of str, optional
        Subset of 'direct', 'sequential', 'explanation'. Default: all three

    Returns
    -------
    list of TaskData
        One entry per task
    """
    tasks = ('direct', 'sequential', 'explanation') if tasks is None \
        else tasks
    words = model.config.prompt_words
    out = []
    for task in tasks:
        if task == 'direct':
            pairs = direct_examples(splits, config.num_negatives, config.seed,
                                    words)
            scheme = make_scheme(config.dir_scheme, model, omega, config.seed)
            alpha = config.alpha_direct
        elif task == 'sequential':
            pairs = sequential_examples(splits, config.max_history, words,
                                        model.config.max_index)
            scheme = make_scheme(config.seq_scheme, model, omega, config.seed)
            alpha = config.alpha_sequential
        elif task == 'explanation':
            pairs = explanation_examples(splits, words)
            scheme = make_scheme(config.dir_scheme, model, omega, config.seed)
            alpha = config.alpha_direct
        else:
            raise ValueError(f'unknown task {task!r}')
        logger.info('%s: %d train and %d validation pairs', task,
                    len(pairs[0]), len(pairs[1]))
        out.append(TaskData(task, pairs[0], pairs[1], scheme, alpha))
    return out
