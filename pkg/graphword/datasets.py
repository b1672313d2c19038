"""Synthetic block-model corpora and the packaged example log"""

import os

import numpy as np
import pandas as pd

from .ingest import Interaction, InteractionLog, parse_interactions
from .utils import rng_stream

DATA = os.path.abspath(os.path.join(os.path.dirname(__file__), 'data'))


def load_example_data():
    """Load the small interaction log used in the tutorials

    Six communities of users, each favouring its own slice of the item
    catalogue and visiting it in a stable order.

    Returns
    -------
    InteractionLog
        Parsed interactions
    """
    return parse_interactions(os.path.join(DATA, 'example_interactions.tsv'))


def block_labels(n, blocks):
    """Block of each of `n` consecutive ids split into `blocks` groups"""
    if blocks < 1 or n < blocks:
        raise ValueError(f'need 1 <= blocks <= n, got blocks={blocks}, '
                         f'n={n}')
    return np.arange(n) * blocks // n


def make_block_corpus(blocks=4, users=200, items=100, per_user=20, p_in=0.9,
                      seed=0):
    """Generate interactions from a bipartite block model

    Users and items are split into `blocks` equal communities. Each step a
    user picks, with probability `p_in`, the next unseen item of its own
    block (walking the block cyclically from a random start), or otherwise
    a random unseen item from another block. Timestamps strictly increase
    per user.

    Parameters
    ----------
    blocks : int, optional
        Communities. Default: 4
    users, items : int, optional
        Population sizes. Default: 200, 100
    per_user : int, optional
        Interactions per user. Default: 20
    p_in : float, optional
        Probability of an in-block step. Default: 0.9
    seed : int, optional
        Seed. Default: 0

    Returns
    -------
    InteractionLog
        Interactions with raw ids equal to dense ids

    Raises
    ------
    ValueError
        Invalid sizes or probability
    """
    if not 0 <= p_in <= 1:
        raise ValueError(f'p_in must be in [0, 1], got {p_in}')
    if not 1 <= per_user <= items:
        raise ValueError(f'per_user must be in [1, {items}], got {per_user}')
    user_block = block_labels(users, blocks)
    item_block = block_labels(items, blocks)
    members = [np.flatnonzero(item_block == b) for b in range(blocks)]

    events = []
    for user in range(users):
        rng = rng_stream(seed, 'corpus', user)
        own = members[user_block[user]]
        cursor = int(rng.integers(len(own)))
        seen = set()
        clock = int(rng.integers(0, 1000))
        while len(seen) < per_user:
            inside = [v for v in own if v not in seen]
            outside = np.setdiff1d(np.arange(items), own)
            outside = [v for v in outside if v not in seen]
            if inside and (rng.random() < p_in or not outside):
                while own[cursor % len(own)] in seen:
                    cursor += 1
                item = int(own[cursor % len(own)])
                cursor += 1
            else:
                item = int(rng.choice(outside))
            seen.add(item)
            clock += int(rng.integers(1, 86400))
            events.append(Interaction(user, item, clock))
    return InteractionLog(events, range(users), range(items))


def block_density(graph, user_blocks, item_blocks):
    """Edge density between every pair of user and item blocks

    Returns
    -------
    numpy.ndarray
        Shape (user blocks, item blocks); entry (a, b) is the share of
        possible edges present between user block a and item block b
    """
    users, items = graph.edges()
    ub, ib = np.asarray(user_blocks), np.asarray(item_blocks)
    n_u, n_i = ub.max() + 1, ib.max() + 1
    counts = np.zeros((n_u, n_i))
    np.add.at(counts, (ub[users], ib[items]), 1)
    sizes = np.outer(np.bincount(ub, minlength=n_u),
                     np.bincount(ib, minlength=n_i))
    return counts / sizes


def write_interactions(log, path):
    """Write a log as ``user<TAB>item<TAB>timestamp`` with raw ids

    A ``# users=<n> items=<m>`` header records the distinct ids present.
    """
    frame = pd.DataFrame(list(log), columns=['user', 'item', 'timestamp'])
    frame['user'] = np.asarray(log.user_ids)[frame['user']]
    frame['item'] = np.asarray(log.item_ids)[frame['item']]
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        fh.write(f'# users={frame["user"].nunique()} '
                 f'items={frame["item"].nunique()}\n')
        frame.to_csv(fh, sep='\t', index=False, header=False,
                     lineterminator='\n')
