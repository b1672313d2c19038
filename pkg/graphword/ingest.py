"""Interaction logs, leave-last-out splits and the user-item graph
"""
import dataclasses
import logging
import re
from typing import NamedTuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .errors import (EmptyDatasetError, InsufficientNegativesError,
                     ParseError)
from .utils import rng_stream

logger = logging.getLogger(__name__)

_HEADER = re.compile(r'#\s*users\s*=\s*(\d+)\s+items\s*=\s*(\d+)')
ROLES = ('train', 'val', 'test', 'candidate')


class Interaction(NamedTuple):
    """One (user, item, timestamp) event with dense 0-based ids"""
    user: int
    item: int
    timestamp: int


class InteractionLog(list):
    """List of :class:`Interaction` that remembers the raw id mapping

    Parameters
    ----------
    interactions : iterable of Interaction
        Events in file order
    user_ids, item_ids : list of int
        Raw ids in first-appearance order; position is the dense id
    declared : tuple of int, optional
        (users, items) counts declared in the file header. Default: None
    """
    def __init__(self, interactions=(), user_ids=(), item_ids=(),
                 declared=None):
        super().__init__(interactions)
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.declared = declared

    @property
    def num_users(self):
        return len(self.user_ids)

    @property
    def num_items(self):
        return len(self.item_ids)


def _parse_int(field, name, lineno):
    try:
        return int(field)
    except ValueError:
        raise ParseError(f'{name} must be an integer, got {field!r}',
                         lineno) from None


def parse_interactions(path):
    """Read a ``user<TAB>item<TAB>timestamp`` file

    Blank lines and lines starting with ``#`` are skipped. A header comment
    of the form ``# users=<n> items=<m>`` declares the expected counts, which
    are then checked against the parsed file.

    Parameters
    ----------
    path : str or os.PathLike
        UTF-8 TSV file

    Returns
    -------
    InteractionLog
        Interactions with ids densified in order of first appearance

    Raises
    ------
    ParseError
        A line does not have three integer fields, a timestamp is
        negative, or the header counts do not match
    """
    users, items = {}, {}
    declared = None
    out = []
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                match = _HEADER.match(line)
                if match and declared is None:
                    declared = (int(match.group(1)), int(match.group(2)))
                continue

            fields = line.split('\t')
            if len(fields) != 3:
                raise ParseError(f'expected 3 tab-separated fields, got '
                                 f'{len(fields)}', lineno)
            raw_user = _parse_int(fields[0], 'user', lineno)
            raw_item = _parse_int(fields[1], 'item', lineno)
            timestamp = _parse_int(fields[2], 'timestamp', lineno)
            if timestamp < 0:
                raise ParseError('timestamp must be >= 0', lineno)

            user = users.setdefault(raw_user, len(users))
            item = items.setdefault(raw_item, len(items))
            out.append(Interaction(user, item, timestamp))

    if declared is not None and declared != (len(users), len(items)):
        raise ParseError(f'header declares {declared[0]} users and '
                         f'{declared[1]} items, file has {len(users)} and '
                         f'{len(items)}')

    logger.info('parsed %d interactions (%d users, %d items) from %s',
                len(out), len(users), len(items), path)
    return InteractionLog(out, users.keys(), items.keys(), declared)


@dataclasses.dataclass(frozen=True)
class SplitDataset:
    """Leave-last-out split of per-user chronological sequences

    Attributes
    ----------
    users : tuple of int
        Surviving users, ascending
    train_seqs : dict[int, tuple of int]
        All but the last two items of each user
    val_label, test_label : dict[int, int]
        Second-to-last and last item of each user
    num_users, num_items : int
        Id space sizes of the whole log
    direct_candidates : dict[int, tuple of int]
        Shuffled test label + negatives, empty until sampled
    """
    users: tuple
    train_seqs: dict
    val_label: dict
    test_label: dict
    num_users: int
    num_items: int
    direct_candidates: dict = dataclasses.field(default_factory=dict)

    def sequence(self, user):
        """Full chronological sequence of `user`"""
        return (self.train_seqs[user] + (self.val_label[user],
                                         self.test_label[user]))

    def interacted(self, user):
        """Every item `user` interacted with, including both labels"""
        return frozenset(self.sequence(user))


def make_splits(interactions, min_len=3):
    """Split interactions per user into train, validation and test

    Parameters
    ----------
    interactions : InteractionLog or list of Interaction
        Events in input order
    min_len : int, optional
        Users with fewer interactions are dropped. Default: 3

    Returns
    -------
    SplitDataset
        Split without candidates

    Raises
    ------
    EmptyDatasetError
        No user has at least `min_len` interactions
    ValueError
        `min_len` is below 3
    """
    if min_len < 3:
        raise ValueError('min_len must be at least 3 (train, val and test '
                         'each need one interaction)')

    per_user = {}
    for order, (user, item, timestamp) in enumerate(interactions):
        per_user.setdefault(user, []).append((timestamp, order, item))

    train, val, test = {}, {}, {}
    for user in sorted(per_user):
        events = per_user[user]
        if len(events) < min_len:
            continue
        # (timestamp, input order) keeps ties in file order
        seq = tuple(item for _, _, item in sorted(events))
        train[user] = seq[:-2]
        val[user] = seq[-2]
        test[user] = seq[-1]

    if not train:
        raise EmptyDatasetError(f'no user has at least {min_len} '
                                'interactions')

    num_users = getattr(interactions, 'num_users', None)
    num_items = getattr(interactions, 'num_items', None)
    if num_users is None:
        num_users = max(i.user for i in interactions) + 1
        num_items = max(i.item for i in interactions) + 1

    logger.info('kept %d of %d users after the min_len=%d rule', len(train),
                len(per_user), min_len)
    return SplitDataset(tuple(train), train, val, test, num_users, num_items)


def sample_direct_candidates(splits, num_neg=99, seed=0):
    """Draw negatives for direct recommendation

    Each user gets `num_neg` items sampled uniformly without replacement from
    the items they never interacted with, plus their test label, in a
    seeded shuffled order.

    Parameters
    ----------
    splits : SplitDataset
        Split to extend
    num_neg : int, optional
        Negatives per user. Default: 99
    seed : int, optional
        Run seed; each user draws from its own sub-stream. Default: 0

    Returns
    -------
    SplitDataset
        Copy of `splits` with `direct_candidates` filled in

    Raises
    ------
    InsufficientNegativesError
        A user has fewer than `num_neg` non-interacted items
    """
    all_items = np.arange(splits.num_items)
    candidates = {}
    for user in splits.users:
        interacted = np.fromiter(splits.interacted(user), dtype=int)
        pool = np.setdiff1d(all_items, interacted, assume_unique=False)
        if len(pool) < num_neg:
            raise InsufficientNegativesError(
                f'user {user} has {len(pool)} non-interacted items, '
                f'{num_neg} negatives requested')
        rng = rng_stream(seed, 'negatives', user)
        picked = rng.choice(pool, size=num_neg, replace=False)
        cands = np.append(picked, splits.test_label[user])
        rng.shuffle(cands)
        candidates[user] = tuple(int(c) for c in cands)
    return dataclasses.replace(splits, direct_candidates=candidates)


def _check_bipartite(adjacency, num_users):
    """Reject user-user or item-item edges and asymmetric structure"""
    coo = adjacency.tocoo()
    same_side = (coo.row < num_users) == (coo.col < num_users)
    if same_side.any():
        raise ValueError('adjacency must only connect users to items')
    if (adjacency != adjacency.T).nnz:
        raise ValueError('adjacency must be symmetric')


class InteractionGraph(object):
    """Bipartite user-item graph over ``num_users + num_items`` nodes

    Users occupy node indices ``0..num_users-1`` and item ``v`` is node
    ``num_users + v``.

    Parameters
    ----------
    adjacency : scipy.sparse matrix
        Symmetric 0/1 adjacency, converted to CSR
    num_users, num_items : int
        Block sizes

    Raises
    ------
    ValueError
        Shape does not match the block sizes or the structure is not a
        symmetric bipartite graph
    """
    def __init__(self, adjacency, num_users, num_items):
        n = num_users + num_items
        if adjacency.shape != (n, n):
            raise ValueError(f'adjacency has shape {adjacency.shape}, '
                             f'expected {(n, n)}')
        adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
        adjacency.sort_indices()
        _check_bipartite(adjacency, num_users)

        self.adjacency = adjacency
        self.num_users = num_users
        self.num_items = num_items
        self.degrees = np.diff(adjacency.indptr)
        self._norm = None

    @property
    def num_nodes(self):
        return self.num_users + self.num_items

    @property
    def num_edges(self):
        return self.adjacency.nnz // 2

    def item_node(self, item):
        return self.num_users + item

    def neighbors(self, node):
        """Sorted neighbor node indices of `node`"""
        a = self.adjacency
        return a.indices[a.indptr[node]:a.indptr[node + 1]]

    def normalized_adjacency(self):
        """Symmetric normalization ``D^-1/2 A D^-1/2`` as CSR

        Isolated nodes get a normalization factor of 0, so their rows and
        columns are empty.
        """
        if self._norm is None:
            with np.errstate(divide='ignore'):
                inv_sqrt = np.where(self.degrees > 0,
                                    1.0 / np.sqrt(self.degrees), 0.0)
            d = sp.diags(inv_sqrt)
            self._norm = sp.csr_matrix(d @ self.adjacency @ d)
        return self._norm

    def edges(self):
        """(user, item) arrays of the graph's edges, item ids 0-based"""
        coo = sp.triu(self.adjacency, format='coo')
        return coo.row.copy(), coo.col - self.num_users

    def dense(self):
        return self.adjacency.toarray()


def build_graph(train_seqs, num_users=None, num_items=None):
    """Build the user-item graph from training sequences only

    Parameters
    ----------
    train_seqs : dict[int, sequence of int] or SplitDataset
        Training items per user. A SplitDataset contributes its
        `train_seqs` and id space sizes
    num_users, num_items : int, optional
        Id space sizes. Default: inferred from the largest ids

    Returns
    -------
    InteractionGraph
        Graph with one edge per distinct (user, item) training pair
    """
    if isinstance(train_seqs, SplitDataset):
        num_users = train_seqs.num_users if num_users is None else num_users
        num_items = train_seqs.num_items if num_items is None else num_items
        train_seqs = train_seqs.train_seqs

    users = [u for u, seq in train_seqs.items() for _ in seq]
    items = [v for seq in train_seqs.values() for v in seq]
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)

    if num_users is None:
        num_users = int(max(train_seqs, default=-1)) + 1
    if num_items is None:
        num_items = int(items.max(initial=-1)) + 1
    n = num_users + num_items

    rows = np.concatenate([users, num_users + items])
    cols = np.concatenate([num_users + items, users])
    adjacency = sp.coo_matrix((np.ones(len(rows)), (rows, cols)),
                              shape=(n, n)).tocsr()
    # collapse repeated purchases into one edge
    adjacency.data[:] = 1.0
    return InteractionGraph(adjacency, num_users, num_items)


def _write_counts(fh, num_users, num_items):
    fh.write(f'# users={num_users} items={num_items}\n')


def _read_counts(path):
    with open(path, encoding='utf-8') as fh:
        match = _HEADER.match(fh.readline())
    if match is None:
        raise ParseError(f'{path} lacks a "# users=<n> items=<m>" header', 1)
    return int(match.group(1)), int(match.group(2))


def write_split_manifest(splits, path):
    """Write a split as TSV ``user<TAB>role<TAB>item``

    Rows keep chronological order within the training role and candidate
    order within the candidate role.
    """
    rows = []
    for user in splits.users:
        rows.extend((user, 'train', v) for v in splits.train_seqs[user])
        rows.append((user, 'val', splits.val_label[user]))
        rows.append((user, 'test', splits.test_label[user]))
        rows.extend((user, 'candidate', v)
                    for v in splits.direct_candidates.get(user, ()))
    frame = pd.DataFrame(rows, columns=['user', 'role', 'item'])
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        _write_counts(fh, splits.num_users, splits.num_items)
        frame.to_csv(fh, sep='\t', index=False, lineterminator='\n')


def read_split_manifest(path):
    """Read a manifest written by :func:`write_split_manifest`

    Raises
    ------
    ParseError
        Missing header, unknown role, or a user without exactly one
        validation and one test label
    """
    num_users, num_items = _read_counts(path)
    frame = pd.read_csv(path, sep='\t', comment='#',
                        dtype={'user': np.int64, 'item': np.int64,
                               'role': str})
    unknown = set(frame['role']) - set(ROLES)
    if unknown:
        raise ParseError(f'unknown roles in {path}: {sorted(unknown)}')

    train, val, test, cands = {}, {}, {}, {}
    for user, group in frame.groupby('user', sort=True):
        user = int(user)
        by_role = {r: tuple(int(v) for v in g['item'])
                   for r, g in group.groupby('role', sort=False)}
        if len(by_role.get('val', ())) != 1 or \
                len(by_role.get('test', ())) != 1:
            raise ParseError(f'user {user} needs exactly one val and one '
                             'test row')
        train[user] = by_role.get('train', ())
        val[user] = by_role['val'][0]
        test[user] = by_role['test'][0]
        if 'candidate' in by_role:
            cands[user] = by_role['candidate']
    return SplitDataset(tuple(train), train, val, test, num_users,
                        num_items, cands)


def write_edge_list(graph, path):
    """Write graph edges as TSV ``user<TAB>item``"""
    users, items = graph.edges()
    frame = pd.DataFrame({'user': users, 'item': items})
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        _write_counts(fh, graph.num_users, graph.num_items)
        frame.to_csv(fh, sep='\t', index=False, lineterminator='\n')


def read_edge_list(path):
    """Read a graph written by :func:`write_edge_list`"""
    num_users, num_items = _read_counts(path)
    frame = pd.read_csv(path, sep='\t', comment='#', dtype=np.int64)
    seqs = {}
    for user, item in zip(frame['user'], frame['item']):
        seqs.setdefault(int(user), []).append(int(item))
    return build_graph(seqs, num_users, num_items)


def write_id_map(log, path):
    """Write the raw-to-dense id mapping as TSV ``kind<TAB>raw<TAB>dense``"""
    frame = pd.concat([
        pd.DataFrame({'kind': 'user', 'raw': log.user_ids,
                      'dense': range(log.num_users)}),
        pd.DataFrame({'kind': 'item', 'raw': log.item_ids,
                      'dense': range(log.num_items)}),
    ])
    frame.to_csv(path, sep='\t', index=False, lineterminator='\n')


def read_id_map(path):
    """Read an id map, returning ``(user_ids, item_ids)`` raw-id lists"""
    frame = pd.read_csv(path, sep='\t')
    out = []
    for kind in ('user', 'item'):
        part = frame[frame['kind'] == kind].sort_values('dense')
        out.append([int(r) for r in part['raw']])
    return tuple(out)


def interacted_items(splits, user, include_val=True):
    """Items known to be interacted with before the test step

    Parameters
    ----------
    splits : SplitDataset
        Split
    user : int
        Dense user id
    include_val : bool, optional
        Add the validation label, which precedes the test label. Default:
        True

    Returns
    -------
    set of int
        Training items, plus the validation label if requested
    """
    items = set(splits.train_seqs[user])
    if include_val:
        items.add(splits.val_label[user])
    return items
