"""ID tokenization, task prompts and whole-word embedding schemes

IDs such as ``user_1234`` are split into subwords (``user``, ``_``, ``12``,
``34``), so a handful of digit subwords has to represent every user and
item. A whole-word embedding is an extra vector shared by all subwords of
one ID; the schemes here decide where that vector comes from.
"""
import dataclasses
import functools
import zlib

import numpy as np

from .errors import ColdEntityError, IndexOverflowError
from .utils import rng_stream

SPECIAL = ('<pad>', '</s>', '<s>', '<unk>')
PAD, EOS, BOS, UNK = range(len(SPECIAL))

TASKS = ('direct', 'sequential', 'explanation')
_MARKERS = {'direct': 'P1', 'sequential': 'P2', 'explanation': 'P3'}

KIND_NONE, KIND_USER, KIND_ITEM = 0, 1, 2
_KIND_NAMES = {'user': KIND_USER, 'item': KIND_ITEM}
NONE = -1

DIGITS = tuple(str(d) for d in range(10)) + tuple(f'{d:02d}'
                                                  for d in range(100))
CHUNK = 2


def marker_tokens(task, prompt_words=3):
    """Reserved marker tokens opening a prompt of `task`"""
    if task not in _MARKERS:
        raise ValueError(f'task must be one of {TASKS}')
    return [f'<{_MARKERS[task]}.{s}>' for s in range(prompt_words)]


class Vocab(object):
    """Subword vocabulary

    Layout: special tokens, prompt markers (one per task and prompt-word
    slot), the literal words ``user``, ``item`` and ``_``, then the digit
    subwords ``0``..``9`` and ``00``..``99``.

    Parameters
    ----------
    prompt_words : int, optional
        Prompt vectors per task. Default: 3
    """
    def __init__(self, prompt_words=3):
        self.prompt_words = prompt_words
        markers = [m for t in TASKS for m in marker_tokens(t, prompt_words)]
        self.tokens = list(SPECIAL) + markers + ['user', 'item', '_'] + \
            list(DIGITS)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.digital_count = len(DIGITS)

        # token id -> flat prompt vector slot (task * prompt_words + slot)
        self.marker_slot = np.full(len(self.tokens), -1, dtype=np.int64)
        for i, m in enumerate(markers):
            self.marker_slot[self.index[m]] = i

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def encode(self, tokens):
        """Token strings to ids; unknown strings map to ``<unk>``"""
        return np.array([self.index.get(t, UNK) for t in tokens],
                        dtype=np.int64)

    def decode(self, ids):
        return [self.tokens[int(i)] for i in ids]


@functools.lru_cache(maxsize=None)
def get_vocab(prompt_words=3):
    """Shared :class:`Vocab` instance for a prompt-word count"""
    return Vocab(prompt_words)


def _split_entity(entity):
    if isinstance(entity, tuple):
        kind, number = entity
    else:
        kind, _, number = str(entity).partition('_')
    if kind not in _KIND_NAMES:
        raise ValueError(f"entity must be 'user_<n>' or 'item_<n>', got "
                         f"{entity!r}")
    number = int(number)
    if number < 0:
        raise ValueError(f'entity ids must be >= 0, got {number}')
    return kind, number


def tokenize_id(entity):
    """Split an ID into subword tokens

    Parameters
    ----------
    entity : str or tuple
        ``'user_<n>'``/``'item_<n>'`` or a ``(kind, n)`` tuple

    Returns
    -------
    list of str
        Prefix, ``_`` and the digits in chunks of two (the last chunk may
        be a single digit), e.g. ``['user', '_', '12', '34']``
    """
    kind, number = _split_entity(entity)
    digits = str(number)
    return [kind, '_'] + [digits[i:i + CHUNK]
                          for i in range(0, len(digits), CHUNK)]


def parse_tokens(tokens):
    """Inverse of :func:`tokenize_id`

    Parameters
    ----------
    tokens : sequence of str
        Subword tokens, optionally ending in ``</s>``

    Returns
    -------
    tuple
        ``(kind, n)`` with kind 'user' or 'item'

    Raises
    ------
    ValueError
        Tokens are not a canonical tokenization of an ID
    """
    tokens = list(tokens)
    if tokens and tokens[-1] == SPECIAL[EOS]:
        tokens = tokens[:-1]
    if len(tokens) < 3 or tokens[0] not in _KIND_NAMES or tokens[1] != '_':
        raise ValueError(f'not an ID: {tokens}')
    chunks = tokens[2:]
    if any(c not in DIGITS for c in chunks) or \
            any(len(c) != CHUNK for c in chunks[:-1]):
        raise ValueError(f'not an ID: {tokens}')
    digits = ''.join(chunks)
    if str(int(digits)) != digits:
        raise ValueError(f'non-canonical digits in {tokens}')
    return tokens[0], int(digits)


def detokenize(tokens):
    """Join ID subwords back into ``'<kind>_<n>'``"""
    kind, number = parse_tokens(tokens)
    return f'{kind}_{number}'


def target_tokens(item):
    """Decoder target for an item: its subwords followed by ``</s>``"""
    return tokenize_id(('item', item)) + [SPECIAL[EOS]]


@dataclasses.dataclass(frozen=True)
class TokenizedPrompt:
    """Subword prompt with whole-word span labels

    Attributes
    ----------
    tokens : tuple of str
        Subword tokens
    kinds : tuple of int
        Per token KIND_NONE, KIND_USER or KIND_ITEM
    entities : tuple of int
        Per token entity id, NONE for non-ID tokens
    appearance : tuple of int
        Per token appearance index of its ID in the prompt (0 for the
        first ID), NONE for non-ID tokens
    task : str
        One of 'direct', 'sequential', 'explanation'
    """
    tokens: tuple
    kinds: tuple
    entities: tuple
    appearance: tuple
    task: str

    def __len__(self):
        return len(self.tokens)

    @property
    def num_spans(self):
        """Number of whole-word ID spans"""
        return max(self.appearance, default=NONE) + 1

    def dump(self):
        """Debug line: space-separated ``tok/span`` pairs"""
        names = {KIND_USER: 'user', KIND_ITEM: 'item'}
        parts = []
        for tok, kind, ent, app in zip(self.tokens, self.kinds,
                                       self.entities, self.appearance):
            span = '-' if kind == KIND_NONE else f'{names[kind]}_{ent}#{app}'
            parts.append(f'{tok}/{span}')
        return ' '.join(parts)


def _build_prompt(task, entities, prompt_words):
    tokens = marker_tokens(task, prompt_words)
    kinds = [KIND_NONE] * len(tokens)
    ids = [NONE] * len(tokens)
    appearance = [NONE] * len(tokens)
    for order, (kind, number) in enumerate(entities):
        sub = tokenize_id((kind, number))
        tokens += sub
        kinds += [_KIND_NAMES[kind]] * len(sub)
        ids += [int(number)] * len(sub)
        appearance += [order] * len(sub)
    return TokenizedPrompt(tuple(tokens), tuple(kinds), tuple(ids),
                           tuple(appearance), task)


def build_direct_prompt(user, candidates, prompt_words=3):
    """Direct recommendation prompt: markers, user, candidate items

    Parameters
    ----------
    user : int
        Target user
    candidates : sequence of int
        Candidate items, already shuffled
    prompt_words : int, optional
        Marker tokens per prompt. Default: 3

    Returns
    -------
    TokenizedPrompt
        Prompt with 1 + len(candidates) spans

    Raises
    ------
    ValueError
        `candidates` is empty
    """
    if len(candidates) == 0:
        raise ValueError('candidates must not be empty')
    entities = [('user', user)] + [('item', v) for v in candidates]
    return _build_prompt('direct', entities, prompt_words)


def build_sequential_prompt(user, history, prompt_words=3, max_history=None):
    """Sequential recommendation prompt: markers, user, history items

    The user gets appearance index 0 and the history items 1..N in
    chronological order.

    Parameters
    ----------
    user : int
        Target user
    history : sequence of int
        Chronological item history
    prompt_words : int, optional
        Marker tokens per prompt. Default: 3
    max_history : int, optional
        Keep only the most recent items. Default: None (keep all)

    Raises
    ------
    ValueError
        `history` is empty
    """
    if len(history) == 0:
        raise ValueError('history must not be empty')
    if max_history is not None:
        history = history[-max_history:]
    entities = [('user', user)] + [('item', v) for v in history]
    return _build_prompt('sequential', entities, prompt_words)


def build_explanation_prompt(user, item, prompt_words=3):
    """Explanation prompt: markers, user, item"""
    return _build_prompt('explanation', [('user', user), ('item', item)],
                         prompt_words)


class WholeWordScheme(object):
    """Source of whole-word vectors for prompt tokens

    Lookups gather rows of `table`; row 0 always serves non-ID tokens.

    Parameters
    ----------
    mode : {'graph_aware', 'constant', 'incremental', 'random_index'}
        'graph_aware' reads an entity's propagated row, 'constant' gives
        every token omega0, 'incremental' reads the row of the ID's
        appearance order, 'random_index' does the same with the order
        shuffled per prompt
    table : numpy.ndarray
        Shape (rows, dim)
    num_users, num_items : int, optional
        Entity counts covered by a graph-aware table. Default: 0
    seed : int, optional
        Seed of the per-prompt shuffles of 'random_index'. Default: 0

    Notes
    -----
    Build schemes through the class methods rather than directly.
    """
    MODES = ('graph_aware', 'constant', 'incremental', 'random_index')

    def __init__(self, mode, table, num_users=0, num_items=0, seed=0):
        if mode not in self.MODES:
            raise ValueError(f'mode must be one of {self.MODES}')
        table = np.asarray(table)
        if table.ndim != 2 or table.shape[0] < 1:
            raise ValueError(f'table must be 2-D with at least one row, got '
                             f'shape {table.shape}')
        self.mode = mode
        self.table = table
        self.num_users = num_users
        self.num_items = num_items
        self.seed = seed

    def __repr__(self):
        return (f'WholeWordScheme(mode={self.mode!r}, '
                f'rows={self.table.shape[0]}, dim={self.dim})')

    @property
    def dim(self):
        return self.table.shape[1]

    @property
    def max_index(self):
        """Number of table rows (I for index-based schemes)"""
        return self.table.shape[0]

    @property
    def omega0(self):
        return self.table[0]

    @classmethod
    def graph_aware(cls, omega):
        """Scheme over an :class:`~graphword.propagation.OmegaTable`"""
        table = np.vstack([omega.omega0[None, :], omega.rows])
        return cls('graph_aware', table, omega.num_users, omega.num_items)

    @classmethod
    def constant(cls, omega):
        """omega0 for every token (graph awareness ablated)"""
        return cls('constant', np.asarray(omega.omega0)[None, :])

    @classmethod
    def incremental(cls, max_index, dim, seed=0, table=None, sigma=1.0,
                    shuffled=False):
        """Appearance-order scheme with an I x dim table

        Parameters
        ----------
        max_index : int
            Number of rows I, including the reserved row 0
        dim : int
            Width
        seed : int, optional
            Seed for the random table and shuffles. Default: 0
        table : numpy.ndarray, optional
            Use this table (e.g., a trained one) instead of drawing
        sigma : float, optional
            Scale of a drawn table. Default: 1
        shuffled : bool, optional
            Build the 'random_index' variant. Default: False
        """
        if table is None:
            rng = rng_stream(seed, 'incremental')
            table = rng.normal(0.0, sigma, size=(max_index, dim))
        elif np.shape(table) != (max_index, dim):
            raise ValueError(f'table has shape {np.shape(table)}, expected '
                             f'{(max_index, dim)}')
        mode = 'random_index' if shuffled else 'incremental'
        return cls(mode, table, seed=seed)

    @classmethod
    def random_index(cls, max_index, dim, seed=0, table=None, sigma=1.0):
        """Incremental scheme whose indices are shuffled per prompt"""
        return cls.incremental(max_index, dim, seed, table, sigma,
                               shuffled=True)

    def with_table(self, table):
        """Same scheme over a different table (e.g., after training)"""
        return WholeWordScheme(self.mode, table, self.num_users,
                               self.num_items, self.seed)

    def _shuffle(self, prompt):
        key = zlib.crc32(' '.join(prompt.tokens).encode('utf-8'))
        rng = rng_stream(self.seed, 'random_index', key)
        return rng.permutation(prompt.num_spans)

    def indices(self, prompt):
        """Row of `table` for every token of `prompt`

        Raises
        ------
        ColdEntityError
            graph_aware mode and an entity outside the table
        IndexOverflowError
            An appearance index does not fit in the table
        """
        kinds = np.asarray(prompt.kinds)
        out = np.zeros(len(kinds), dtype=np.int64)
        is_id = kinds != KIND_NONE
        if self.mode == 'constant' or not is_id.any():
            return out

        if self.mode == 'graph_aware':
            ents = np.asarray(prompt.entities)
            users = kinds == KIND_USER
            items = kinds == KIND_ITEM
            if (ents[users] >= self.num_users).any() or \
                    (ents[items] >= self.num_items).any():
                raise ColdEntityError(
                    'prompt mentions an entity without a graph-aware row')
            out[users] = 1 + ents[users]
            out[items] = 1 + self.num_users + ents[items]
            return out

        app = np.asarray(prompt.appearance)[is_id]
        if self.mode == 'random_index':
            app = self._shuffle(prompt)[app]
        rows = app + 1
        if rows.max() >= self.max_index:
            raise IndexOverflowError(
                f'appearance index {rows.max() - 1} needs {rows.max() + 1} '
                f'rows, table has {self.max_index}')
        out[is_id] = rows
        return out


def lookup_wholeword(scheme, prompt):
    """Whole-word matrix X_omega for `prompt`

    Parameters
    ----------
    scheme : WholeWordScheme
        Source of the vectors
    prompt : TokenizedPrompt
        Prompt

    Returns
    -------
    numpy.ndarray
        Shape (len(prompt), dim)
    """
    return scheme.table[scheme.indices(prompt)]


def max_index_for(max_history):
    """Table size I for histories up to `max_history` items

    Row 0 is reserved, the user takes row 1 and items rows 2..N+1.
    """
    return max_history + 2


def history_limit(max_index, max_history=None):
    """Longest history a table of `max_index` rows can number

    Inverse of :func:`max_index_for`. A requested `max_history` is clipped
    to the limit; None returns the limit itself.
    """
    limit = max_index - 2
    return limit if max_history is None else min(max_history, limit)
