"""Ranked candidate lists and the training-free (k+N) rerank rule"""
import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True)
class RankedList:
    """Items ordered by non-increasing score

    Attributes
    ----------
    items : tuple of int
        Item ids, no duplicates
    scores : tuple of float
        Log-probability of each item, non-increasing

    Raises
    ------
    ValueError
        Lengths differ, items repeat or scores increase
    """
    items: tuple = ()
    scores: tuple = ()

    def __post_init__(self):
        if len(self.items) != len(self.scores):
            raise ValueError(f'{len(self.items)} items but '
                             f'{len(self.scores)} scores')
        if len(set(self.items)) != len(self.items):
            raise ValueError('items must not repeat')
        if np.any(np.diff(np.asarray(self.scores, dtype=float)) > 0):
            raise ValueError('scores must be non-increasing')

    def __len__(self):
        return len(self.items)

    @classmethod
    def from_scores(cls, items, scores):
        """Sort by score descending; ties by item id ascending

        Repeated items keep their best score.
        """
        best = {}
        for item, score in zip(items, scores):
            item, score = int(item), float(score)
            if item not in best or score > best[item]:
                best[item] = score
        order = sorted(best, key=lambda i: (-best[i], i))
        return cls(tuple(order), tuple(best[i] for i in order))

    def head(self, n):
        return RankedList(self.items[:n], self.scores[:n])

    def rank_of(self, item):
        """1-based rank of `item`, or None if absent"""
        try:
            return self.items.index(item) + 1
        except ValueError:
            return None


def rerank(ranked, interacted, k, n_extra):
    """Drop already-interacted items from the first ``k + N`` candidates

    With ``N = 0`` nothing is filtered and the list is cut to `k`, which is
    the no-rerank baseline.

    Parameters
    ----------
    ranked : RankedList
        Candidates, best first
    interacted : collection of int
        Items the user already interacted with
    k : int
        Final list length
    n_extra : int
        Extra candidates N examined beyond k; 0 is plain truncation

    Returns
    -------
    RankedList
        At most `k` survivors in their original order

    Raises
    ------
    ValueError
        `k` < 1 or `n_extra` < 0
    """
    if k < 1:
        raise ValueError(f'k must be >= 1, got {k}')
    if n_extra < 0:
        raise ValueError(f'N must be >= 0, got {n_extra}')
    if n_extra == 0:
        return ranked.head(k)
    interacted = set(interacted)
    window = zip(ranked.items[:k + n_extra], ranked.scores[:k + n_extra])
    kept = [(i, s) for i, s in window if i not in interacted][:k]
    return RankedList(tuple(i for i, _ in kept), tuple(s for _, s in kept))
