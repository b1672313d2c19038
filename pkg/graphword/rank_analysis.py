"""Rank of the attention matrix with and without whole-word embeddings

ID embeddings assembled from d_x digit subwords span at most d_x
dimensions, which caps the rank of ``A_x = (X W_Q)(X W_K)^T`` at d_x. Adding
independent whole-word vectors lifts the rank of ``A_{x+p}`` to d_n.
"""
import dataclasses

import numpy as np
import pandas as pd
from scipy import linalg

from .utils import rng_stream


@dataclasses.dataclass(frozen=True)
class RankExperiment:
    """Sizes of a rank trial

    Attributes
    ----------
    n : int
        Number of token rows
    d_x : int
        Digit subword basis size
    d_p : int
        Number of distinct entities (whole-word vectors)
    d_n : int
        Embedding width, also the projection width d_h
    trials : int
        Repetitions. Default: 20
    tol : float
        Relative singular value threshold. Default: 1e-10

    Raises
    ------
    ValueError
        The sizes violate ``n > d_p > d_n > d_x >= 1``
    """
    n: int
    d_x: int
    d_p: int
    d_n: int
    trials: int = 20
    tol: float = 1e-10

    def __post_init__(self):
        if not self.n > self.d_p > self.d_n > self.d_x >= 1:
            raise ValueError('sizes must satisfy n > d_p > d_n > d_x >= 1, '
                             f'got n={self.n}, d_p={self.d_p}, '
                             f'd_n={self.d_n}, d_x={self.d_x}')
        if self.trials < 1:
            raise ValueError('trials must be >= 1')

    @property
    def d_h(self):
        return self.d_n


def sample_id_embeddings(exp, seed=0):
    """ID embeddings built from a d_x-row subword basis

    Each row is a random non-negative combination of the same d_x basis
    vectors, so the matrix has rank d_x almost surely.

    Returns
    -------
    numpy.ndarray
        Shape (n, d_n)
    """
    rng = rng_stream(seed, 'subwords')
    basis = rng.normal(size=(exp.d_x, exp.d_n))
    weights = rng.uniform(size=(exp.n, exp.d_x))
    return weights @ basis


def sample_wholeword_embeddings(exp, seed=0):
    """Whole-word rows from d_p independent N(0, 1) entity vectors

    Row i belongs to entity ``i % d_p``, so every entity appears.

    Returns
    -------
    numpy.ndarray
        Shape (n, d_n)
    """
    rng = rng_stream(seed, 'wholeword')
    entities = rng.normal(size=(exp.d_p, exp.d_n))
    return entities[np.arange(exp.n) % exp.d_p]


def sample_projections(exp, seed=0):
    """Random Gaussian W_Q and W_K of shape (d_n, d_h)"""
    rng = rng_stream(seed, 'projections')
    return (rng.normal(size=(exp.d_n, exp.d_h)),
            rng.normal(size=(exp.d_n, exp.d_h)))


def numerical_rank(matrix, tol=1e-10, scale=None):
    """Count singular values above ``tol * s_max * scale``

    Parameters
    ----------
    matrix : numpy.ndarray
        2-D array
    tol : float, optional
        Relative tolerance. Default: 1e-10
    scale : float, optional
        Extra factor; default is the largest matrix dimension

    Returns
    -------
    int
        Numerical rank; 0 for an all-zero matrix
    """
    svals = linalg.svdvals(matrix)
    if svals.size == 0 or svals[0] == 0:
        return 0
    scale = max(matrix.shape) if scale is None else scale
    return int(np.sum(svals > tol * svals[0] * scale))


def measure_ranks(x, p, w_q, w_k, tol=1e-10):
    """Ranks of the attention matrices without and with whole-word rows

    Parameters
    ----------
    x : numpy.ndarray
        ID embeddings, shape (n, d_n)
    p : numpy.ndarray
        Whole-word rows, shape (n, d_n)
    w_q, w_k : numpy.ndarray
        Projections, shape (d_n, d_h)
    tol : float, optional
        Relative tolerance. Default: 1e-10

    Returns
    -------
    tuple of int
        (rank of A_x, rank of A_{x+p})
    """
    if x.shape != p.shape:
        raise ValueError(f'x {x.shape} and p {p.shape} must match')
    n, d_n = x.shape
    scale = max(n, d_n)
    a_x = (x @ w_q) @ (x @ w_k).T
    xp = x + p
    a_xp = (xp @ w_q) @ (xp @ w_k).T
    return (numerical_rank(a_x, tol, scale), numerical_rank(a_xp, tol, scale))


def run_rank_trials(exp, seed=0):
    """Repeat :func:`measure_ranks` over independent draws

    Returns
    -------
    pandas.DataFrame
        Columns trial, rank_x, rank_xp
    """
    rows = []
    for trial in range(exp.trials):
        trial_seed = int(rng_stream(seed, 'trial', trial).integers(2**31))
        x = sample_id_embeddings(exp, trial_seed)
        p = sample_wholeword_embeddings(exp, trial_seed)
        w_q, w_k = sample_projections(exp, trial_seed)
        rows.append((trial,) + measure_ranks(x, p, w_q, w_k, exp.tol))
    return pd.DataFrame(rows, columns=['trial', 'rank_x', 'rank_xp'])
