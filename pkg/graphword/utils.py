"""Seeding and threading helpers shared by all modules"""

import os
import zlib

import numpy as np

THREADS_ENV = 'GRAPHWORD_THREADS'


def rng_stream(seed, name, *keys):
    """Named random sub-stream derived from one seed

    Streams with different names are statistically independent, so adding
    draws to one stream (e.g., more nodes) never perturbs another (e.g.,
    omega0).

    Parameters
    ----------
    seed : int
        Run seed
    name : str
        Stream name, e.g. 'init', 'omega0', 'negatives', 'shuffle'
    *keys : int
        Extra integer keys (e.g., a user index) for per-item streams

    Returns
    -------
    numpy.random.Generator
        Seeded generator
    """
    key = [zlib.crc32(name.encode('utf-8'))] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(int(seed),
                                                        spawn_key=key))


def stream_seed(seed, name):
    """Integer seed for libraries that take plain seeds (e.g., torch)"""
    return int(rng_stream(seed, name).integers(0, 2**31 - 1))


def max_threads():
    """Thread cap from ``GRAPHWORD_THREADS``, default: CPU count

    Raises
    ------
    ValueError
        The variable is set but is not a positive integer
    """
    value = os.environ.get(THREADS_ENV)
    if value is None or value.strip() == '':
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise ValueError(f'{THREADS_ENV} must be a positive integer, '
                         f'got {value!r}') from None
    if n < 1:
        raise ValueError(f'{THREADS_ENV} must be a positive integer, '
                         f'got {value!r}')
    return n
