"""Random feature propagation over parameter-free LightGCN layers

Node embeddings start as i.i.d. normal noise and are smoothed over the
user-item graph, so that nodes close in the graph end up with similar rows.
Two equivalent forms are provided: a per-node neighbor sum
(:func:`propagate_layer`) and a sparse matrix product
(:func:`propagate_matrix`).
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .utils import max_threads, rng_stream

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PropagationConfig:
    """Propagation hyperparameters

    Attributes
    ----------
    sigma : float
        Standard deviation of the normal initialization. Default: 5
    layers : int
        Number of LightGCN layers L. Default: 4
    dim : int
        Embedding width. Default: 64
    seed : int
        Run seed. Default: 0
    """
    sigma: float = 5.0
    layers: int = 4
    dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f'sigma must be > 0, got {self.sigma}')
        if self.layers < 1:
            raise ValueError(f'layers must be >= 1, got {self.layers}')
        if self.dim < 1:
            raise ValueError(f'dim must be >= 1, got {self.dim}')


@dataclasses.dataclass
class LayerStack:
    """Per-layer embedding matrices E^(0)..E^(L)

    Attributes
    ----------
    layers : list of numpy.ndarray
        Each of shape (num_nodes, dim), float64
    sigma : float
        Initialization scale, reused for omega0
    seed : int
        Run seed, reused for omega0
    """
    layers: list
    sigma: float = 1.0
    seed: int = 0

    @property
    def depth(self):
        """Number of propagation steps applied (L)"""
        return len(self.layers) - 1


@dataclasses.dataclass
class OmegaTable:
    """Graph-aware whole-word table

    Attributes
    ----------
    rows : numpy.ndarray
        Shape (num_users + num_items, dim); users first
    omega0 : numpy.ndarray
        Shape (dim,); shared vector for all non-ID tokens
    num_users, num_items : int
        Block sizes of `rows`
    """
    rows: np.ndarray
    omega0: np.ndarray
    num_users: int
    num_items: int

    @property
    def dim(self):
        return self.rows.shape[1]

    @property
    def user_rows(self):
        return self.rows[:self.num_users]

    @property
    def item_rows(self):
        return self.rows[self.num_users:]

    def to_float32(self):
        """Copy with 32-bit rows, as stored on disk"""
        return OmegaTable(self.rows.astype(np.float32),
                          self.omega0.astype(np.float32),
                          self.num_users, self.num_items)


def init_embeddings(graph, config):
    """Draw layer 0 from N(0, sigma^2)

    Parameters
    ----------
    graph : InteractionGraph
        Graph that fixes the node count
    config : PropagationConfig
        Hyperparameters

    Returns
    -------
    LayerStack
        Stack holding only E^(0)
    """
    rng = rng_stream(config.seed, 'init')
    e0 = rng.normal(0.0, config.sigma, size=(graph.num_nodes, config.dim))
    return LayerStack([e0], config.sigma, config.seed)


def _check_rows(graph, emb):
    if emb.ndim != 2 or emb.shape[0] != graph.num_nodes:
        raise ValueError(f'embeddings have shape {emb.shape}, expected '
                         f'({graph.num_nodes}, dim)')


def _inv_sqrt_degrees(graph):
    deg = graph.degrees
    with np.errstate(divide='ignore'):
        return np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)


def propagate_layer(graph, emb, n_threads=None):
    """One LightGCN layer in per-node form

    Node n's new row is the sum over its neighbors m of
    ``E[m] / (sqrt(|N_n|) * sqrt(|N_m|))``. Isolated nodes map to zero.

    Parameters
    ----------
    graph : InteractionGraph
        Graph
    emb : numpy.ndarray
        Current layer, shape (num_nodes, dim)
    n_threads : int, optional
        Worker threads over row chunks. Default: ``GRAPHWORD_THREADS``

    Returns
    -------
    numpy.ndarray
        Next layer

    Raises
    ------
    ValueError
        `emb` rows do not match the node count
    """
    emb = np.asarray(emb, dtype=np.float64)
    _check_rows(graph, emb)
    inv_sqrt = _inv_sqrt_degrees(graph)
    indptr, indices = graph.adjacency.indptr, graph.adjacency.indices
    out = np.zeros_like(emb)

    def fill(start, stop):
        for node in range(start, stop):
            nbrs = indices[indptr[node]:indptr[node + 1]]
            if len(nbrs) == 0:
                continue
            weights = inv_sqrt[node] * inv_sqrt[nbrs]
            out[node] = weights @ emb[nbrs]

    n_threads = max_threads() if n_threads is None else n_threads
    n_threads = max(1, min(n_threads, graph.num_nodes))
    bounds = np.linspace(0, graph.num_nodes, n_threads + 1).astype(int)
    if n_threads == 1:
        fill(0, graph.num_nodes)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            # each worker writes a disjoint row range of `out`
            list(pool.map(fill, bounds[:-1], bounds[1:]))
    return out


def propagate_matrix(graph, emb0, layers):
    """Propagate `layers` times with ``D^-1/2 A D^-1/2``

    Parameters
    ----------
    graph : InteractionGraph
        Graph
    emb0 : numpy.ndarray or LayerStack
        Layer 0. A LayerStack passes on its sigma and seed
    layers : int
        Number of layers L

    Returns
    -------
    LayerStack
        Stack with L + 1 layers
    """
    if isinstance(emb0, LayerStack):
        sigma, seed = emb0.sigma, emb0.seed
        emb0 = emb0.layers[0]
    else:
        sigma, seed = 1.0, 0
    if layers < 0:
        raise ValueError(f'layers must be >= 0, got {layers}')

    emb = np.asarray(emb0, dtype=np.float64)
    _check_rows(graph, emb)
    norm = graph.normalized_adjacency()
    out = [emb]
    for _ in range(layers):
        emb = norm @ emb
        out.append(emb)
    return LayerStack(out, sigma, seed)


def aggregate_omega(stack, num_users=None):
    """Average the layers into the whole-word table

    Parameters
    ----------
    stack : LayerStack
        L + 1 layers
    num_users : int, optional
        User block size, needed to split users from items. Default: 0

    Returns
    -------
    OmegaTable
        Layer mean and an omega0 drawn from its own sub-stream
    """
    rows = np.mean(np.stack(stack.layers), axis=0)
    dim = rows.shape[1]
    omega0 = rng_stream(stack.seed, 'omega0').normal(0.0, stack.sigma,
                                                     size=dim)
    num_users = 0 if num_users is None else num_users
    return OmegaTable(rows, omega0, num_users, rows.shape[0] - num_users)


def random_feature_propagation(graph, config, form='matrix'):
    """Initialize, propagate and aggregate in one call

    Parameters
    ----------
    graph : InteractionGraph
        Training graph
    config : PropagationConfig
        Hyperparameters
    form : {'matrix', 'node'}, optional
        Which propagation form to use. Default: 'matrix'

    Returns
    -------
    OmegaTable
        Graph-aware table
    """
    stack = init_embeddings(graph, config)
    if form == 'matrix':
        stack = propagate_matrix(graph, stack, config.layers)
    elif form == 'node':
        for _ in range(config.layers):
            stack.layers.append(propagate_layer(graph, stack.layers[-1]))
    else:
        raise ValueError("form must be 'matrix' or 'node'")
    logger.info('propagated %d nodes over %d layers (sigma=%g, dim=%d)',
                graph.num_nodes, config.layers, config.sigma, config.dim)
    return aggregate_omega(stack, graph.num_users)


def influence_coefficient(graph, user_i, user_j):
    """Influence of second-order neighbor `user_j` on `user_i`

    ``1 / (sqrt(|N_i|) sqrt(|N_j|)) * sum_{k in N_i & N_j} 1 / |N_k|``,
    which is the (user_i, user_j) entry of the squared normalized
    adjacency.

    Parameters
    ----------
    graph : InteractionGraph
        Graph
    user_i, user_j : int
        User node indices

    Returns
    -------
    float
        Coefficient; 0 when either user is isolated

    Raises
    ------
    ValueError
        Either index is not a user
    """
    for u in (user_i, user_j):
        if not 0 <= u < graph.num_users:
            raise ValueError(f'{u} is not a user index')
    deg = graph.degrees
    if deg[user_i] == 0 or deg[user_j] == 0:
        return 0.0
    shared = np.intersect1d(graph.neighbors(user_i), graph.neighbors(user_j),
                            assume_unique=True)
    total = np.sum(1.0 / deg[shared])
    return float(total / (np.sqrt(deg[user_i]) * np.sqrt(deg[user_j])))


def block_similarity(rows, labels):
    """Mean cosine similarity within and across blocks

    Parameters
    ----------
    rows : numpy.ndarray
        Shape (n, dim)
    labels : array-like of int
        Block label of each row

    Returns
    -------
    tuple of float
        (within-block mean, cross-block mean); self-pairs excluded
    """
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    unit = np.divide(rows, norms, out=np.zeros_like(rows), where=norms > 0)
    cos = unit @ unit.T
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    cross = labels[:, None] != labels[None, :]
    return float(cos[same].mean()), float(cos[cross].mean())
