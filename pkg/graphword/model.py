"""Desk-scale encoder-decoder with whole-word-augmented inputs

The encoder reads ``X_p + alpha * X_omega``: token embeddings (with the
task's learnable prompt vectors at the marker positions) plus the prompt's
whole-word matrix. The decoder reads plain token embeddings and emits item
IDs subword by subword.
"""
import copy
import dataclasses
import logging
import math
import warnings

import numpy as np
import pandas as pd
import torch
import torch.nn as nn

from .errors import EmptyOutputError, NumericFault, TrainingFault
from .ranking import RankedList
from .utils import rng_stream, stream_seed
from .wholeword import (BOS, EOS, KIND_NONE, NONE, PAD, TASKS,
                        WholeWordScheme, get_vocab, parse_tokens,
                        target_tokens)

logger = logging.getLogger(__name__)

_INDEX_MODES = ('incremental', 'random_index')
INCORPORATIONS = ('add', 'prepend', 'wholeword_only')


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    """Architecture and decoding settings

    Attributes
    ----------
    dim : int
        Embedding and hidden width d_n. Default: 128
    heads : int
        Attention heads; must divide `dim`. Default: 4
    enc_layers, dec_layers : int
        Encoder and decoder depth. Default: 2 each
    ffn_dim : int
        Feed-forward width; 0 means ``4 * dim``. Default: 0
    alpha : float
        Whole-word scale. Default: 5
    beams : int
        Beam width. Default: 20
    dropout : float
        Dropout rate. Default: 0.1
    max_index : int
        Rows of the incremental whole-word table. Default: 22
    prompt_words : int
        Prompt vectors per task. Default: 3
    max_distance : int
        Clip distance of the relative position bias. Default: 32
    shared_qk_init : bool
        Start every self-attention with W_K equal to W_Q. Default: False
    incorporation : {'add', 'prepend', 'wholeword_only'}
        How whole-word vectors enter the encoder: added to the ID tokens,
        one vector per ID placed before the prompt, or alone without any
        token embeddings. Default: 'add'
    seed : int
        Initialization seed. Default: 0
    """
    dim: int = 128
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ffn_dim: int = 0
    alpha: float = 5.0
    beams: int = 20
    dropout: float = 0.1
    max_index: int = 22
    prompt_words: int = 3
    max_distance: int = 32
    shared_qk_init: bool = False
    incorporation: str = 'add'
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.heads < 1 or self.dim % self.heads:
            raise ValueError(f'dim ({self.dim}) must be a positive multiple '
                             f'of heads ({self.heads})')
        if self.alpha < 0:
            raise ValueError(f'alpha must be >= 0, got {self.alpha}')
        if self.beams < 1:
            raise ValueError(f'beams must be >= 1, got {self.beams}')
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise ValueError('enc_layers and dec_layers must be >= 1')
        if not 0 <= self.dropout < 1:
            raise ValueError(f'dropout must be in [0, 1), got '
                             f'{self.dropout}')
        if self.max_index < 2:
            raise ValueError('max_index must be >= 2')
        if self.incorporation not in INCORPORATIONS:
            raise ValueError(f'incorporation must be one of '
                             f'{INCORPORATIONS}, got {self.incorporation!r}')

    @property
    def ffn_width(self):
        return self.ffn_dim or 4 * self.dim

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values):
        return cls(**values)


class Attention(nn.Module):
    """Multi-head attention with an optional relative position bias"""

    def __init__(self, dim, heads, dropout=0.0, max_distance=None):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.w_q = nn.Linear(dim, dim, bias=False)
        self.w_k = nn.Linear(dim, dim, bias=False)
        self.w_v = nn.Linear(dim, dim, bias=False)
        self.w_o = nn.Linear(dim, dim, bias=False)
        self.dropout = nn.Dropout(dropout)
        self.max_distance = max_distance
        self.rel_bias = (nn.Embedding(2 * max_distance + 1, heads)
                         if max_distance else None)

    def _split(self, x):
        b, t, _ = x.shape
        return x.view(b, t, self.heads, self.head_dim).transpose(1, 2)

    def logits(self, x, context=None):
        """Pre-softmax scores, shape (batch, heads, len_x, len_context)"""
        context = x if context is None else context
        q = self._split(self.w_q(x))
        k = self._split(self.w_k(context))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if self.rel_bias is not None:
            pos_q = torch.arange(x.shape[1], device=x.device)
            pos_k = torch.arange(context.shape[1], device=x.device)
            rel = (pos_k[None, :] - pos_q[:, None]).clamp(
                -self.max_distance, self.max_distance) + self.max_distance
            scores = scores + self.rel_bias(rel).permute(2, 0, 1)
        return scores

    def forward(self, x, context=None, mask=None):
        scores = self.logits(x, context)
        if mask is not None:
            scores = scores.masked_fill(~mask, float('-inf'))
        attn = self.dropout(torch.softmax(scores, dim=-1))
        context = x if context is None else context
        out = attn @ self._split(self.w_v(context))
        b, _, t, _ = out.shape
        return self.w_o(out.transpose(1, 2).reshape(b, t, -1))


def _feed_forward(config):
    return nn.Sequential(nn.Linear(config.dim, config.ffn_width), nn.ReLU(),
                         nn.Dropout(config.dropout),
                         nn.Linear(config.ffn_width, config.dim))


class EncoderLayer(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.norm1 = nn.LayerNorm(config.dim)
        self.attn = Attention(config.dim, config.heads, config.dropout,
                              config.max_distance)
        self.norm2 = nn.LayerNorm(config.dim)
        self.ffn = _feed_forward(config)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x, mask):
        x = x + self.dropout(self.attn(self.norm1(x), mask=mask))
        return x + self.dropout(self.ffn(self.norm2(x)))


class DecoderLayer(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.norm1 = nn.LayerNorm(config.dim)
        self.attn = Attention(config.dim, config.heads, config.dropout,
                              config.max_distance)
        self.norm2 = nn.LayerNorm(config.dim)
        self.cross = Attention(config.dim, config.heads, config.dropout)
        self.norm3 = nn.LayerNorm(config.dim)
        self.ffn = _feed_forward(config)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, y, memory, self_mask, memory_mask):
        y = y + self.dropout(self.attn(self.norm1(y), mask=self_mask))
        y = y + self.dropout(self.cross(self.norm2(y), memory,
                                        mask=memory_mask))
        return y + self.dropout(self.ffn(self.norm3(y)))


class MicroModel(nn.Module):
    """Encoder-decoder over the ID subword vocabulary

    Parameters
    ----------
    config : ModelConfig
        Architecture

    Notes
    -----
    Graph-aware tables are read from the scheme at every call and never
    become parameters, so they stay frozen. Index-based schemes
    ('incremental', 'random_index') gather from the trainable
    ``index_embeddings`` table; the scheme only supplies the indices.
    """
    def __init__(self, config):
        super().__init__()
        self.config = config
        self.vocab = get_vocab(config.prompt_words)
        if self.vocab.digital_count >= config.dim:
            warnings.warn(f'{self.vocab.digital_count} digit subwords is not '
                          f'below dim={config.dim}; the ID embedding rank is '
                          'not bottlenecked by the digit vocabulary')

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(stream_seed(config.seed, 'model'))
            self.token_embedding = nn.Embedding(len(self.vocab), config.dim)
            self.prompt_vectors = nn.Parameter(
                torch.randn(len(TASKS), config.prompt_words, config.dim))
            self.index_embeddings = nn.Parameter(
                torch.randn(config.max_index, config.dim))
            self.encoder = nn.ModuleList(EncoderLayer(config)
                                         for _ in range(config.enc_layers))
            self.decoder = nn.ModuleList(DecoderLayer(config)
                                         for _ in range(config.dec_layers))
            self.enc_norm = nn.LayerNorm(config.dim)
            self.dec_norm = nn.LayerNorm(config.dim)

        if config.shared_qk_init:
            with torch.no_grad():
                for layer in list(self.encoder) + list(self.decoder):
                    layer.attn.w_k.weight.copy_(layer.attn.w_q.weight)

        self.register_buffer('marker_slot',
                             torch.from_numpy(self.vocab.marker_slot),
                             persistent=False)
        self._tables = {}

    @property
    def dtype(self):
        return self.token_embedding.weight.dtype

    def _table(self, scheme):
        if scheme.dim != self.config.dim:
            raise ValueError(f'scheme width {scheme.dim} does not match model '
                             f'dim {self.config.dim}')
        if scheme.mode in _INDEX_MODES:
            if scheme.max_index > self.config.max_index:
                raise ValueError(f'scheme needs {scheme.max_index} index rows,'
                                 f' model has {self.config.max_index}')
            return self.index_embeddings
        cached = self._tables.get(self.dtype)
        if cached is None or cached[0] is not scheme:
            cached = (scheme, torch.as_tensor(scheme.table, dtype=self.dtype))
            self._tables[self.dtype] = cached
        return cached[1]

    def index_scheme(self, shuffled=False, seed=0):
        """Index-based scheme over the current (trained) index table"""
        table = self.index_embeddings.detach().cpu().double().numpy()
        return WholeWordScheme.incremental(self.config.max_index,
                                           self.config.dim, seed, table,
                                           shuffled=shuffled)

    def token_rows(self, tokens):
        """Token embeddings with prompt vectors at the marker slots"""
        x = self.token_embedding(tokens)
        slot = self.marker_slot[tokens]
        prompts = self.prompt_vectors.reshape(-1, self.config.dim)
        return torch.where((slot >= 0)[..., None], prompts[slot.clamp(min=0)],
                           x)

    def embed(self, tokens, wholeword, alpha):
        """``X_p + alpha * X_omega`` for padded id and whole-word tensors"""
        return self.token_rows(tokens) + alpha * wholeword

    def encoder_input(self, prompts, scheme, alpha=None):
        """Encoder input and key mask under ``config.incorporation``

        'add' sums token and whole-word rows. 'prepend' puts one whole-word
        vector per ID in front of the plain token rows. 'wholeword_only'
        keeps the whole-word rows of ID tokens and masks every other token.

        Returns
        -------
        x : torch.Tensor
            Shape (batch, length, dim)
        key_mask : torch.Tensor
            Bool, shape (batch, length)
        """
        alpha = self.config.alpha if alpha is None else alpha
        tokens, wholeword, key_mask = self.prepare(prompts, scheme)
        mode = self.config.incorporation
        if mode == 'add':
            return self.embed(tokens, wholeword, alpha), key_mask
        if mode == 'wholeword_only':
            is_id = torch.zeros_like(key_mask)
            for b, prompt in enumerate(prompts):
                is_id[b, :len(prompt)] = torch.from_numpy(
                    np.asarray(prompt.kinds) != KIND_NONE)
            return alpha * wholeword * is_id[..., None], is_id

        plain = self.token_rows(tokens)
        rows = []
        for b, prompt in enumerate(prompts):
            app = np.asarray(prompt.appearance)
            starts = torch.from_numpy(np.flatnonzero(
                (app != NONE) & (app != np.r_[NONE, app[:-1]])))
            rows.append(torch.cat([alpha * wholeword[b, starts],
                                   plain[b, :len(prompt)]]))
        lengths = torch.tensor([len(r) for r in rows])
        x = nn.utils.rnn.pad_sequence(rows, batch_first=True)
        key_mask = torch.arange(x.shape[1])[None, :] < lengths[:, None]
        return x, key_mask

    def prepare(self, prompts, scheme):
        """Pad prompts into token ids, whole-word rows and a key mask"""
        length = max(len(p) for p in prompts)
        tokens = torch.full((len(prompts), length), PAD, dtype=torch.long)
        rows = torch.zeros((len(prompts), length), dtype=torch.long)
        for b, prompt in enumerate(prompts):
            tokens[b, :len(prompt)] = torch.from_numpy(
                self.vocab.encode(prompt.tokens))
            rows[b, :len(prompt)] = torch.from_numpy(scheme.indices(prompt))
        wholeword = self._table(scheme)[rows]
        return tokens, wholeword, tokens != PAD

    def encode(self, prompts, scheme, alpha=None):
        """Encoder memory and key mask for a list of prompts"""
        x, key_mask = self.encoder_input(prompts, scheme, alpha)
        mask = key_mask[:, None, None, :]
        for layer in self.encoder:
            x = layer(x, mask)
        return self.enc_norm(x), key_mask

    def decode(self, memory, memory_mask, dec_in):
        """Next-token logits for every decoder position"""
        t = dec_in.shape[1]
        causal = torch.tril(torch.ones(t, t, dtype=torch.bool))
        self_mask = causal[None, None] & (dec_in != PAD)[:, None, None, :]
        memory_mask = memory_mask[:, None, None, :]
        y = self.token_embedding(dec_in)
        for layer in self.decoder:
            y = layer(y, memory, self_mask, memory_mask)
        y = self.dec_norm(y)
        return y @ self.token_embedding.weight.T / math.sqrt(self.config.dim)

    def forward(self, prompts, scheme, dec_in, alpha=None):
        memory, key_mask = self.encode(prompts, scheme, alpha)
        if memory.shape[0] != dec_in.shape[0]:
            memory = memory.expand(dec_in.shape[0], -1, -1)
            key_mask = key_mask.expand(dec_in.shape[0], -1)
        return self.decode(memory, key_mask, dec_in)


def embed_input(model, prompt, scheme, alpha=None):
    """Encoder input of one prompt

    ``X_p + alpha * X_omega`` under the default 'add' incorporation; the
    other modes follow :meth:`MicroModel.encoder_input`.

    Parameters
    ----------
    model : MicroModel
        Model supplying token embeddings and prompt vectors
    prompt : TokenizedPrompt
        Prompt
    scheme : WholeWordScheme
        Whole-word source
    alpha : float, optional
        Scale. Default: ``model.config.alpha``

    Returns
    -------
    torch.Tensor
        Shape (length, dim); length is len(prompt) plus the number of IDs
        when whole-word vectors are prepended
    """
    return model.encoder_input([prompt], scheme, alpha)[0][0]


def _check_attention_shapes(x_i, w_i, x_j, w_j, w_q, w_k):
    vecs = [np.asarray(v, dtype=np.float64) for v in (x_i, w_i, x_j, w_j)]
    w_q = np.asarray(w_q, dtype=np.float64)
    w_k = np.asarray(w_k, dtype=np.float64)
    dim = vecs[0].shape
    if any(v.shape != dim or v.ndim != 1 for v in vecs):
        raise ValueError('x_i, omega_i, x_j, omega_j must be vectors of one '
                         f'length, got {[v.shape for v in vecs]}')
    if w_q.shape != w_k.shape or w_q.ndim != 2 or w_q.shape[0] != dim[0]:
        raise ValueError(f'W_Q {w_q.shape} and W_K {w_k.shape} must both be '
                         f'({dim[0]}, d_h)')
    return vecs, w_q, w_k


def attention_scores(x_i, omega_i, x_j, omega_j, w_q, w_k):
    """Unscaled score ``((x_i + omega_i) W_Q) . ((x_j + omega_j) W_K)``

    Parameters
    ----------
    x_i, omega_i, x_j, omega_j : array-like
        Token and whole-word vectors of length d_n
    w_q, w_k : array-like
        Projections of shape (d_n, d_h)

    Returns
    -------
    float
        Pre-softmax score

    Raises
    ------
    ValueError
        Inconsistent shapes
    """
    (x_i, omega_i, x_j, omega_j), w_q, w_k = _check_attention_shapes(
        x_i, omega_i, x_j, omega_j, w_q, w_k)
    return float(((x_i + omega_i) @ w_q) @ ((x_j + omega_j) @ w_k))


def decompose_attention(x_i, omega_i, x_j, omega_j, w_q, w_k):
    """Split :func:`attention_scores` into its four bilinear terms

    Returns
    -------
    tuple of float
        (token-token correlation, token-to-whole-word cross term,
        whole-word-to-token cross term, whole-word correlation); they sum
        to the full score
    """
    (x_i, omega_i, x_j, omega_j), w_q, w_k = _check_attention_shapes(
        x_i, omega_i, x_j, omega_j, w_q, w_k)
    m = w_q @ w_k.T
    return (float(x_i @ m @ x_j), float(x_i @ m @ omega_j),
            float(omega_i @ m @ x_j), float(omega_i @ m @ omega_j))


def attention_projections(model, layer=0, head=None):
    """W_Q and W_K of an encoder self-attention as (d_n, d_h) arrays

    Parameters
    ----------
    model : MicroModel
        Model
    layer : int, optional
        Encoder layer. Default: 0
    head : int, optional
        Single head; None concatenates all heads. Default: None
    """
    attn = model.encoder[layer].attn
    w_q = attn.w_q.weight.detach().cpu().double().numpy().T
    w_k = attn.w_k.weight.detach().cpu().double().numpy().T
    if head is not None:
        cols = slice(head * attn.head_dim, (head + 1) * attn.head_dim)
        w_q, w_k = w_q[:, cols], w_k[:, cols]
    return w_q, w_k


@dataclasses.dataclass
class TrainBatch:
    """Single-task batch of (prompt, target) pairs

    Attributes
    ----------
    task : str
        Task of every pair
    prompts : list of TokenizedPrompt
        Encoder inputs
    targets : list of list of str
        Decoder targets ending in ``</s>``
    """
    task: str
    prompts: list
    targets: list

    def __post_init__(self):
        if len(self.prompts) != len(self.targets) or not self.prompts:
            raise ValueError('a batch needs as many targets as prompts and '
                             'at least one pair')
        if any(p.task != self.task for p in self.prompts):
            raise ValueError(f'every prompt of a {self.task!r} batch must '
                             'belong to that task')

    def __len__(self):
        return len(self.prompts)


def make_batches(task, examples, batch_size, rng=None):
    """Cut (prompt, target) pairs into batches, shuffled if `rng` is given"""
    order = np.arange(len(examples))
    if rng is not None:
        rng.shuffle(order)
    out = []
    for start in range(0, len(order), batch_size):
        chunk = [examples[i] for i in order[start:start + batch_size]]
        out.append(TrainBatch(task, [p for p, _ in chunk],
                              [t for _, t in chunk]))
    return out


def _target_tensors(vocab, targets):
    length = max(len(t) for t in targets)
    tgt = torch.full((len(targets), length), PAD, dtype=torch.long)
    for b, target in enumerate(targets):
        tgt[b, :len(target)] = torch.from_numpy(vocab.encode(target))
    dec_in = torch.cat([torch.full((len(targets), 1), BOS, dtype=torch.long),
                        tgt[:, :-1]], dim=1)
    dec_in[dec_in == EOS] = PAD
    return dec_in, tgt


def token_log_probs(model, prompts, targets, scheme, alpha=None):
    """Teacher-forced log-probability of every target token

    Returns
    -------
    tuple of torch.Tensor
        (log-probs of shape (batch, len), mask of real target tokens)
    """
    dec_in, tgt = _target_tensors(model.vocab, targets)
    logits = model(prompts, scheme, dec_in, alpha)
    logp = torch.log_softmax(logits, dim=-1)
    picked = logp.gather(-1, tgt[..., None])[..., 0]
    return picked, tgt != PAD


def forward_loss(model, batch, scheme, alpha=None):
    """Mean over pairs of the per-token negative log-likelihood

    Parameters
    ----------
    model : MicroModel
        Model
    batch : TrainBatch
        Pairs
    scheme : WholeWordScheme
        Whole-word source for the batch's task
    alpha : float, optional
        Scale. Default: ``model.config.alpha``

    Returns
    -------
    torch.Tensor
        Scalar loss

    Raises
    ------
    NumericFault
        The loss is NaN or infinite
    """
    logp, mask = token_log_probs(model, batch.prompts, batch.targets, scheme,
                                 alpha)
    per_pair = -(logp * mask).sum(dim=1) / mask.sum(dim=1)
    loss = per_pair.mean()
    if not torch.isfinite(loss):
        raise NumericFault(f'non-finite loss on a {batch.task!r} batch')
    return loss


@dataclasses.dataclass
class TaskData:
    """Training material of one task

    Attributes
    ----------
    task : str
        Task name
    train, val : list of tuple
        (prompt, target tokens) pairs
    scheme : WholeWordScheme
        Whole-word source
    alpha : float, optional
        Scale; None uses the model's. Default: None
    """
    task: str
    train: list
    val: list
    scheme: object
    alpha: float = None


@dataclasses.dataclass(frozen=True)
class TrainSchedule:
    """Optimization settings

    Attributes
    ----------
    epochs : int
        Maximum epochs. Default: 20
    patience : int
        Epochs without validation improvement before stopping. Default: 5
    lr : float
        Learning rate. Default: 0.01
    batch_size : int
        Pairs per batch. Default: 64
    weight_decay : float
        Decoupled weight decay. Default: 0.01
    divergence : float
        Abort once a batch loss exceeds this multiple of the first batch
        loss. Default: 10
    seed : int
        Shuffle and dropout seed. Default: 0
    """
    epochs: int = 20
    patience: int = 5
    lr: float = 0.01
    batch_size: int = 64
    weight_decay: float = 0.01
    divergence: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.patience < 1 or self.batch_size < 1:
            raise ValueError('epochs must be >= 0, patience and batch_size '
                             '>= 1')
        if not self.lr > 0:
            raise ValueError(f'lr must be > 0, got {self.lr}')


class EarlyStopping(object):
    """Track the best validation loss and count epochs without improvement

    Parameters
    ----------
    patience : int, optional
        Non-improving epochs tolerated. Default: 5
    """
    def __init__(self, patience=5):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = None
        self.bad_epochs = 0

    def step(self, epoch, loss):
        """Record an epoch; True if it is the new best"""
        if loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = loss, epoch, 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self):
        return self.bad_epochs >= self.patience


@dataclasses.dataclass
class TrainResult:
    """Outcome of :func:`train`

    Attributes
    ----------
    model : MicroModel
        Model with the best checkpoint loaded
    curve : pandas.DataFrame
        Columns epoch, task, loss; validation rows use task
        'val:<task>' and 'val:total'
    best_epoch : int or None
        Epoch of the kept checkpoint
    epochs_run : int
        Epochs completed
    """
    model: object
    curve: pd.DataFrame
    best_epoch: int
    epochs_run: int


def validation_loss(model, task_data, batch_size=64):
    """Mean pair loss over a task's validation pairs"""
    if not task_data.val:
        return math.nan
    model.eval()
    total = 0.0
    with torch.no_grad():
        for batch in make_batches(task_data.task, task_data.val, batch_size):
            loss = forward_loss(model, batch, task_data.scheme,
                                task_data.alpha)
            total += loss.item() * len(batch)
    return total / len(task_data.val)


def train(model, datasets, schedule=None):
    """Alternating multi-task training with early stopping

    Each round takes one batch from every task that still has batches, so
    a batch never mixes tasks. After each epoch the summed validation loss
    over tasks decides whether the epoch becomes the kept checkpoint;
    training stops after `patience` epochs without improvement.

    Parameters
    ----------
    model : MicroModel
        Model, trained in place
    datasets : list of TaskData
        One entry per task
    schedule : TrainSchedule, optional
        Settings. Default: TrainSchedule()

    Returns
    -------
    TrainResult
        Best model and loss curve

    Raises
    ------
    TrainingFault
        A batch loss exceeds ``divergence`` times the first batch loss
    NumericFault
        A loss becomes NaN or infinite
    """
    schedule = TrainSchedule() if schedule is None else schedule
    rows = []
    if schedule.epochs == 0:
        return TrainResult(model, pd.DataFrame(rows, columns=['epoch', 'task',
                                                              'loss']),
                           None, 0)

    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(params, lr=schedule.lr,
                                  weight_decay=schedule.weight_decay)
    shuffle = rng_stream(schedule.seed, 'shuffle')
    stopper = EarlyStopping(schedule.patience)
    best_state = copy.deepcopy(model.state_dict())
    first_loss = None
    epoch = 0

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(stream_seed(schedule.seed, 'dropout'))
        for epoch in range(1, schedule.epochs + 1):
            model.train()
            queues = {d.task: make_batches(d.task, d.train,
                                           schedule.batch_size, shuffle)
                      for d in datasets}
            sums = {d.task: [0.0, 0] for d in datasets}
            while any(queues.values()):
                for data in datasets:
                    if not queues[data.task]:
                        continue
                    batch = queues[data.task].pop(0)
                    loss = forward_loss(model, batch, data.scheme, data.alpha)
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()

                    value = loss.item()
                    if first_loss is None:
                        first_loss = value
                    elif value > schedule.divergence * first_loss:
                        raise TrainingFault(
                            f'loss {value:.4g} exceeds {schedule.divergence}x'
                            f' the initial {first_loss:.4g}')
                    sums[data.task][0] += value * len(batch)
                    sums[data.task][1] += len(batch)

            for task, (total, count) in sums.items():
                if count:
                    rows.append((epoch, task, total / count))

            val_total = 0.0
            has_val = any(d.val for d in datasets)
            for data in datasets:
                value = validation_loss(model, data, schedule.batch_size)
                if not math.isnan(value):
                    rows.append((epoch, f'val:{data.task}', value))
                    val_total += value
            if not has_val:
                # no held-out pairs: fall back to the training loss
                val_total = sum(t / c for t, c in sums.values() if c)
            rows.append((epoch, 'val:total', val_total))
            logger.info('epoch %d: validation loss %.4f', epoch, val_total)

            if stopper.step(epoch, val_total):
                best_state = copy.deepcopy(model.state_dict())
            if stopper.should_stop:
                logger.info('early stop at epoch %d (best %d)', epoch,
                            stopper.best_epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    curve = pd.DataFrame(rows, columns=['epoch', 'task', 'loss'])
    return TrainResult(model, curve, stopper.best_epoch, epoch)


@dataclasses.dataclass(frozen=True)
class Hypothesis:
    """Decoded token ids (without ``<s>``) and their summed log-prob"""
    tokens: tuple
    logprob: float
    finished: bool

    @property
    def score(self):
        """Length-normalized log-prob"""
        return self.logprob / max(len(self.tokens), 1)


def item_trie(vocab, items):
    """Allowed next token ids after every target prefix of `items`"""
    trie = {}
    for item in items:
        ids = tuple(int(i) for i in vocab.encode(target_tokens(int(item))))
        for cut in range(len(ids)):
            trie.setdefault(ids[:cut], set()).add(ids[cut])
    return trie


def greedy_decode(model, prompt, scheme, max_len=8, alpha=None):
    """Argmax decoding until ``</s>`` or `max_len` tokens

    Returns
    -------
    Hypothesis
        Decoded tokens
    """
    model.eval()
    with torch.no_grad():
        memory, key_mask = model.encode([prompt], scheme, alpha)
        seq, total = [BOS], 0.0
        for _ in range(max_len):
            logits = model.decode(memory, key_mask, torch.tensor([seq]))
            logp = torch.log_softmax(logits[0, -1].double(), dim=-1)
            token = int(torch.argmax(logp))
            seq.append(token)
            total += float(logp[token])
            if token == EOS:
                return Hypothesis(tuple(seq[1:]), total, True)
    return Hypothesis(tuple(seq[1:]), total, False)


def beam_search(model, prompt, scheme, beams=None, max_len=8, alpha=None,
                allowed_items=None):
    """Beam search over the vocabulary

    Every step keeps the `beams` best expansions by summed log-prob; those
    ending in ``</s>`` leave the beam as finished hypotheses. Search stops
    once `beams` hypotheses finished, nothing is left alive, or `max_len`
    is reached (unfinished survivors are then returned too).

    Parameters
    ----------
    model : MicroModel
        Model
    prompt : TokenizedPrompt
        Encoder input
    scheme : WholeWordScheme
        Whole-word source
    beams : int, optional
        Beam width. Default: ``model.config.beams``
    max_len : int, optional
        Maximum generated tokens. Default: 8
    alpha : float, optional
        Whole-word scale. Default: ``model.config.alpha``
    allowed_items : collection of int or dict, optional
        Restrict outputs to these items' token sequences, or pass a
        prebuilt :func:`item_trie`. Default: None

    Returns
    -------
    list of Hypothesis
        Best length-normalized score first
    """
    beams = model.config.beams if beams is None else beams
    if beams < 1:
        raise ValueError(f'beams must be >= 1, got {beams}')
    if allowed_items is None or isinstance(allowed_items, dict):
        trie = allowed_items
    else:
        trie = item_trie(model.vocab, allowed_items)
    vocab_size = len(model.vocab)
    model.eval()
    with torch.no_grad():
        memory, key_mask = model.encode([prompt], scheme, alpha)
        alive = [((BOS,), 0.0)]
        finished = []
        for _ in range(max_len):
            prefixes = torch.tensor([seq for seq, _ in alive])
            logits = model.decode(memory.expand(len(alive), -1, -1),
                                  key_mask.expand(len(alive), -1), prefixes)
            logp = torch.log_softmax(logits[:, -1].double(), dim=-1)
            if trie is not None:
                allowed = torch.zeros_like(logp, dtype=torch.bool)
                for b, (seq, _) in enumerate(alive):
                    nxt = list(trie.get(seq[1:], ()))
                    allowed[b, nxt] = True
                logp = logp.masked_fill(~allowed, float('-inf'))
            scores = torch.tensor([s for _, s in alive], dtype=torch.float64)
            total = (logp + scores[:, None]).reshape(-1)
            top = torch.topk(total, min(beams, total.numel()))

            next_alive = []
            for value, flat in zip(top.values.tolist(), top.indices.tolist()):
                if value == float('-inf'):
                    break
                row, token = divmod(flat, vocab_size)
                seq = alive[row][0] + (token,)
                if token == EOS:
                    finished.append(Hypothesis(seq[1:], value, True))
                else:
                    next_alive.append((seq, value))
            alive = next_alive
            if len(finished) >= beams or not alive:
                break
        else:
            finished.extend(Hypothesis(seq[1:], s, False) for seq, s in alive)

    return sorted(finished, key=lambda h: -h.score)


def generate(model, prompt, scheme, beams=None, max_len=8, alpha=None,
             allowed_items=None):
    """Decode a ranked list of items with beam search

    Parameters
    ----------
    model, prompt, scheme, beams, max_len, alpha, allowed_items
        See :func:`beam_search`

    Returns
    -------
    RankedList
        Parsed items with length-normalized log-probs; beams that do not
        parse as ``item_<n>`` are dropped with a warning

    Raises
    ------
    EmptyOutputError
        No beam parses as an item
    """
    hyps = beam_search(model, prompt, scheme, beams, max_len, alpha,
                       allowed_items)
    items, scores, dropped = [], [], 0
    for hyp in hyps:
        try:
            if not hyp.finished:
                raise ValueError('unfinished')
            kind, number = parse_tokens(model.vocab.decode(hyp.tokens))
            if kind != 'item':
                raise ValueError('not an item')
        except ValueError:
            dropped += 1
            continue
        items.append(number)
        scores.append(hyp.score)

    if dropped:
        warnings.warn(f'dropped {dropped} of {len(hyps)} beams that do not '
                      'parse as items')
    if not items:
        raise EmptyOutputError(f'none of {len(hyps)} beams parse as an item')
    return RankedList.from_scores(items, scores)


def score_candidates(model, prompt, scheme, candidates, alpha=None):
    """Rank candidates by their length-normalized log-likelihood

    Parameters
    ----------
    model : MicroModel
        Model
    prompt : TokenizedPrompt
        Encoder input (e.g., a direct recommendation prompt)
    scheme : WholeWordScheme
        Whole-word source
    candidates : sequence of int
        Items to score
    alpha : float, optional
        Scale. Default: ``model.config.alpha``

    Returns
    -------
    RankedList
        All candidates, best first
    """
    model.eval()
    targets = [target_tokens(int(c)) for c in candidates]
    with torch.no_grad():
        memory, key_mask = model.encode([prompt], scheme, alpha)
        dec_in, tgt = _target_tensors(model.vocab, targets)
        logits = model.decode(memory.expand(len(targets), -1, -1),
                              key_mask.expand(len(targets), -1), dec_in)
        logp = torch.log_softmax(logits.double(), dim=-1)
        picked = logp.gather(-1, tgt[..., None])[..., 0]
        mask = tgt != PAD
        scores = (picked * mask).sum(dim=1) / mask.sum(dim=1)
    return RankedList.from_scores(candidates, scores.tolist())
