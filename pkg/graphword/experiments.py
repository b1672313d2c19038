"""Train-and-score helpers and hyperparameter sweeps

The command line interface runs the same steps one artifact at a time;
these functions keep everything in memory so a sweep can retrain a model
per setting.
"""
import logging

import pandas as pd

from .errors import ConfigError
from .evaluation import evaluate_task
from .ingest import build_graph
from .model import MicroModel, ModelConfig, TrainSchedule, train
from .propagation import PropagationConfig, random_feature_propagation
from .tasks import build_task_data, make_scheme
from .wholeword import max_index_for

logger = logging.getLogger(__name__)

#: Parameters :func:`sensitivity_sweep` can vary
SWEEP_PARAMS = ('alpha', 'rerank_n', 'sigma', 'gcn_layers')


def model_config(config):
    """:class:`~graphword.model.ModelConfig` matching a run configuration"""
    return ModelConfig(dim=config.dim, heads=config.heads,
                       enc_layers=config.enc_layers,
                       dec_layers=config.dec_layers,
                       alpha=config.alpha_direct, beams=config.beams,
                       dropout=config.dropout,
                       max_index=max_index_for(config.max_history),
                       prompt_words=config.prompt_words,
                       incorporation=config.incorporation, seed=config.seed)


def propagate(splits, config):
    """Graph-aware table of the training graph under `config`"""
    return random_feature_propagation(
        build_graph(splits),
        PropagationConfig(config.sigma, config.gcn_layers, config.dim,
                          config.seed))


def fit(splits, omega, config, tasks=None):
    """Train a fresh model

    Parameters
    ----------
    splits : SplitDataset
        Split with direct candidates when 'direct' is trained
    omega : OmegaTable
        Graph-aware table
    config : RunConfig
        Model sizes, schemes, scales and training schedule
    tasks : sequence of str, optional
        Tasks to train on. Default: all three

    Returns
    -------
    TrainResult
    """
    model = MicroModel(model_config(config))
    datasets = build_task_data(splits, model, omega, config, tasks)
    schedule = TrainSchedule(epochs=config.epochs, patience=config.patience,
                             lr=config.lr, batch_size=config.batch_size,
                             weight_decay=config.weight_decay,
                             seed=config.seed)
    return train(model, datasets, schedule)


def score(model, splits, omega, config, task):
    """:class:`~graphword.evaluation.MetricReport` of one task

    The direct task is never reranked; the sequential task uses
    ``config.rerank_n`` extra candidates.
    """
    if task == 'direct':
        mode, alpha, n_extra = config.dir_scheme, config.alpha_direct, 0
    elif task == 'sequential':
        mode, alpha = config.seq_scheme, config.alpha_sequential
        n_extra = config.rerank_n
    else:
        raise ValueError(f'cannot score task {task!r}')
    scheme = make_scheme(mode, model, omega, config.seed)
    return evaluate_task(model, scheme, splits, task, config.ks, n_extra,
                         config.beams, alpha, config.max_history)


def _with_setting(config, param, value, task):
    if param == 'alpha':
        name = 'alpha_direct' if task == 'direct' else 'alpha_sequential'
        return config.replace(**{name: float(value)})
    if param == 'sigma':
        return config.replace(sigma=float(value))
    return config.replace(**{param: int(value)})


def sensitivity_sweep(splits, config, param, values, task='sequential'):
    """Metrics of one task while a single hyperparameter varies

    'alpha' retrains with the task's scale set to each value. 'sigma' and
    'gcn_layers' redo the propagation and retrain. 'rerank_n' trains once
    and only changes the rerank rule, so it needs the sequential task.

    Parameters
    ----------
    splits : SplitDataset
        Split; needs direct candidates for the direct task
    config : RunConfig
        Base settings
    param : {'alpha', 'rerank_n', 'sigma', 'gcn_layers'}
        Swept parameter
    values : sequence of float
        Settings, evaluated in order
    task : {'direct', 'sequential'}
        Trained and scored task. Default: 'sequential'

    Returns
    -------
    pandas.DataFrame
        Columns param, setting, task, metric, k, value with one row per
        setting and metric

    Raises
    ------
    ConfigError
        Unknown parameter, empty `values`, a setting out of range, or
        'rerank_n' with the direct task
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f'param must be one of {SWEEP_PARAMS}, '
                          f'got {param!r}')
    if task not in ('direct', 'sequential'):
        raise ConfigError(f'cannot sweep task {task!r}')
    if param == 'rerank_n' and task != 'sequential':
        raise ConfigError('rerank_n only affects the sequential task')
    values = list(values)
    if not values:
        raise ConfigError('no sweep values given')

    settings = [_with_setting(config, param, v, task) for v in values]
    frames = []
    model = omega = None
    for value, run in zip(values, settings):
        if omega is None or param in ('sigma', 'gcn_layers'):
            omega = propagate(splits, run)
        if model is None or param != 'rerank_n':
            model = fit(splits, omega, run, tasks=[task]).model
        report = score(model, splits, omega, run, task)
        logger.info('%s=%s: %s', param, value, report.table())
        frame = report.to_frame()
        frame.insert(0, 'task', task)
        frame.insert(0, 'setting', value)
        frame.insert(0, 'param', param)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)
