"""Quick-look figures of training curves and whole-word embeddings"""

import matplotlib.pyplot as plt
import numpy as np


def _check_curve(curve):
    missing = {'epoch', 'task', 'loss'} - set(curve.columns)
    if missing:
        raise ValueError(f'curve is missing columns {sorted(missing)}')


def plot_loss_curve(curve, ax=None, validation=True):
    """Plot per-task loss against epoch

    Parameters
    ----------
    curve : pandas.DataFrame
        Columns epoch, task, loss as returned by :func:`graphword.model.train`
    ax : matplotlib.axes.Axes, optional
        Axes to draw on. Default: plt.gca()
    validation : bool, optional
        Include the ``val:`` rows as dashed lines. Default: True

    Returns
    -------
    matplotlib.axes.Axes
        Axes with one line per task
    """
    _check_curve(curve)
    ax = plt.gca() if ax is None else ax
    for task, group in curve.groupby('task', sort=True):
        is_val = task.startswith('val:')
        if is_val and not validation:
            continue
        ax.plot(group['epoch'], group['loss'], label=task,
                linestyle='--' if is_val else '-', marker='o', markersize=3)
    ax.set_xlabel('epoch')
    ax.set_ylabel('loss')
    ax.legend(frameon=False, fontsize=8)
    return ax


def project_2d(rows):
    """Project rows onto their top two principal axes

    Returns
    -------
    numpy.ndarray
        Shape (n, 2)
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError(f'need a 2-D array with >= 2 rows, got shape '
                         f'{rows.shape}')
    centered = rows - rows.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    out = centered @ vt[:2].T
    if out.shape[1] < 2:
        out = np.column_stack([out, np.zeros(len(out))])
    return out


def plot_embedding_projection(rows, labels=None, ax=None, cmap='tab10',
                              s=12):
    """Scatter a linear 2-D projection of embedding rows

    Communities that propagate to similar vectors show up as clusters.
    For nonlinear maps such as t-SNE, export the rows with
    ``graphword export`` instead.

    Parameters
    ----------
    rows : numpy.ndarray
        Embedding rows, shape (n, d)
    labels : array_like, optional
        Group of each row, used for colours. Default: None
    ax : matplotlib.axes.Axes, optional
        Axes to draw on. Default: plt.gca()
    cmap : matplotlib colormap name or object, optional
        Colormap for `labels`. Default: 'tab10'
    s : float, optional
        Marker size. Default: 12

    Returns
    -------
    matplotlib.axes.Axes
        Axes with the scatter
    """
    points = project_2d(rows)
    if labels is not None and len(labels) != len(points):
        raise ValueError(f'{len(labels)} labels for {len(points)} rows')
    ax = plt.gca() if ax is None else ax
    if labels is None:
        ax.scatter(points[:, 0], points[:, 1], s=s)
    else:
        ax.scatter(points[:, 0], points[:, 1], c=labels, cmap=cmap, s=s)
    ax.set_xticks([])
    ax.set_yticks([])
    return ax
