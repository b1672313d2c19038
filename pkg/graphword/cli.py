"""Command line interface

Every subcommand reads and writes artifacts in one output directory::

    graphword synth --out run            # run/interactions.tsv
    graphword ingest run/interactions.tsv --out run
    graphword propagate --out run        # run/omega.elmw, run/omega0.elmw
    graphword train --out run            # run/model.elmm, run/loss.csv
    graphword eval --out run             # run/metrics.csv
    graphword export --out run --plot    # run/embeddings.tsv (+ figures)
    graphword rank-check --out run       # run/rank.csv
    graphword sweep --param alpha --values 1 5 11 --out run  # run/sweep.csv

Exit codes: 2 for configuration errors, 3 for input/output errors, 4 for
numerical failures.
"""
import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd
import torch

from . import __version__
from .config import RunConfig, read_config, write_config
from .datasets import (block_density, block_labels, make_block_corpus,
                       write_interactions)
from .errors import ConfigError, FormatError, GraphwordError
from .experiments import SWEEP_PARAMS, fit, score, sensitivity_sweep
from .formats import (load_checkpoint, read_embeddings, save_checkpoint,
                      write_embeddings)
from .ingest import (build_graph, make_splits, parse_interactions,
                     read_edge_list, read_split_manifest,
                     sample_direct_candidates, write_edge_list, write_id_map,
                     write_split_manifest)
from .propagation import (OmegaTable, PropagationConfig,
                          random_feature_propagation)
from .rank_analysis import RankExperiment, run_rank_trials
from .utils import max_threads

logger = logging.getLogger(__name__)

SPLITS = 'splits.tsv'
GRAPH = 'graph.tsv'
IDS = 'ids.tsv'
OMEGA = 'omega.elmw'
OMEGA0 = 'omega0.elmw'
MODEL = 'model.elmm'
LOSS = 'loss.csv'
METRICS = 'metrics.csv'
RANK = 'rank.csv'
SWEEP = 'sweep.csv'
EMBEDDINGS = 'embeddings.tsv'
INTERACTIONS = 'interactions.tsv'


def _load_config(args):
    config = read_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def _out_dir(args, config):
    out = args.out or config.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def _path(out, name):
    return os.path.join(out, name)


def _load_omega(out):
    rows = read_embeddings(_path(out, OMEGA)).astype(np.float64)
    omega0 = read_embeddings(_path(out, OMEGA0))[0].astype(np.float64)
    graph = read_edge_list(_path(out, GRAPH))
    if rows.shape[0] != graph.num_nodes:
        raise FormatError(f'{OMEGA} has {rows.shape[0]} rows, the graph '
                          f'has {graph.num_nodes} nodes')
    return OmegaTable(rows, omega0, graph.num_users, graph.num_items)


def cmd_synth(args):
    """Write a block-model corpus"""
    config = _load_config(args)
    out = _out_dir(args, config)
    log = make_block_corpus(args.blocks, args.users, args.items,
                            args.per_user, args.p_in, config.seed)
    write_interactions(log, _path(out, INTERACTIONS))
    density = block_density(build_graph(make_splits(log)),
                            block_labels(args.users, args.blocks),
                            block_labels(args.items, args.blocks))
    logger.info('block densities (training edges):\n%s',
                np.array2string(density, precision=3))
    return 0


def cmd_ingest(args):
    """Parse a log into split, graph and id-map files"""
    config = _load_config(args)
    out = _out_dir(args, config)
    source = args.interactions or config.data_path
    if not source:
        raise ConfigError('no interaction file given (argument or data_path)')
    log = parse_interactions(source)
    splits = make_splits(log)
    splits = sample_direct_candidates(splits, config.num_negatives,
                                      config.seed)
    write_split_manifest(splits, _path(out, SPLITS))
    write_edge_list(build_graph(splits), _path(out, GRAPH))
    write_id_map(log, _path(out, IDS))
    write_config(config, _path(out, 'run.cfg'))
    return 0


def cmd_propagate(args):
    """Random feature propagation over the training graph"""
    config = _load_config(args)
    out = _out_dir(args, config)
    graph = read_edge_list(_path(out, GRAPH))
    omega = random_feature_propagation(
        graph, PropagationConfig(config.sigma, config.gcn_layers, config.dim,
                                 config.seed))
    write_embeddings(_path(out, OMEGA), omega.rows)
    write_embeddings(_path(out, OMEGA0), omega.omega0[None, :])
    return 0


def cmd_train(args):
    """Multi-task training; writes the checkpoint and loss curve"""
    config = _load_config(args)
    out = _out_dir(args, config)
    splits = read_split_manifest(_path(out, SPLITS))
    omega = _load_omega(out)
    result = fit(splits, omega, config)
    save_checkpoint(result.model, _path(out, MODEL))
    result.curve.to_csv(_path(out, LOSS), index=False, lineterminator='\n')
    logger.info('best epoch %s of %d', result.best_epoch, result.epochs_run)
    return 0


def cmd_eval(args):
    """HR@k and NDCG@k of direct and sequential recommendation"""
    config = _load_config(args)
    out = _out_dir(args, config)
    splits = read_split_manifest(_path(out, SPLITS))
    omega = _load_omega(out)
    model = load_checkpoint(_path(out, MODEL))

    frames = []
    for task in ('direct', 'sequential'):
        report = score(model, splits, omega, config, task)
        print(report.table())
        frame = report.to_frame()
        frame.insert(0, 'task', task)
        frames.append(frame)
    pd.concat(frames).to_csv(_path(out, METRICS), index=False,
                             lineterminator='\n')
    return 0


def cmd_sweep(args):
    """Retrain per value of one hyperparameter; writes one metric block each"""
    config = _load_config(args)
    out = _out_dir(args, config)
    splits = read_split_manifest(_path(out, SPLITS))
    frame = sensitivity_sweep(splits, config, args.param, args.values,
                              args.task)
    print(frame.to_string(index=False))
    frame.to_csv(_path(out, SWEEP), index=False, lineterminator='\n')
    return 0


def cmd_rankcheck(args):
    """Attention rank with and without whole-word embeddings"""
    config = _load_config(args)
    out = _out_dir(args, config)
    try:
        exp = RankExperiment(args.n, args.d_x, args.d_p, args.d_n,
                             args.trials, args.tol)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    frame = run_rank_trials(exp, config.seed)
    frame.to_csv(_path(out, RANK), index=False, lineterminator='\n')
    logger.info('rank(A_x) in %s, rank(A_x+p) = %d in %d of %d trials',
                sorted(frame['rank_x'].unique()), exp.d_n,
                int((frame['rank_xp'] == exp.d_n).sum()), exp.trials)
    return 0


def cmd_export(args):
    """Write ``entity<TAB>vector`` rows of the graph-aware table"""
    config = _load_config(args)
    out = _out_dir(args, config)
    omega = _load_omega(out)
    names = [f'user_{u}' for u in range(omega.num_users)]
    names += [f'item_{v}' for v in range(omega.num_items)]
    vectors = [' '.join(f'{x:.9g}' for x in row)
               for row in omega.rows.astype(np.float32)]
    pd.DataFrame({'entity': names, 'vector': vectors}).to_csv(
        _path(out, EMBEDDINGS), sep='\t', index=False, lineterminator='\n')

    if args.plot:
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt
        from .plotting import plot_embedding_projection, plot_loss_curve

        fig, ax = plt.subplots(figsize=(5, 5))
        kinds = np.r_[np.zeros(omega.num_users), np.ones(omega.num_items)]
        plot_embedding_projection(omega.rows, kinds, ax=ax, cmap='coolwarm')
        fig.savefig(_path(out, 'embeddings.png'), dpi=150)
        plt.close(fig)
        if os.path.exists(_path(out, LOSS)):
            fig, ax = plt.subplots(figsize=(6, 4))
            plot_loss_curve(pd.read_csv(_path(out, LOSS)), ax=ax)
            fig.savefig(_path(out, 'loss.png'), dpi=150)
            plt.close(fig)
    return 0


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='flat key = value run configuration')
    common.add_argument('--seed', type=int, help='override the config seed')
    common.add_argument('--out', help='artifact directory (default: out_dir)')
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='more log output (repeat for debug)')

    parser = argparse.ArgumentParser(
        prog='graphword', description='Graph-aware whole-word embeddings '
        'for ID-based recommendation')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', parents=[common], help=cmd_synth.__doc__)
    p.add_argument('--blocks', type=int, default=4)
    p.add_argument('--users', type=int, default=200)
    p.add_argument('--items', type=int, default=100)
    p.add_argument('--per-user', type=int, default=20)
    p.add_argument('--p-in', type=float, default=0.9)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('ingest', parents=[common], help=cmd_ingest.__doc__)
    p.add_argument('interactions', nargs='?',
                   help='user<TAB>item<TAB>timestamp file')
    p.set_defaults(func=cmd_ingest)

    for name, func in (('propagate', cmd_propagate), ('train', cmd_train),
                       ('eval', cmd_eval)):
        sub.add_parser(name, parents=[common],
                       help=func.__doc__).set_defaults(func=func)

    p = sub.add_parser('sweep', parents=[common], help=cmd_sweep.__doc__)
    p.add_argument('--param', required=True, choices=SWEEP_PARAMS)
    p.add_argument('--values', required=True, type=float, nargs='+')
    p.add_argument('--task', default='sequential',
                   choices=('direct', 'sequential'))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('rank-check', parents=[common],
                       help=cmd_rankcheck.__doc__)
    p.add_argument('--n', type=int, default=64)
    p.add_argument('--d-x', type=int, default=6)
    p.add_argument('--d-p', type=int, default=32)
    p.add_argument('--d-n', type=int, default=16)
    p.add_argument('--trials', type=int, default=20)
    p.add_argument('--tol', type=float, default=1e-10)
    p.set_defaults(func=cmd_rankcheck)

    p = sub.add_parser('export', parents=[common], help=cmd_export.__doc__)
    p.add_argument('--plot', action='store_true',
                   help='also save embedding and loss figures')
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    """Run the command line interface; returns the exit code"""
    args = _parser().parse_args(argv)
    logging.basicConfig(level=max(logging.WARNING - 10 * args.verbose,
                                  logging.DEBUG),
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        torch.set_num_threads(max_threads())
        return args.func(args)
    except GraphwordError as err:
        logger.error('%s', err)
        return err.exit_code
    except OSError as err:
        logger.error('%s', err)
        return 3
    except ValueError as err:
        logger.error('%s', err)
        return 2


if __name__ == '__main__':
    sys.exit(main())
