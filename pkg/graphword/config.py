"""Run configuration read from flat ``key = value`` files"""
import configparser
import dataclasses

from .errors import ConfigError

_SECTION = 'run'
_SCHEMES = ('graph_aware', 'constant', 'incremental', 'random_index')
_INCORPORATIONS = ('add', 'prepend', 'wholeword_only')


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Hyperparameters and paths of one pipeline run

    Attributes
    ----------
    alpha_direct, alpha_sequential : float
        Whole-word scale per task. Default: 5, 11
    sigma : float
        Std of the random initial embeddings. Default: 5
    gcn_layers : int
        Propagation layers L. Default: 4
    rerank_n : int
        Extra rerank candidates N. Default: 10
    ks : tuple of int
        Metric cutoffs. Default: (5, 10)
    dim, heads, enc_layers, dec_layers : int
        Model sizes. Default: 128, 4, 2, 2
    beams : int
        Beam width. Default: 20
    lr : float
        Learning rate. Default: 0.01
    batch_size, patience, epochs : int
        Training schedule. Default: 64, 5, 20
    num_negatives : int
        Direct-task negatives per user. Default: 99
    max_history : int
        Items kept in sequential prompts. Default: 20
    prompt_words : int
        Prompt vectors per task. Default: 3
    dropout, weight_decay : float
        Regularization. Default: 0.1, 0.01
    seed : int
        Root seed of every random stream. Default: 0
    data_path, out_dir : str
        Interaction log and artifact directory. Default: '', 'out'
    seq_scheme, dir_scheme : str
        Whole-word scheme of the sequential and direct tasks. Default:
        'incremental', 'graph_aware'
    incorporation : str
        How whole-word vectors enter the encoder: 'add', 'prepend' or
        'wholeword_only'. Default: 'add'

    Raises
    ------
    ConfigError
        A value is out of range
    """
    alpha_direct: float = 5.0
    alpha_sequential: float = 11.0
    sigma: float = 5.0
    gcn_layers: int = 4
    rerank_n: int = 10
    ks: tuple = (5, 10)
    dim: int = 128
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    beams: int = 20
    lr: float = 0.01
    batch_size: int = 64
    patience: int = 5
    epochs: int = 20
    num_negatives: int = 99
    max_history: int = 20
    prompt_words: int = 3
    dropout: float = 0.1
    weight_decay: float = 0.01
    seed: int = 0
    data_path: str = ''
    out_dir: str = 'out'
    seq_scheme: str = 'incremental'
    dir_scheme: str = 'graph_aware'
    incorporation: str = 'add'

    def __post_init__(self):
        _check_range(self, 'alpha_direct', 0)
        _check_range(self, 'alpha_sequential', 0)
        _check_range(self, 'sigma', 0, strict=True)
        _check_range(self, 'gcn_layers', 0)
        _check_range(self, 'rerank_n', 0)
        for name in ('dim', 'heads', 'enc_layers', 'dec_layers', 'beams',
                     'batch_size', 'patience', 'num_negatives', 'max_history',
                     'prompt_words'):
            _check_range(self, name, 1)
        _check_range(self, 'epochs', 0)
        _check_range(self, 'lr', 0, strict=True)
        _check_range(self, 'weight_decay', 0)
        _check_range(self, 'seed', 0)
        if not 0 <= self.dropout < 1:
            raise ConfigError(f'dropout must be in [0, 1), got {self.dropout}')
        if self.dim % self.heads:
            raise ConfigError(f'dim ({self.dim}) must be a multiple of heads '
                              f'({self.heads})')
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError(f'ks must be positive cutoffs, got {self.ks}')
        if self.seq_scheme not in _SCHEMES:
            raise ConfigError(f'seq_scheme must be one of {_SCHEMES}')
        if self.dir_scheme not in ('graph_aware', 'constant'):
            raise ConfigError("dir_scheme must be 'graph_aware' or "
                              "'constant'")
        if self.incorporation not in _INCORPORATIONS:
            raise ConfigError(f'incorporation must be one of '
                              f'{_INCORPORATIONS}')

    def replace(self, **changes):
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as err:
            raise ConfigError(str(err)) from None


def _check_range(config, name, low, strict=False):
    value = getattr(config, name)
    if value < low or (strict and value == low):
        op = '>' if strict else '>='
        raise ConfigError(f'{name} must be {op} {low}, got {value}')


def _convert(field, raw):
    if field.type in (int, 'int'):
        return int(raw)
    if field.type in (float, 'float'):
        return float(raw)
    if field.type in (tuple, 'tuple'):
        return tuple(int(v) for v in raw.split(',') if v.strip())
    return raw


def _format(value):
    if isinstance(value, tuple):
        return ','.join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def parse_config(text, source='<string>'):
    """Build a :class:`RunConfig` from ``key = value`` lines

    Blank lines and ``#`` comments are ignored; missing keys keep their
    defaults.

    Raises
    ------
    ConfigError
        Unknown or repeated key, malformed line, unparseable or out-of-range
        value
    """
    parser = configparser.ConfigParser(interpolation=None,
                                       comment_prefixes=('#',),
                                       inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        parser.read_string(f'[{_SECTION}]\n{text}', source=source)
    except configparser.Error as err:
        raise ConfigError(f'{source}: {err}') from None

    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    values = {}
    for key, raw in parser[_SECTION].items():
        if key not in fields:
            raise ConfigError(f'{source}: unknown key {key!r}')
        try:
            values[key] = _convert(fields[key], raw.strip())
        except ValueError:
            raise ConfigError(f'{source}: bad value for {key}: '
                              f'{raw!r}') from None
    return RunConfig(**values)


def read_config(path):
    """Read a :class:`RunConfig` from a file"""
    with open(path, encoding='utf-8') as fh:
        return parse_config(fh.read(), source=str(path))


def format_config(config):
    """``key = value`` text holding every field of `config`"""
    return ''.join(f'{f.name} = {_format(getattr(config, f.name))}\n'
                   for f in dataclasses.fields(config))


def write_config(config, path):
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(format_config(config))
