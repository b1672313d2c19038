"""Binary embedding and checkpoint files

Embedding file (``ELMW``)::

    magic 'ELMW' | u32 version | u32 rows | u32 dim | rows*dim float32

Checkpoint file (``ELMM``)::

    magic 'ELMM' | u32 version | u32 n | n bytes of JSON model config |
    u32 blocks | per block: u32 n, n bytes of UTF-8 name, u32 ndim,
    ndim u32 sizes, float32 payload

All integers and floats are little-endian.
"""
import json
import pathlib
import struct

import numpy as np
import torch

from .errors import FormatError

EMBEDDING_MAGIC = b'ELMW'
CHECKPOINT_MAGIC = b'ELMM'
VERSION = 1

_U32 = struct.Struct('<I')
_EMB_HEADER = struct.Struct('<4sIII')
_F32 = np.dtype('<f4')


def write_embeddings(path, matrix):
    """Write a 2-D matrix as an ``ELMW`` file of float32 rows"""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f'matrix must be 2-D, got shape {matrix.shape}')
    data = np.ascontiguousarray(matrix, dtype=_F32)
    with open(path, 'wb') as fh:
        fh.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, VERSION, *data.shape))
        fh.write(data.tobytes())


def read_embeddings(path):
    """Read an ``ELMW`` file

    Returns
    -------
    numpy.ndarray
        float32 matrix of shape (rows, dim)

    Raises
    ------
    FormatError
        Wrong magic or version, or the payload size does not match the
        declared shape
    """
    data = pathlib.Path(path).read_bytes()
    if len(data) < _EMB_HEADER.size:
        raise FormatError(f'{path}: truncated header')
    magic, version, rows, dim = _EMB_HEADER.unpack_from(data)
    if magic != EMBEDDING_MAGIC:
        raise FormatError(f'{path}: bad magic {magic!r}')
    if version != VERSION:
        raise FormatError(f'{path}: unsupported version {version}')
    payload = len(data) - _EMB_HEADER.size
    if payload != rows * dim * _F32.itemsize:
        raise FormatError(f'{path}: {rows}x{dim} floats declared, payload '
                          f'has {payload} bytes')
    out = np.frombuffer(data, dtype=_F32, offset=_EMB_HEADER.size)
    return out.reshape(rows, dim).copy()


class _Reader(object):
    """Sequential reader over a bytes buffer"""

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f'{self.path}: truncated at byte {self.pos}')
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return _U32.unpack(self.take(_U32.size))[0]


def save_checkpoint(model, path):
    """Write a :class:`~graphword.model.MicroModel` as an ``ELMM`` file"""
    config = json.dumps(model.config.to_dict(), sort_keys=True).encode()
    state = model.state_dict()
    with open(path, 'wb') as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(_U32.pack(VERSION))
        fh.write(_U32.pack(len(config)))
        fh.write(config)
        fh.write(_U32.pack(len(state)))
        for name, tensor in state.items():
            array = tensor.detach().cpu().numpy().astype(_F32)
            encoded = name.encode('utf-8')
            fh.write(_U32.pack(len(encoded)))
            fh.write(encoded)
            fh.write(_U32.pack(array.ndim))
            for size in array.shape:
                fh.write(_U32.pack(size))
            fh.write(np.ascontiguousarray(array).tobytes())


def load_checkpoint(path):
    """Read an ``ELMM`` file into a new model

    Returns
    -------
    MicroModel
        Model in eval mode

    Raises
    ------
    FormatError
        Wrong magic or version, truncated data, trailing bytes, or
        parameter blocks that do not fit the stored config
    """
    from .model import MicroModel, ModelConfig

    reader = _Reader(pathlib.Path(path).read_bytes(), path)
    magic = reader.take(4)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f'{path}: bad magic {magic!r}')
    version = reader.u32()
    if version != VERSION:
        raise FormatError(f'{path}: unsupported version {version}')
    try:
        config = ModelConfig.from_dict(json.loads(reader.take(reader.u32())))
    except (ValueError, TypeError) as err:
        raise FormatError(f'{path}: bad config block ({err})') from None

    state = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode('utf-8')
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        count = int(np.prod(shape, dtype=np.int64))
        raw = reader.take(count * _F32.itemsize)
        array = np.frombuffer(raw, dtype=_F32).reshape(shape).copy()
        state[name] = torch.from_numpy(array)
    if reader.pos != len(reader.data):
        raise FormatError(f'{path}: {len(reader.data) - reader.pos} trailing '
                          'bytes')

    model = MicroModel(config)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as err:
        raise FormatError(f'{path}: parameters do not fit the config '
                          f'({err})') from None
    return model.eval()
