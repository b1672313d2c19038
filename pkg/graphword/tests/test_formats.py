import struct

import numpy as np
import pytest
import torch

from graphword.errors import FormatError
from graphword.formats import (load_checkpoint, read_embeddings,
                               save_checkpoint, write_embeddings)
from graphword.model import MicroModel, ModelConfig


def test_embeddings_round_trip_bit_exact(tmp_path):
    matrix = np.random.default_rng(0).normal(size=(7, 5)).astype(np.float32)
    path = tmp_path / 'omega.elmw'
    write_embeddings(path, matrix)
    out = read_embeddings(path)
    assert out.dtype == np.float32
    assert out.tobytes() == matrix.tobytes()
    assert path.stat().st_size == 16 + 7 * 5 * 4


def test_embedding_header_layout(tmp_path):
    path = tmp_path / 'e.elmw'
    write_embeddings(path, np.ones((2, 3)))
    magic, version, rows, dim = struct.unpack('<4sIII',
                                              path.read_bytes()[:16])
    assert (magic, version, rows, dim) == (b'ELMW', 1, 2, 3)


def test_embeddings_reject_bad_files(tmp_path):
    path = tmp_path / 'e.elmw'
    write_embeddings(path, np.zeros((3, 2)))
    data = path.read_bytes()

    (tmp_path / 'magic.elmw').write_bytes(b'XXXX' + data[4:])
    (tmp_path / 'short.elmw').write_bytes(data[:-4])
    (tmp_path / 'long.elmw').write_bytes(data + b'\0' * 4)
    (tmp_path / 'head.elmw').write_bytes(data[:10])
    for name in ('magic', 'short', 'long', 'head'):
        with pytest.raises(FormatError):
            read_embeddings(tmp_path / f'{name}.elmw')
    with pytest.raises(ValueError):
        write_embeddings(path, np.zeros(3))


def _small_model():
    return MicroModel(ModelConfig(dim=16, heads=2, enc_layers=1,
                                  dec_layers=1, max_index=6, seed=2))


@pytest.mark.filterwarnings('ignore::UserWarning')
def test_checkpoint_round_trip(tmp_path):
    model = _small_model()
    path = tmp_path / 'model.elmm'
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.config == model.config
    assert not loaded.training
    state = model.state_dict()
    for name, tensor in loaded.state_dict().items():
        assert torch.equal(tensor, state[name]), name

    again = tmp_path / 'again.elmm'
    save_checkpoint(loaded, again)
    assert again.read_bytes() == path.read_bytes()


@pytest.mark.filterwarnings('ignore::UserWarning')
def test_checkpoint_rejects_bad_files(tmp_path):
    path = tmp_path / 'model.elmm'
    save_checkpoint(_small_model(), path)
    data = path.read_bytes()
    (tmp_path / 'magic.elmm').write_bytes(b'ELMW' + data[4:])
    (tmp_path / 'version.elmm').write_bytes(data[:4] + struct.pack('<I', 9)
                                            + data[8:])
    (tmp_path / 'cut.elmm').write_bytes(data[:-1])
    (tmp_path / 'tail.elmm').write_bytes(data + b'\0')
    for name in ('magic', 'version', 'cut', 'tail'):
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / f'{name}.elmm')
