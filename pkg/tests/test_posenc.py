import numpy as np
import pytest

from voxelbandit.core import GridShape
from voxelbandit.errors import IndexOutOfRange
from voxelbandit.posenc import PositionalEncoder, band_features, normalize_axis


def test_dimension() -> None:
    assert PositionalEncoder(GridShape(4, 4), bands=8).dim == 51
    assert PositionalEncoder(GridShape(4, 4), bands=2).matrix().shape == (16, 15)


def test_normalize_axis_endpoints() -> None:
    assert normalize_axis(0, 5) == -1.0
    assert normalize_axis(4, 5) == 1.0
    assert normalize_axis(2, 5) == 0.0
    # A singleton axis sits at the centre.
    assert normalize_axis(0, 1) == 0.0


def test_band_features_at_zero() -> None:
    f = band_features(np.array(0.0), bands=3)
    assert f.tolist() == [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]


def test_matrix_rows_match_encode() -> None:
    enc = PositionalEncoder(GridShape(5, 3, 2), bands=4)
    table = enc.matrix()
    for n in (0, 7, 29):
        assert np.allclose(table[n], enc.encode(n))


def test_encoding_distinguishes_agents() -> None:
    table = PositionalEncoder(GridShape(8, 8), bands=8).matrix()
    assert len({row.tobytes() for row in table}) == 64


def test_encode_out_of_range() -> None:
    enc = PositionalEncoder(GridShape(2, 2))
    with pytest.raises(IndexOutOfRange):
        enc.encode(4)
    with pytest.raises(IndexOutOfRange):
        enc.encode(-1)
