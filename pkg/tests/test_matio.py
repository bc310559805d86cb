import numpy as np
import pytest

from sonmf_kit.matio import check_binary, read_matrix, write_matrix


@pytest.mark.parametrize("suffix", [".mtx", ".csv"])
def test_round_trip_is_bit_exact(tmp_path, rng, suffix):
    M = rng.normal(size=(7, 5)) * 10.0 ** rng.integers(-300, 300, size=(7, 5))
    path = tmp_path / f"m{suffix}"
    write_matrix(path, M)
    np.testing.assert_array_equal(read_matrix(path), M)


def test_reads_coordinate_market_file(tmp_path):
    path = tmp_path / "c.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 3 2\n1 1 1.5\n2 3 -2\n")
    np.testing.assert_array_equal(read_matrix(path), [[1.5, 0, 0], [0, 0, -2]])


def test_write_is_byte_stable(tmp_path, rng):
    M = rng.normal(size=(4, 4))
    write_matrix(tmp_path / "a.mtx", M)
    write_matrix(tmp_path / "b.mtx", M.copy())
    assert (tmp_path / "a.mtx").read_bytes() == (tmp_path / "b.mtx").read_bytes()


def test_read_rejects_nonfinite(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,nan\n2,3\n")
    with pytest.raises(ValueError, match="NaN"):
        read_matrix(path)


def test_check_binary_names_entry():
    X = np.zeros((3, 3))
    X[1, 2] = 0.5
    with pytest.raises(ValueError, match=r"\(1, 2\)"):
        check_binary(X)
    assert check_binary(np.eye(2)) is not None
