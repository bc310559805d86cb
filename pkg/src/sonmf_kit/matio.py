"""Matrix file formats: Matrix Market (array or coordinate) and headerless CSV.

Values are written with 17 significant digits so that finite doubles
round-trip exactly.
"""

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .linalg import as_matrix

FMT = "%.17g"


def read_matrix(path):
    """Read a dense matrix from ``.mtx`` (Matrix Market) or CSV."""
    path = Path(path)
    if not path.is_file():
        # mmread would report a missing file as a malformed one
        raise FileNotFoundError(f"no such file: {path}")
    if path.suffix.lower() == ".mtx":
        M = scipy.io.mmread(str(path))
        if scipy.sparse.issparse(M):
            M = M.toarray()
    else:
        M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return as_matrix(M, str(path))


def write_matrix(path, M):
    """Write ``M`` as Matrix Market array format or CSV, chosen by suffix."""
    path = Path(path)
    M = as_matrix(M, "matrix")
    if path.suffix.lower() == ".mtx":
        _write_mtx_array(path, M)
    else:
        np.savetxt(path, M, delimiter=",", fmt=FMT)


def _write_mtx_array(path, M):
    # hand-rolled so output is byte-stable across scipy versions
    rows, cols = M.shape
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{rows} {cols}\n")
        # array format is column-major
        for v in M.ravel(order="F"):
            fh.write(FMT % v + "\n")


def check_binary(X, name="X"):
    """Raise ``ValueError`` naming the first entry of ``X`` not in {0, 1}."""
    X = np.asarray(X)
    bad = np.argwhere((X != 0) & (X != 1))
    if bad.size:
        i, j = bad[0]
        raise ValueError(f"{name} must be binary; entry ({i}, {j}) = {float(X[i, j])!r}")
    return X
