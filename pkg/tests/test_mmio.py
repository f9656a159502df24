import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from manpqn.errors import MatrixMarketError
from manpqn.mmio import load_matrix_market, parse_matrix_market, write_matrix_market

IDENTITY = """%%MatrixMarket matrix coordinate real general
% comment
2 2 2
1 1 1.0
2 2 1.0
"""

SYM = """%%MatrixMarket matrix coordinate real symmetric
3 3 4
1 1 2.0
2 1 -1.5
3 1 0.25
3 3 4.0
"""


def test_identity():
    A = parse_matrix_market(IDENTITY)
    assert A.shape == (2, 2) and A.nnz == 2
    np.testing.assert_array_equal(A.toarray(), np.eye(2))


def test_symmetric_expansion():
    A = parse_matrix_market(SYM)
    assert A.header_nnz == 4
    assert A.nnz == 2 * 2 + 2
    D = A.toarray()
    np.testing.assert_array_equal(D, D.T)
    assert D[0, 1] == -1.5 and D[2, 0] == 0.25


def test_array_format():
    text = "%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n"
    np.testing.assert_array_equal(parse_matrix_market(text).toarray(), [[1, 3, 5], [2, 4, 6]])
    text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n"
    np.testing.assert_array_equal(parse_matrix_market(text).toarray(), [[1, 2], [2, 3]])


def test_integer_field_accepted():
    A = parse_matrix_market("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n")
    assert A.toarray()[0, 0] == 7.0


@pytest.mark.parametrize("text,lineno", [
    ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", 1),
    ("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n", 1),
    ("%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n", 1),
    ("%%MatrixMarket vector coordinate real general\n1 1 1\n1 1 1\n", 1),
    ("%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 1\n1 1 1\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2\n1 1 1\n", 2),
    ("%%MatrixMarket matrix coordinate real general\n2 2 x\n", 2),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n2 2 1.0\n", 4),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 nan\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1.0\n", 2),
    ("", 1),
])
def test_malformed_input_reports_line(text, lineno):
    with pytest.raises(MatrixMarketError) as info:
        parse_matrix_market(text)
    assert info.value.lineno == lineno
    assert f"line {lineno}" in str(info.value)


@pytest.mark.parametrize("symmetric", [False, True])
def test_round_trip_against_scipy(tmp_path, rng, symmetric):
    A = sp.random(12, 12 if symmetric else 9, density=0.3, random_state=3).toarray()
    if symmetric:
        A = A + A.T
    path = tmp_path / "m.mtx"
    write_matrix_market(path, A, symmetric=symmetric)
    M = load_matrix_market(path)
    ref = scipy.io.mmread(str(path))
    ref = ref.toarray() if sp.issparse(ref) else ref
    assert M.shape == A.shape
    assert M.nnz == np.count_nonzero(A)
    np.testing.assert_allclose(M.toarray(), A, rtol=0, atol=1e-12)
    np.testing.assert_allclose(M.toarray(), ref, rtol=0, atol=1e-12)
