from hypothesis import given, strategies as st

from plcbinx.hashing import fnv1a64, hashed_index

# published FNV-1a 64 test vectors
VECTORS = {
    "": 0xCBF29CE484222325,
    "a": 0xAF63DC4C8601EC8C,
    "foobar": 0x85944171F73967E8,
}


def test_reference_vectors():
    for text, want in VECTORS.items():
        assert fnv1a64(text) == want
        assert fnv1a64(text.encode()) == want


@given(st.text())
def test_str_and_utf8_bytes_agree(s):
    assert fnv1a64(s) == fnv1a64(s.encode("utf-8"))
    assert 0 <= fnv1a64(s) < 2 ** 64


@given(st.text(), st.integers(1, 10_000))
def test_hashed_index_in_range(token, dim):
    assert 0 <= hashed_index(token, dim) < dim
