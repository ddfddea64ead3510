import numpy as np
import pytest

from qfock import CacheError, GramSeries, QMatrix
from qfock.cache import GramCache, cache_admin, decode_block, encode_block, fnv1a64


def test_fnv_reference_values():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_encode_decode_roundtrip():
    m = np.arange(16, dtype=float).reshape(4, 4)
    data = encode_block(2, 2, 0xABC, m)
    assert len(data) == 24 + 16 * 8
    d, n, h, out = decode_block(data, expect_hash=0xABC)
    assert (d, n, h) == (2, 2, 0xABC)
    assert np.array_equal(out, m)


def test_decode_rejects_damage():
    data = encode_block(2, 1, 7, np.eye(2))
    with pytest.raises(CacheError, match="magic"):
        decode_block(b"X" + data[1:])
    with pytest.raises(CacheError, match="hash"):
        decode_block(data, expect_hash=8)
    with pytest.raises(CacheError, match="payload"):
        decode_block(data[:-1])
    with pytest.raises(CacheError):
        decode_block(data[:5])
    with pytest.raises(CacheError):
        encode_block(2, 2, 7, np.eye(2))


def test_empty_cache_lists_nothing(tmp_path):
    rep = cache_admin(tmp_path / "c", "list")
    assert rep.entries == [] and rep.ok


def test_series_fills_and_reuses_cache(tmp_path):
    Q = QMatrix([[0.3, 0.1], [0.1, -0.2]])
    cache = GramCache(tmp_path)
    first = GramSeries(Q, cache).blocks(4)
    assert sorted(e["n"] for e in cache.list().entries) == [0, 1, 2, 3, 4]
    again = GramSeries(Q, cache)
    blocks = again.blocks(4)
    assert again.cache_hits == 5
    for a, b in zip(first, blocks):
        assert np.array_equal(a, b)
    assert cache.verify().ok


def test_verify_flags_flipped_payload_byte(tmp_path):
    Q = QMatrix.constant(2, 0.4)
    cache = GramCache(tmp_path)
    GramSeries(Q, cache).blocks(3)
    path = cache.path_for(2, 3, Q.hash())
    raw = bytearray(path.read_bytes())
    raw[-3] ^= 0x40
    path.write_bytes(bytes(raw))
    rep = cache.verify()
    assert not rep.ok
    assert [p["n"] for p in rep.problems] == [3]
    # a damaged file is ignored on load and rebuilt
    fresh = GramSeries(Q, GramCache(tmp_path)).block(3)
    assert np.array_equal(fresh, GramSeries(Q).block(3))


def test_verify_flags_bad_header(tmp_path):
    Q = QMatrix.constant(1, 0.4)
    cache = GramCache(tmp_path)
    GramSeries(Q, cache).blocks(2)
    path = cache.path_for(1, 2, Q.hash())
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    assert "magic" in cache.verify().problems[0]["problem"]


def test_purge(tmp_path):
    cache = GramCache(tmp_path)
    GramSeries(QMatrix.constant(2, 0.1), cache).blocks(2)
    rep = cache.purge()
    assert len(rep.entries) == 3
    assert cache.list().entries == []
