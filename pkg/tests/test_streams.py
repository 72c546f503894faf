import numpy as np

from ngecho.streams import chunk_rng, chunk_sizes, map_chunks, worker_count


def test_chunk_sizes():
    assert chunk_sizes(0) == []
    assert chunk_sizes(10, 4) == [4, 4, 2]
    assert sum(chunk_sizes(100_001, 16384)) == 100_001


def test_streams_independent_and_reproducible():
    a = chunk_rng(1, 0).random(4)
    assert np.array_equal(a, chunk_rng(1, 0).random(4))
    assert not np.array_equal(a, chunk_rng(1, 1).random(4))
    assert not np.array_equal(a, chunk_rng(1, 0, stream=1).random(4))


def test_map_chunks_independent_of_workers():
    def fn(rng, size, i):
        return rng.normal(size=size).sum()

    ref = map_chunks(fn, 10_000, 5, workers=1, chunk=1000)
    for w in (2, 4, 8):
        assert map_chunks(fn, 10_000, 5, workers=w, chunk=1000) == ref


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("NGECHO_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("NGECHO_THREADS")
    assert worker_count(3) == 3
