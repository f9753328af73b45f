"""External merge sort with pickle spill files."""

from __future__ import annotations

import heapq
import os
import pickle
import tempfile
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, TypeVar

T = TypeVar("T")

DEFAULT_CHUNK = 200_000
BLOCK = 64  # records per pickle frame; a merge holds one frame per run
FAN_IN = 16  # runs merged at once, so merge buffers stay at FAN_IN * BLOCK records


def _spill(chunk: list, scratch_dir: str | Path | None) -> str:
    fd, name = tempfile.mkstemp(prefix="kgq-run-", suffix=".pkl", dir=scratch_dir)
    with os.fdopen(fd, "wb") as fh:
        _dump_blocks(chunk, fh)
    return name


def _dump_blocks(items: Iterable, fh) -> int:
    n = 0
    block: list = []
    for item in items:
        block.append(item)
        if len(block) >= BLOCK:
            pickle.dump(block, fh, protocol=pickle.HIGHEST_PROTOCOL)
            n += len(block)
            block = []
    if block:
        pickle.dump(block, fh, protocol=pickle.HIGHEST_PROTOCOL)
        n += len(block)
    return n


def iter_run(path: str | Path) -> Iterator[Any]:
    with open(path, "rb") as fh:
        while True:
            try:
                yield from pickle.load(fh)
            except EOFError:
                return


def external_sort(items: Iterable[T], key: Callable[[T], Any], *,
                  chunk_size: int = DEFAULT_CHUNK,
                  scratch_dir: str | Path | None = None) -> Iterator[T]:
    """Yield ``items`` ordered by ``key`` holding at most ``chunk_size`` in memory.

    Sorted runs are spilled to ``scratch_dir`` and k-way merged.  The merge is
    stable across runs, so equal keys keep input order.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    runs: list[str] = []
    spilled: list[str] = []  # every run file ever written, for cleanup
    chunk: list[T] = []
    try:
        for item in items:
            chunk.append(item)
            if len(chunk) >= chunk_size:
                chunk.sort(key=key)
                runs.append(_spill(chunk, scratch_dir))
                spilled.append(runs[-1])
                chunk = []
        chunk.sort(key=key)
        if not runs:
            yield from chunk
            return
        if chunk:
            runs.append(_spill(chunk, scratch_dir))
            spilled.append(runs[-1])
            chunk = []
        while len(runs) > FAN_IN:
            # consecutive groups keep run order, so the merge stays stable
            merged: list[str] = []
            for i in range(0, len(runs), FAN_IN):
                group = runs[i:i + FAN_IN]
                fd, name = tempfile.mkstemp(prefix="kgq-run-", suffix=".pkl", dir=scratch_dir)
                merged.append(name)
                spilled.append(name)
                with os.fdopen(fd, "wb") as fh:
                    _dump_blocks(heapq.merge(*(iter_run(r) for r in group), key=key), fh)
                for r in group:
                    os.remove(r)
            runs = merged
        yield from heapq.merge(*(iter_run(r) for r in runs), key=key)
    finally:
        for r in spilled:
            try:
                os.remove(r)
            except FileNotFoundError:
                pass


def sort_to_file(items: Iterable[T], key: Callable[[T], Any], out_path: str | Path, *,
                 chunk_size: int = DEFAULT_CHUNK,
                 scratch_dir: str | Path | None = None) -> int:
    """Externally sort ``items`` into a single run file readable by :func:`iter_run`."""
    with open(out_path, "wb") as fh:
        return _dump_blocks(external_sort(items, key, chunk_size=chunk_size,
                                          scratch_dir=scratch_dir), fh)
