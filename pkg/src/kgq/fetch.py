"""Download dump files with resume and checksum verification."""

from __future__ import annotations

import hashlib
import http.client
import logging
import shutil
import socket
import time
import urllib.error
import urllib.request
from pathlib import Path
from urllib.parse import unquote, urlparse

log = logging.getLogger(__name__)

BLOCK = 1 << 20


class NetworkFailure(IOError):
    """Transfer interrupted or refused; safe to retry (the partial file is kept)."""


class ChecksumMismatch(ValueError):
    pass


def _hasher(checksum: str):
    algo, _, digest = checksum.partition(":")
    if not digest:
        digest = algo
        algo = {32: "md5", 40: "sha1", 64: "sha256", 128: "sha512"}.get(len(digest), "")
    if not algo:
        raise ValueError(f"cannot infer hash algorithm from {checksum!r}")
    return hashlib.new(algo), digest.lower()


def file_digest(path: str | Path, checksum: str) -> tuple[str, str]:
    h, expected = _hasher(checksum)
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(BLOCK), b""):
            h.update(block)
    return h.hexdigest(), expected


def _copy_local(src: Path, part: Path) -> None:
    offset = part.stat().st_size if part.exists() else 0
    with open(src, "rb") as fin, open(part, "ab") as fout:
        fin.seek(offset)
        shutil.copyfileobj(fin, fout, BLOCK)


def _download(url: str, part: Path, timeout: float) -> None:
    offset = part.stat().st_size if part.exists() else 0
    req = urllib.request.Request(url)
    if offset:
        req.add_header("Range", f"bytes={offset}-")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            if offset and resp.status != 206:
                log.info("server ignored range request, restarting %s", url)
                offset = 0
            length = resp.headers.get("Content-Length")
            expected = int(length) if length is not None else None
            got = 0
            with open(part, "ab" if offset else "wb") as fout:
                while True:
                    block = resp.read(BLOCK)
                    if not block:
                        break
                    fout.write(block)
                    got += len(block)
            if expected is not None and got < expected:
                raise NetworkFailure(f"{url}: received {got} of {expected} bytes")
    except urllib.error.HTTPError as exc:
        if exc.code == 416 and offset:
            return  # requested range starts at EOF: already complete
        if exc.code >= 500 or exc.code == 429:
            raise NetworkFailure(f"{url}: HTTP {exc.code}") from exc
        raise
    except (urllib.error.URLError, http.client.HTTPException, ConnectionError,
            socket.timeout) as exc:
        raise NetworkFailure(f"{url}: {exc}") from exc


def fetch_dump(url: str, destination: str | Path, *, checksum: str | None = None,
               retries: int = 3, backoff: float = 1.0, timeout: float = 60.0) -> Path:
    """Stream ``url`` to ``destination``, resuming from ``<destination>.part``.

    ``checksum`` is ``algo:hexdigest`` or a bare hex digest.  A mismatch
    deletes the partial file and raises :class:`ChecksumMismatch`.
    """
    dest = Path(destination)
    part = dest.with_name(dest.name + ".part")
    parsed = urlparse(url)
    for attempt in range(retries + 1):
        try:
            if parsed.scheme in ("", "file"):
                _copy_local(Path(unquote(parsed.path) if parsed.scheme else url), part)
            else:
                _download(url, part, timeout)
            break
        except NetworkFailure as exc:
            if attempt == retries:
                raise
            wait = backoff * 2 ** attempt
            log.warning("%s; retrying in %.1fs", exc, wait)
            time.sleep(wait)
    if checksum:
        actual, expected = file_digest(part, checksum)
        if actual != expected:
            part.unlink()
            raise ChecksumMismatch(f"{url}: expected {expected}, got {actual}")
    part.replace(dest)
    return dest
