import hashlib
import http.server
import json
import shutil
import threading

import pytest
from click.testing import CliRunner

from kgq.cli import cli
from kgq.fetch import ChecksumMismatch, NetworkFailure, fetch_dump
from kgq.model import write_statements

from conftest import st


def invoke(*args):
    result = CliRunner().invoke(cli, [str(a) for a in args], catch_exceptions=True)
    return result


@pytest.fixture
def toy(tmp_path, toy_dir):
    dst = tmp_path / "toy"
    shutil.copytree(toy_dir, dst)
    return dst


def test_run_and_stage_commands_agree(toy, tmp_path):
    r = invoke("--config", toy / "toy.cfg", "run", "--out", tmp_path / "bundle")
    assert r.exit_code == 0, r.output
    bundle = tmp_path / "bundle"
    report = json.loads((bundle / "report.json").read_text())
    assert report["ledger"]["removed"] == 9
    assert report["combined"]["v_fixed"] == 1

    out = tmp_path / "staged"
    r = invoke("accumulate", "--manifest", toy / "dumps.txt", "--out", out / "ledger.tsv",
               "--added-dir", out / "added", "--redirect-report", out / "redirects.tsv")
    assert r.exit_code == 0, r.output
    assert "removed\t9" in r.output
    assert (out / "ledger.tsv").read_bytes() == (bundle / "ledger.tsv").read_bytes()

    r = invoke("classify-updates", "--ledger", out / "ledger.tsv", "--added", out / "added",
               "--redirects", toy / "redirects-2021-01-04.tsv", "--out", out / "updates")
    assert r.exit_code == 0, r.output
    assert (out / "updates" / "classifications.tsv").read_bytes() == \
        (bundle / "updates" / "classifications.tsv").read_bytes()

    dump = toy / "dump-2021-01-04.tsv"
    r = invoke("deprecated", "--dump", dump, "--out", out / "deprecated")
    assert r.exit_code == 0 and "deprecated\t4" in r.output

    r = invoke("constraints", "compile", "--dump", dump, "--out", out / "specs.tsv")
    assert r.exit_code == 0 and "specs\t7" in r.output
    assert "skipped.external_id\t1" in r.output

    r = invoke("validate", "--specs", out / "specs.tsv", "--dump", dump, "--out", out / "reports")
    assert r.exit_code == 0, r.output
    assert (out / "reports" / "summary.tsv").read_bytes() == \
        (bundle / "reports" / "summary.tsv").read_bytes()

    r = invoke("combine", "--dump", dump, "--ledger", out / "ledger.tsv", "--specs", out / "specs.tsv",
               "--deprecated", out / "deprecated" / "deprecated.tsv",
               "--classifications", out / "updates" / "classifications.tsv",
               "--out", out / "combined")
    assert r.exit_code == 0, r.output
    for name in ("v.tsv", "v_del.tsv", "v_fixed.tsv", "overlap.tsv", "low_quality.tsv"):
        assert (out / "combined" / name).read_bytes() == (bundle / "combined" / name).read_bytes()


def test_validate_type_filter(toy, tmp_path):
    dump = toy / "dump-2021-01-04.tsv"
    invoke("constraints", "compile", "--dump", dump, "--out", tmp_path / "specs.tsv")
    r = invoke("validate", "--specs", tmp_path / "specs.tsv", "--dump", dump, "--types", "symmetric",
               "--out", tmp_path / "r")
    assert "reports\t1" in r.output


def test_diff_command(tmp_path):
    write_statements(tmp_path / "a.tsv", [st("1", "Q1", "P31", "Q5")])
    write_statements(tmp_path / "b.tsv", [st("2", "Q2", "P31", "Q5")])
    r = invoke("--identity-mode", "id", "diff", "--old", tmp_path / "a.tsv", "--new", tmp_path / "b.tsv",
               "--out", tmp_path / "d")
    assert r.exit_code == 0
    assert "added\t1\nremoved\t1" in r.output


def test_malformed_input_reported_not_fatal(tmp_path):
    (tmp_path / "a.tsv").write_text("id\tnode1\tlabel\tnode2\ns1\tQ1\tP31\n")
    write_statements(tmp_path / "b.tsv", [])
    r = invoke("diff", "--old", tmp_path / "a.tsv", "--new", tmp_path / "b.tsv", "--out", tmp_path / "d")
    assert r.exit_code == 0
    assert "MalformedRow" in r.output


def test_missing_column_fails(tmp_path):
    (tmp_path / "a.tsv").write_text("id\tnode1\tnode2\n")
    r = invoke("diff", "--old", tmp_path / "a.tsv", "--new", tmp_path / "a.tsv", "--out", tmp_path / "d")
    assert r.exit_code != 0


def test_empty_manifest_fails(tmp_path):
    (tmp_path / "m.txt").write_text("")
    r = invoke("run", "--manifest", tmp_path / "m.txt", "--out", tmp_path / "out")
    assert r.exit_code != 0
    assert "[accumulate]" in (tmp_path / "out" / "FAILED").read_text()


def test_bad_config_is_usage_error(tmp_path):
    (tmp_path / "c.cfg").write_text("workers = 1\n")
    r = invoke("--config", tmp_path / "c.cfg", "run", "--out", tmp_path / "o")
    assert r.exit_code == 2


# --- fetch ---------------------------------------------------------------------------

PAYLOAD = bytes(range(256)) * 400


class _Handler(http.server.BaseHTTPRequestHandler):
    calls: list = []

    def log_message(self, *args):
        pass

    def do_GET(self):
        self.calls.append(self.headers.get("Range"))
        rng = self.headers.get("Range")
        if rng:
            start = int(rng.split("=")[1].rstrip("-"))
            body = PAYLOAD[start:]
            self.send_response(206)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        self.send_response(200)
        self.send_header("Content-Length", str(len(PAYLOAD)))
        self.end_headers()
        # first attempt dies half way
        self.wfile.write(PAYLOAD[: len(PAYLOAD) // 2])
        self.wfile.flush()
        self.close_connection = True


@pytest.fixture
def server():
    _Handler.calls = []
    httpd = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}/dump.tsv"
    httpd.shutdown()
    httpd.server_close()


def test_fetch_resumes_after_truncation(server, tmp_path):
    digest = "sha256:" + hashlib.sha256(PAYLOAD).hexdigest()
    path = fetch_dump(server, tmp_path / "d.tsv", checksum=digest, backoff=0)
    assert path.read_bytes() == PAYLOAD
    assert _Handler.calls == [None, f"bytes={len(PAYLOAD) // 2}-"]
    assert not (tmp_path / "d.tsv.part").exists()


def test_fetch_gives_up(server, tmp_path):
    with pytest.raises(NetworkFailure):
        fetch_dump(server, tmp_path / "d.tsv", retries=0)
    assert (tmp_path / "d.tsv.part").stat().st_size == len(PAYLOAD) // 2


def test_fetch_local_and_checksum(tmp_path):
    src = tmp_path / "src.tsv"
    src.write_bytes(b"abc")
    assert fetch_dump(str(src), tmp_path / "a.tsv").read_bytes() == b"abc"
    with pytest.raises(ChecksumMismatch):
        fetch_dump(src.as_uri(), tmp_path / "b.tsv", checksum="md5:" + "0" * 32)
    assert not (tmp_path / "b.tsv.part").exists()
    r = invoke("fetch", src.as_uri(), tmp_path / "c.tsv",
               "--checksum", hashlib.sha256(b"abc").hexdigest())
    assert r.exit_code == 0
    assert (tmp_path / "c.tsv").read_bytes() == b"abc"
