import json
import struct

import numpy as np
import pytest

from wassball import io as wio
from wassball.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_SCHEMA, EXIT_USAGE, EXIT_VIOLATION, main
from wassball.errors import SchemaError
from wassball.runner import verify_document

FAST = ["--samples", "3", "--iterations", "3"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def attack_doc(tmp_path_factory):
    path = tmp_path_factory.mktemp("run") / "adv.json"
    assert main(["attack", *FAST, "--out", str(path)]) == EXIT_OK
    return path


def test_wadv_round_trip(tmp_path):
    arr = np.arange(24, dtype=float).reshape(2, 3, 4) / 7
    path = tmp_path / "a.wadv"
    wio.write_array(path, arr)
    data = path.read_bytes()
    assert data[:4] == b"WADV"
    assert struct.unpack_from("<4I", data, 4) == (3, 2, 3, 4)
    np.testing.assert_array_equal(wio.read_array(path), arr)


@pytest.mark.parametrize("data", [b"", b"NOPE\x00\x00\x00\x00", b"WADV\x02\x00\x00\x00\x01\x00",
                                  wio.encode_array(np.ones(3))[:-1]])
def test_wadv_rejects_bad_bytes(data):
    with pytest.raises(SchemaError):
        wio.decode_array(data)


def test_schema_validation(attack_doc):
    doc = wio.load_results(attack_doc)
    assert doc["schema"] == 1
    for broken in ({**doc, "schema": 2}, {k: v for k, v in doc.items() if k != "shape"}, [1, 2]):
        with pytest.raises(SchemaError):
            wio.validate(broken)
    bad = json.loads(json.dumps(doc))
    bad["samples"][0]["z"] = bad["samples"][0]["z"][:-1]
    with pytest.raises(SchemaError):
        wio.validate(bad)
    with pytest.raises(SchemaError):
        wio.load_results("{not json")


def test_attack_round_trips_through_verify(attack_doc, capsys):
    code, out, _ = run(["verify", str(attack_doc)], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["budget_violations"] == 0 and report["ok"]
    assert all(s["coupling_checked"] for s in report["samples"])


def test_attack_deterministic_across_threads(attack_doc, tmp_path):
    other = tmp_path / "b.json"
    assert main(["attack", *FAST, "--threads", "2", "--out", str(other)]) == EXIT_OK
    assert other.read_bytes() == attack_doc.read_bytes()


def test_zero_budget_and_zero_iterations(capsys):
    for extra in (["--method", "fw-dual-lmo", "--epsilon", "0"], ["--iterations", "0"]):
        code, out, _ = run(["attack", "--samples", "4", *extra], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert all(s["adversarial_label"] == s["clean_label"] for s in doc["samples"])
        assert doc["summary"]["adversarial_accuracy"] == doc["summary"]["clean_accuracy"]


def test_usage_errors(capsys, tmp_path):
    assert run(["attack", "--gamma", "0.01"], capsys)[0] == EXIT_USAGE
    assert run(["attack", "--epsilon", "-1"], capsys)[0] == EXIT_USAGE
    assert run(["attack", "--method", "nope"], capsys)[0] == EXIT_USAGE
    assert run(["verify", str(tmp_path / "missing.json")], capsys)[0] == EXIT_USAGE
    assert run([], capsys)[0] == EXIT_USAGE


def test_bad_files_exit_four(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema": 99}))
    assert run(["verify", str(path)], capsys)[0] == EXIT_SCHEMA
    images = tmp_path / "x.wadv"
    images.write_bytes(b"garbage")
    labels = tmp_path / "y.txt"
    labels.write_text("0\n")
    assert run(["attack", "--input", str(images), "--labels", str(labels)], capsys)[0] == EXIT_SCHEMA


def test_numerical_exit_code():
    assert EXIT_NUMERICAL == 3 and EXIT_VIOLATION == 1


def test_verify_flags_budget_violation(attack_doc, capsys, tmp_path):
    doc = wio.load_results(attack_doc)
    sample = doc["samples"][0]
    x = np.array(sample["x"])
    z = np.zeros_like(x)
    z[0] = x.sum()  # everything in one corner: out of reach of local moves
    sample["z"] = z.tolist()
    del sample["coupling"]
    path = tmp_path / "tampered.json"
    path.write_text(wio.dumps(doc))
    code, out, _ = run(["verify", str(path)], capsys)
    assert code == EXIT_VIOLATION
    report = json.loads(out)
    assert report["budget_violations"] == 1
    assert any("carry no coupling" in w for w in report["warnings"])


def test_clean_input_verifies(attack_doc):
    doc = wio.load_results(attack_doc)
    for s in doc["samples"]:
        s["z"] = s["x"]
        s.pop("coupling")
    report = verify_document(doc)
    assert report.ok
    assert all(s.wasserstein == pytest.approx(0.0, abs=1e-12) for s in report.samples)
    assert report.warnings


def test_input_path_and_trace(tmp_path, capsys):
    from wassball.models import BlobSpec, make_blobs

    images, labels = make_blobs(BlobSpec(), 3, 7)
    wio.write_array(tmp_path / "x.wadv", images.reshape(3, 1, 8, 8))
    (tmp_path / "y.txt").write_text("\n".join(map(str, labels)))
    trace = tmp_path / "trace.csv"
    code, out, _ = run(["attack", "--input", str(tmp_path / "x.wadv"), "--labels", str(tmp_path / "y.txt"),
                        "--iterations", "4", "--trace", str(trace), "--format", "csv"], capsys)
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0].split(",") == list(wio.SAMPLE_FIELDS) and len(lines) == 4
    rows = trace.read_text().strip().splitlines()
    assert rows[0] == "iteration,mean_loss,accuracy" and len(rows) == 6


def test_dykstra_bench_and_project(capsys):
    code, out, _ = run(["dykstra-bench", "--iterations", "50", "--format", "csv"], capsys)
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == "iteration,simplex_residual,halfspace_residual" and len(lines) == 51
    code, out, _ = run(["project", "--width", "5", "--height", "5", "--iterations", "100", "--epsilon", "0.2",
                        "--step-size", "0.05"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["transport_cost"] <= 0.2 + 1e-4
    assert doc["distance"] <= doc["transport_cost"] + 1e-9
