import json

import pytest

from rangerenewal.cli import main, tokens_to_counter


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_predict(capsys):
    code, out, _ = run(capsys, "predict", "--gamma", "0.5", "--ratio", "RkOverTailK", "--k", "4")
    assert code == 0
    assert json.loads(out) == {"ratio": "RkOverTailK", "k": 4, "value": 0.125}


def test_predict_mixed_and_finite(capsys):
    code, out, _ = run(capsys, "predict", "--gamma", "0.5", "--atom-mass", "0.8", "--ratio", "RnOverN")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.2)
    code, out, _ = run(capsys, "predict", "--atoms", "Finite", "--ratio", "RkOverTailK", "--k", "2")
    assert code == 0 and json.loads(out)["value"] == 0.0
    code, out, _ = run(capsys, "predict", "--atom-mass", "0", "--ratio", "RnOverN")
    assert code == 0 and json.loads(out)["value"] == 1.0


def test_predict_unsupported(capsys):
    code, _, err = run(capsys, "predict", "--gamma", "0.5", "--atom-mass", "0.5", "--ratio", "RkOverRn",
                       "--k", "2")
    assert code == 2 and "error" in err


def test_spectrum(tmp_path, capsys):
    f = tmp_path / "toks.txt"
    f.write_text("a b a")
    code, out, _ = run(capsys, "spectrum", "--input", str(f))
    assert code == 0
    assert json.loads(out) == {"n": 3, "distinct": 2, "spectrum": {"1": 1, "2": 1}}


def test_spectrum_missing_file(capsys):
    code, _, _ = run(capsys, "spectrum", "--input", "/nonexistent/x")
    assert code == 3


def test_tokens_to_counter_checkpoint():
    counter, earlier = tokens_to_counter("a b a c".split(), 2)
    assert earlier.n == 2 and earlier.distinct == 2
    assert counter.n == 4 and counter.distinct == 3


def test_estimate_from_tokens(tmp_path, capsys):
    f = tmp_path / "toks.txt"
    f.write_text(" ".join(str(i % 7) for i in range(5000)))
    code, out, _ = run(capsys, "estimate", "--input", str(f))
    assert code == 0
    assert json.loads(out)["regime"] == "FiniteAtoms"


def test_estimate_from_spectrum(tmp_path, capsys):
    f = tmp_path / "spec.json"
    f.write_text(json.dumps({"n": 2000, "distinct": 2000, "spectrum": {"1": 2000}}))
    code, out, _ = run(capsys, "estimate", "--input", str(f))
    assert code == 0
    assert json.loads(out)["regime"] == "PureDiffuse"
    f.write_text(json.dumps({"n": 5, "distinct": 2, "spectrum": {"1": 1}}))
    code, _, _ = run(capsys, "estimate", "--input", str(f))
    assert code == 2


def write_config(tmp_path, **kw):
    cfg = {"law": {"family": "Mixed", "atomMass": 0.7, "inner": {"family": "ZipfLike", "gamma": 0.5}},
           "seed": 5, "replicas": 12, "checkpoints": [1000, 5000],
           "ratios": [{"name": "Rn1OverN", "k": 1, "tolerance": 0.2}]}
    cfg.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_simulate_writes_outputs(tmp_path, capsys):
    p = write_config(tmp_path)
    code, _, err = run(capsys, "simulate", "--config", str(p), "--json", str(tmp_path / "r.json"),
                       "--csv", str(tmp_path / "r.csv"))
    assert code == 0, err
    assert json.loads((tmp_path / "r.json").read_text())["passed"] is True
    assert (tmp_path / "r.csv").read_text().startswith("run_id,seed,n,ratio,k,observed,predicted,gap\n")


def test_simulate_byte_identical(tmp_path, capsys, monkeypatch):
    p = write_config(tmp_path)
    outs = []
    for threads in ("1", "1", "2"):
        monkeypatch.setenv("RR_THREADS", threads)
        path = tmp_path / f"r{len(outs)}.json"
        assert run(capsys, "simulate", "--config", str(p), "--json", str(path))[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_simulate_tolerance_failure(tmp_path, capsys):
    p = write_config(tmp_path, ratios=[{"name": "Rn1OverN", "k": 1, "tolerance": 1e-9}])
    code, _, err = run(capsys, "simulate", "--config", str(p), "--json", str(tmp_path / "r.json"))
    assert code == 1 and "FAIL" in err


def test_simulate_bad_config(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(capsys, "simulate", "--config", str(p))[0] == 2
    p.write_text(json.dumps({"law": {"family": "ZipfLike", "gamma": 2.0}}))
    assert run(capsys, "simulate", "--config", str(p))[0] == 2
    assert run(capsys, "simulate", "--config", str(tmp_path / "missing.json"))[0] == 3


def test_simulate_unwritable_output(tmp_path, capsys):
    p = write_config(tmp_path)
    assert run(capsys, "simulate", "--config", str(p), "--json", "/nonexistent/dir/r.json")[0] == 3


def test_verify(tmp_path, capsys):
    p = write_config(tmp_path)
    code, out, _ = run(capsys, "verify", "--config", str(p))
    assert code == 0
    data = json.loads(out)
    assert data["passed"] and len(data["paths"]) == 12
