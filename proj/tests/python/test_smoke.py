import json
import math
import os
import subprocess

import pytest

import groundcheck as gc


def test_counterfactual_worked_token():
    s = gc.counterfactual_signals(0.8, 0.1, 0.2)
    assert s["p_cf"] == pytest.approx(0.2)
    assert s["s_log"] == pytest.approx(math.log(4.0), abs=1e-12)
    assert s["delta_clean"] == pytest.approx(0.7)
    assert s["delta_mis"] == pytest.approx(0.6)


def test_angle_and_scaling():
    assert gc.hidden_angle(0.0) == pytest.approx(0.5)
    scaled = gc.quantile_scale([i / 10 for i in range(11)])
    assert scaled[5] == pytest.approx(0.5)
    up = [i / 10 for i in range(11)]
    assert gc.attention_usage(up, up[::-1])[0] == pytest.approx(-1.0)


def test_pool_and_metrics():
    p = gc.pool([0.2, 0.4, 0.6, 0.8])
    assert p["tail"] == pytest.approx(0.2)
    assert p["mean"] == pytest.approx(0.5)
    assert gc.pool([0.5, 0.9])["ema"] == pytest.approx(0.54)
    assert gc.auroc([0.9, 0.8, 0.3, 0.2], [1, 0, 1, 0]) == pytest.approx(0.75)
    assert gc.average_precision([0.9, 0.8, 0.7], [0, 1, 1]) == pytest.approx(7 / 12)
    assert gc.spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_chair_and_isotonic():
    assert gc.chair("heavy snow alps", "snow alps night") == pytest.approx(1 / 3)
    iso = gc.fit_isotonic([1, 2, 3], [3, 1, 2])
    assert iso.predict_many([1, 2, 3]) == pytest.approx([2, 2, 2])


def test_mediation():
    product, total = gc.mediation_gap_exact(0.5, 0.1, 0.7, 0.3)
    assert product == pytest.approx(0.16, abs=1e-12)
    assert total == pytest.approx(product, abs=1e-12)
    assert abs(gc.mediation_gap_mc(0.5, 0.1, 0.7, 0.3, 200000, 3) - 0.16) < 0.01


def test_generate_and_score_lines():
    traces, sidecar = gc.generate("gf-like", 20, 11)
    assert len(traces) == len(sidecar) == 20
    again, _ = gc.generate("gf-like", 20, 11)
    assert traces == again
    rec = json.loads(traces[0])
    assert gc.validate_trace_line(traces[0])
    scored = gc.score_trace_line(traces[0])
    assert len(scored["tokens"]) == len(rec["tokens"])
    side = json.loads(sidecar[0])
    assert gc.chair(rec["hypothesis"], rec["reference"]) == pytest.approx(
        side["hallucinated"] / side["content_count"] if side["content_count"] else 0.0
    )


def test_errors_map_to_python_exceptions():
    traces, _ = gc.generate("gf-like", 1, 11)
    rec = json.loads(traces[0])
    rec["tokens"][0]["cos_hid"] = 1.5
    with pytest.raises(gc.ValidationError, match="cos_hid"):
        gc.validate_trace_line(json.dumps(rec))
    with pytest.raises(gc.ParseError):
        gc.validate_trace_line("{oops")
    with pytest.raises(gc.NumericError):
        gc.fit_logistic([[1.0], [2.0]], [1, 1])
    assert issubclass(gc.ValidationError, ValueError)
    assert issubclass(gc.ParseError, gc.Error)
    assert issubclass(gc.ConvergenceError, ArithmeticError)


def test_logistic_direction():
    x = [[-1.0]] * 50 + [[1.0]] * 50
    y = [0] * 50 + [1] * 50
    w, _ = gc.fit_logistic(x, y)
    assert w[0] > 0


def test_run_cli_in_process(tmp_path):
    out = str(tmp_path / "t.jsonl")
    code, _, err = gc.run_cli(["synth", "-o", out, "--n", "30"])
    assert code == 0, err
    code, text, _ = gc.run_cli(["validate", out])
    assert code == 0
    assert text.startswith("ok")
    code, _, err = gc.run_cli(["nonsense"])
    assert code == 1


@pytest.mark.skipif("GROUNDCHECK_CLI" not in os.environ, reason="CLI binary path not provided")
def test_cli_binary_roundtrip(tmp_path):
    exe = os.environ["GROUNDCHECK_CLI"]
    traces = tmp_path / "t.jsonl"
    subprocess.run([exe, "synth", "-o", str(traces), "--n", "50"], check=True)
    res = subprocess.run([exe, "validate", str(traces)], capture_output=True, text=True)
    assert res.returncode == 0
    assert "ok" in res.stdout
