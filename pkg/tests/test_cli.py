import json
import math
import pathlib

import pytest

from resetlab.cli import main
from resetlab.config import TABLE1

ROOT = pathlib.Path(__file__).resolve().parents[1]


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def test_crone_demo_passes(tmp_path):
    assert main(["crone", "--config", str(ROOT / "configs/crone_demo.json"),
                 "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "crone.csv").read_text().splitlines()
    assert lines[0] == "w_rad_s,approx_db,approx_deg,exact_db,exact_deg"
    assert len(lines) == 51


def test_crone_identity_and_bound(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"units": "Hz", "lam": 0.0, "w_l": 1.0, "w_h": 1e3})
    assert main(["crone", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "crone.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[1]) == pytest.approx(0.0, abs=1e-9) for r in rows)
    # too few sections for the band is a configuration error
    bad = write(tmp_path, "b.json", {"units": "rad/s", "lam": -0.5, "w_l": 1, "w_h": 1e4, "n": 3})
    assert main(["crone", "--config", bad]) == 2


@pytest.mark.parametrize("text", ["{broken", json.dumps({"units": "Hz", "lam": -0.5})])
def test_malformed_config(tmp_path, text):
    assert main(["crone", "--config", write(tmp_path, "m.json", text)]) == 2


def test_missing_config():
    assert main(["stability"]) == 2


def test_gamma_out_of_range(tmp_path):
    doc = {**TABLE1["SOSRE-1"].to_dict(), "gamma": 1.5}
    assert main(["stability", "--config", write(tmp_path, "g.json", doc)]) == 2


def test_hosidf_even_orders_and_columns(tmp_path):
    doc = TABLE1["SOSRE-2"].to_dict()
    assert main(["hosidf", "--config", write(tmp_path, "s.json", doc), "--out", str(tmp_path),
                 "--fmin", "0.5", "--fmax", "2", "--points", "13", "--orders", "1,2,3"]) == 0
    lines = (tmp_path / "hosidf_SOSRE-2.csv").read_text().splitlines()
    assert lines[0] == "freq_hz,order,re,im,mag_db,phase_deg,psi_deg,norm_db"
    rows = [l.split(",") for l in lines[1:]]
    assert len(rows) == 13 * 3
    assert all(float(r[2]) == 0 and float(r[3]) == 0 for r in rows if r[1] == "2")
    # notch of the third harmonic at 0.8 Hz
    third = [(float(r[0]), float(r[4])) for r in rows if r[1] == "3"]
    assert min(third, key=lambda x: x[1])[0] == pytest.approx(0.8, abs=0.07)
    assert main(["hosidf", "--config", write(tmp_path, "s.json", doc), "--fmin", "2",
                 "--fmax", "1"]) == 2


def test_hosidf_gamma_one_is_harmonic_free(tmp_path):
    doc = {**TABLE1["FOSRE-1"].to_dict(), "gamma": 1.0}
    assert main(["hosidf", "--config", write(tmp_path, "f.json", doc), "--out", str(tmp_path),
                 "--points", "5", "--scope", "lag"]) == 0
    rows = [l.split(",") for l in (tmp_path / "hosidf_FOSRE-1.csv").read_text().splitlines()[1:]]
    assert all(float(r[2]) == 0 for r in rows if r[1] in ("3", "5"))


def test_simulate_zero_and_sine(tmp_path):
    doc = TABLE1["PID"].to_dict()
    cfg = write(tmp_path, "p.json", doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--reference", "zero",
                 "--duration", "0.05", "--dt", "1e-4"]) == 0
    m = json.loads((tmp_path / "metrics_PID.json").read_text())
    assert m["rms"] == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--reference", "sine:4",
                 "--duration", "2.5", "--decimate", "50"]) == 0
    m = json.loads((tmp_path / "metrics_PID.json").read_text())
    assert m["rms"] == pytest.approx(3.69e-4, rel=0.02)
    head = (tmp_path / "trace_PID.csv").read_text().splitlines()[0]
    assert head == "t,r,e,u,y,reset_flag"
    assert main(["simulate", "--config", cfg, "--reference", "triangle"]) == 2


def test_simulate_dt_halving(tmp_path):
    cfg = write(tmp_path, "f.json", TABLE1["FOSRE-1"].to_dict())
    out = []
    for dt in ("1.25e-5", "6.25e-6"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--reference",
                     "sine:4", "--duration", "5", "--dt", dt, "--decimate", "1000"]) == 0
        out.append(json.loads((tmp_path / "metrics_FOSRE-1.json").read_text())["rms"])
    assert out[1] == pytest.approx(out[0], rel=0.005)


def test_stability_json(tmp_path):
    cfg = write(tmp_path, "p.json", {"units": "Hz", "controllers": [
        {k: v for k, v in TABLE1[n].to_dict().items() if k != "units"} for n in ("PID", "SOSRE-1")]})
    assert main(["stability", "--config", cfg, "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "stability.json").read_text())
    assert d["PID"]["hbeta_found"] and d["PID"]["n_r"] == 0
    assert d["SOSRE-1"]["lemma1"]["holds"] and d["SOSRE-1"]["n_r"] == 1


def test_tune(tmp_path):
    spec = write(tmp_path, "t.json", {"units": "Hz", "w_lb": 7.42, "w_c": 150.0, "max_evals": 40})
    assert main(["tune", "--config", spec, "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "tuned.json").read_text())
    assert d["type"] == "FOSRE-CgLp" and d["tuning"]["converged"]
    assert abs(d["tuning"]["psi_lb_deg"]) < 0.5
    assert -1 <= d["gamma"] <= 1
    bad = write(tmp_path, "b.json", {"units": "Hz", "w_lb": 200.0, "w_c": 150.0})
    assert main(["tune", "--config", bad]) == 2
