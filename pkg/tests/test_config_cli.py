import json

import numpy as np
import pytest

from stochcurve import cli, config


def tiny_doc(**over):
    doc = {
        "name": "tiny",
        "curve": {"kind": "Flower"},
        "physics": {"D": 0.01, "reaction": {"kind": "cubic", "params": {"root": -0.5}},
                    "advection": {"kind": "sine", "params": {"amplitude": 0.5}}},
        "initial": {"kind": "gaussian", "params": {"concentration": 100.0}},
        "noise": {"b1": 1.0, "rbar": 1.0, "sigma": {"kind": "LogisticClip", "sigma_bar": 0.5},
                  "L": "auto"},
        "grid": {"N": 16, "dt": 0.01, "T": 0.1},
        "sampling": {"S": 4, "master_seed": 7, "path": 1},
        "output": {"snapshots": [0.0, 0.05, 0.1]},
        "study": {"mode": "temporal", "ladder": [5, 2]},
    }
    doc.update(over)
    return doc


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_presets_validate():
    names = config.preset_names()
    assert "lps-evolving" in names and "wavefront-shrinking" in names
    for name in names:
        doc = config.load_preset(name)
        config.build_physics(doc)
        if "study" in doc:
            config.build_study(doc)


def test_table_analog_presets():
    doc = config.load_preset("wavefront-shrinking")
    assert doc["noise"]["rbar"] == 0.75
    assert doc["noise"]["sigma"]["sigma_bar"] == 0.5
    assert config.resolve_L(doc) == 301
    assert config.resolve_L(config.load_preset("wavefront-convergence")) == 2401


def test_schema_rejects():
    bad = tiny_doc()
    bad["grid"]["N"] = 2
    with pytest.raises(config.ConfigError, match="grid/N"):
        config.validate(bad)
    bad = tiny_doc(extra=1)
    with pytest.raises(config.ConfigError):
        config.validate(bad)


def test_builders():
    ph = config.build_physics(tiny_doc())
    assert ph.reaction(np.array([1.0, -0.5, 0.0])).tolist() == [0.0, 0.0, 0.0]
    assert ph.initial(np.array([np.pi]))[0] == 1.0
    np.testing.assert_allclose(ph.advection(0.0, np.array([np.pi / 2])), 0.5)
    with pytest.raises(config.ConfigError):
        config.build_study(tiny_doc(study={"ladder": [3]}))


def test_run_byte_identical(tmp_path):
    cfg = write(tmp_path, tiny_doc())
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert cli.main(["run", cfg, "--out", str(out), "--no-timestamp"]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"diagnostics.csv", "snapshot_0000000.csv",
                            "snapshot_0000005.csv", "snapshot_0000010.csv"}
    lines = outs[0]["snapshot_0000005.csv"].decode().splitlines()
    assert lines[0] == "node_index,x,c"
    assert len(lines) == 17
    idx, x, c = lines[1].split(",")
    assert idx == "1" and len(x.split("e")[0].replace(".", "").lstrip("-")) == 17


def test_timestamp_line(tmp_path):
    cfg = write(tmp_path, tiny_doc())
    cli.main(["run", cfg, "--out", str(tmp_path / "o")])
    assert (tmp_path / "o" / "diagnostics.csv").read_text().startswith("# generated ")


def test_output_dir_env(tmp_path, monkeypatch):
    doc = tiny_doc()
    doc.pop("output")
    cfg = write(tmp_path, doc)
    monkeypatch.setenv("STOCHCURVE_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["run", cfg, "--no-timestamp"]) == 0
    assert (tmp_path / "env" / "diagnostics.csv").exists()


def test_zero_data_run_gives_zero_snapshots(tmp_path):
    cfg = write(tmp_path, tiny_doc(initial={"kind": "zero"}))
    cli.main(["run", cfg, "--out", str(tmp_path / "z"), "--no-timestamp"])
    for p in (tmp_path / "z").glob("snapshot_*.csv"):
        c = np.loadtxt(p, delimiter=",", skiprows=1)[:, 2]
        assert not c.any()


def test_exit_code_schema(tmp_path, capsys):
    cfg = write(tmp_path, {"curve": {"kind": "Ellipse"}})
    assert cli.main(["run", cfg]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_exit_code_off_grid_snapshot(tmp_path):
    cfg = write(tmp_path, tiny_doc(output={"snapshots": [0.033]}))
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_exit_code_blowup(tmp_path, capsys):
    doc = tiny_doc(initial={"kind": "constant", "params": {"value": 5.0}})
    doc["physics"]["reaction"] = {"kind": "cubic", "params": {"scale": 100.0, "root": 0.0}}
    doc["grid"] = {"N": 8, "dt": 0.1, "T": 2.0}
    doc["output"] = {"snapshots": [2.0]}
    cfg = write(tmp_path, doc)
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_BLOWUP
    assert "blow-up" in capsys.readouterr().err


def test_converge_csv(tmp_path):
    cfg = write(tmp_path, tiny_doc())
    assert cli.main(["converge", cfg, "--out", str(tmp_path), "--no-timestamp"]) == 0
    lines = (tmp_path / "errors_temporal.csv").read_text().splitlines()
    assert lines[0] == "h,dt,E_S,eoc"
    assert lines[1].endswith(",")  # first row has no eoc
    assert len(lines) == 3 and not lines[2].endswith(",")


def test_vanish_json(tmp_path):
    cfg = write(tmp_path, tiny_doc())
    assert cli.main(["vanish", cfg, "--out", str(tmp_path), "--threshold", "1e6"]) == 0
    res = json.loads((tmp_path / "vanish.json").read_text())
    assert res == {"fraction": 1.0, "S": 4, "threshold": 1e6, "blowups": 0}


def test_ritz_cli(tmp_path, capsys):
    assert cli.main(["ritz", "--curve", "Flower", "--time", "0.5", "--function", "sin3",
                     "--out", str(tmp_path), "--no-timestamp"]) == 0
    text = (tmp_path / "ritz_Flower_sin3.csv").read_text().splitlines()
    assert text[0] == "N,h,l2_error,h1_error,condition" and len(text) == 5
    assert "L2 slope" in capsys.readouterr().out


def test_presets_and_schema_commands(capsys):
    assert cli.main(["presets"]) == 0
    assert "lps-evolving-desk" in capsys.readouterr().out
    assert cli.main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["title"] == config.SCHEMA["title"]
