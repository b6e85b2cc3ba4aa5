import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinfactory import __version__
from spinfactory.cli import SWEEP_COLUMNS, parse_config, run
from spinfactory.exceptions import SchemaError

STATE = {
    "sites": [{"spin": 0.5}, {"spin": 0.5}, {"spin": 0.5}, {"spin": 0.5}],
    "bonds": [{"i": 0, "j": 1}, {"i": 1, "j": 2}, {"i": 2, "j": 3}],
    "options": {"seed": 7},
}
INFER = {
    "sites": [{"spin": 0.5, "theta": np.pi / 3, "phi": np.pi / 5}, {"spin": 0.5}, {"spin": 0.5}],
    "bonds": [{"i": 0, "j": 1, "coupling": [1, 0.75, -0.2]}, {"i": 1, "j": 2, "coupling": [1, 0.75, -0.2]}],
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=1))
    return str(p)


@pytest.fixture
def designed(tmp_path):
    state = write(tmp_path, "state.json", STATE)
    out = str(tmp_path / "designed.json")
    assert run(["design", "--state", state, "--j-norm", "1", "--h-par", "1.5", "--out", out]) == 0
    return out


def read_csv(path):
    lines = open(path).read().splitlines()
    return lines[0], lines[1].split(","), [l.split(",") for l in lines[2:]]


def test_parse_minimal_pair():
    cfg = parse_config(json.dumps({"sites": [{"spin": 0.5}, {"spin": 1}], "bonds": [{"i": 0, "j": 1, "coupling": [1, 2, 3]}]}))
    sys_ = cfg.system()
    assert len(sys_.bonds) == 1 and np.allclose(np.diag(sys_.bonds[0].matrix), [1, 2, 3])
    assert cfg.seed == 42 and cfg.tolerance == 1e-10


def test_parse_reference_infer_config():
    cfg = parse_config(json.dumps(INFER))
    assert cfg.angles[0].theta == pytest.approx(np.pi / 3)
    assert cfg.angles[1] is None


@pytest.mark.parametrize(
    "text,field",
    [
        ('{"sites": [{"spin": 0.7}]}', "sites[0].spin"),
        ('{"sites": [{"spin": 0.5}], "bogus": 1}', "bogus"),
        ('{"sites": [{"spin": 0.5, "theta": 1}]}', "sites[0]"),
        ('{"sites": [{"spin": 0.5}, {"spin": 0.5}], "bonds": [{"i": 0, "j": 1, "coupling": [1, 2]}]}', "bonds[0].coupling"),
        ('{"sites": [{"spin": 0.5}], "fields": [[0, 0, 1], [0, 0, 1]]}', "fields"),
        ('{"sites": [{"spin": 0.5}], "options": {"seed": -1}}', "options.seed"),
        ('{"sites": [{"spin": 0.5}], "options": {"colour": 1}}', "options"),
    ],
)
def test_schema_errors_name_the_field(text, field):
    with pytest.raises(SchemaError) as exc:
        parse_config(text)
    assert exc.value.field == field


def test_schema_error_reports_line():
    with pytest.raises(SchemaError) as exc:
        parse_config('{"sites": [\n {"spin": 0.5},\n {"spin": 1.5,}\n]}')
    assert exc.value.line == 3
    with pytest.raises(SchemaError) as exc:
        parse_config('{\n "sites": [\n  {"spin": 0.5},\n  {"spin": 0.25}\n ]\n}')
    assert exc.value.line == 4


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 5.0).filter(lambda s: abs(2 * s - round(2 * s)) > 1e-6))
def test_non_half_integer_spins_rejected(spin):
    with pytest.raises(SchemaError):
        parse_config(json.dumps({"sites": [{"spin": spin}]}))


def test_design_then_verify(designed, tmp_path, capsys):
    assert run(["verify", "--system", designed]) == 0
    out = capsys.readouterr().out
    assert float(out.split()[1]) < 1e-10
    data = json.load(open(designed))
    data["fields"][1][0] += 0.05
    tampered = write(tmp_path, "tampered.json", data)
    assert run(["verify", "--system", tampered]) == 2


def test_design_output_carries_provenance(designed):
    data = json.load(open(designed))
    assert data["meta"]["tool"] == f"spinfactory {__version__}"
    assert set(data) == {"sites", "bonds", "fields", "h_parallel", "options", "meta"}
    assert data["h_parallel"] == [1.5] * 4


def test_spectrum_and_sweep_csv(designed, tmp_path):
    out = str(tmp_path / "spec.csv")
    assert run(["spectrum", "--system", designed, "--h-par", "0:3:4", "--out", out]) == 0
    comment, header, rows = read_csv(out)
    sha = hashlib.sha256(open(designed, "rb").read()).hexdigest()
    assert comment == f"# spinfactory {__version__} config_sha256={sha}"
    assert header[0] == "h_par" and len(rows) == 4
    out = str(tmp_path / "sweep.csv")
    assert run(["sweep", "--system", designed, "--mode", "coupling", "--range", "-0.02:0.02:3", "--pairs", "0,1;1,3", "--out", out]) == 0
    comment, header, rows = read_csv(out)
    assert header == SWEEP_COLUMNS
    assert [(float(r[0]), r[1], r[2]) for r in rows] == [(-0.02, "0", "1"), (-0.02, "1", "3"), (0.0, "0", "1"), (0.0, "1", "3"), (0.02, "0", "1"), (0.02, "1", "3")]
    assert all(float(r[3]) < 1e-10 for r in rows if float(r[0]) == 0.0)
    assert all(float(r[3]) > 1e-6 for r in rows if r[1:3] == ["0", "1"] and float(r[0]) != 0.0)


def test_sweep_is_byte_identical(designed, tmp_path):
    outs = []
    for k in range(2):
        out = str(tmp_path / f"s{k}.csv")
        assert run(["sweep", "--system", designed, "--mode", "field", "--range", "0:0.05:3", "--out", out]) == 0
        outs.append(open(out, "rb").read())
    assert outs[0] == outs[1]
    # 17 significant digits round-trip exactly
    for line in outs[0].decode().splitlines()[2:]:
        for tok in line.split(","):
            assert repr(float(tok)) == repr(float(format(float(tok), ".17g")))


def test_parallel_sweep_fig4_style(designed, tmp_path):
    out = str(tmp_path / "par.csv")
    assert run(["sweep", "--system", designed, "--mode", "parallel", "--range", "3:4:2", "--out", out]) == 0
    _, _, rows = read_csv(out)
    assert len(rows) == 12 and all(float(r[3]) < 1e-10 for r in rows)


def test_infer_command(tmp_path):
    system = write(tmp_path, "infer.json", INFER)
    out = str(tmp_path / "inf.csv")
    assert run(["infer", "--system", system, "--branches", "all", "--out", out]) == 0
    _, header, rows = read_csv(out)
    assert header == ["config", "branch", "site", "theta", "phi", "nx", "ny", "nz", "free"]
    assert len(rows) == 4 * 3
    site1 = sorted({tuple(round(float(x), 5) for x in r[5:8]) for r in rows if r[2] == "1"})
    assert (-0.78558, 0.39661, 0.47493) in site1 and (0.49984, -0.67342, 0.54467) in site1
    assert run(["infer", "--system", system, "--branches", "10", "--out", out]) == 0
    assert len(read_csv(out)[2]) == 3
    assert run(["infer", "--system", system, "--branches", "102", "--out", out]) == 1
    assert run(["infer", "--system", system, "--seed-site", "1", "--out", out]) == 1  # no angles on site 1


def test_infer_rejects_non_chain(tmp_path):
    cfg = dict(INFER, bonds=[{"i": 0, "j": 2, "coupling": [1, 1, 1]}, {"i": 1, "j": 2, "coupling": [1, 1, 1]}])
    assert run(["infer", "--system", write(tmp_path, "bad.json", cfg)]) == 1


def test_spiral_and_complexity(tmp_path, capsys):
    out = str(tmp_path / "spiral.csv")
    assert run(["spiral", "--n", "6", "--k", "1", "--theta", "0.8", "--j", "1", "--h-par", "1", "--out", out]) == 0
    _, header, rows = read_csv(out)
    assert len(rows) == 6 and all(abs(float(x)) < 1e-12 for r in rows for x in r[3:])
    assert run(["spiral", "--n", "6", "--k", "0"]) == 1
    assert run(["spiral", "--n", "6", "--k", "1", "--open", "--out", out]) == 0
    assert run(["complexity", "--scenario", "tunable-open-chain", "--n", "8"]) == 0
    assert "m=7 k=7" in capsys.readouterr().out
    assert run(["complexity", "--scenario", "nonsense"]) == 1


def test_usage_and_io_errors(tmp_path):
    assert run([]) == 1
    assert run(["verify", "--system", str(tmp_path / "missing.json")]) == 1
    assert run(["sweep", "--system", "x", "--mode", "sideways", "--range", "0:1:2"]) == 1


def test_random_directions_follow_seed(tmp_path):
    state = write(tmp_path, "state.json", STATE)
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    run(["design", "--state", state, "--out", a])
    run(["design", "--state", state, "--out", b])
    assert open(a).read() == open(b).read()
    other = write(tmp_path, "state2.json", dict(STATE, options={"seed": 8}))
    c = str(tmp_path / "c.json")
    run(["design", "--state", other, "--out", c])
    assert json.load(open(a))["sites"] != json.load(open(c))["sites"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "spinfactory", "complexity", "--scenario", "fixed-pair"], capture_output=True, text=True)
    assert proc.returncode == 0 and "m=1 k=0" in proc.stdout
