import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lyaplab.config import ConfigError, config_to_dict, config_from_dict, parse_config
from lyaplab.results import SCHEMA_VERSION, ResultTable, emit, read_json
from lyaplab.scenarios import BUILTINS


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


MINIMAL = {"law": {"kind": "iid_finite", "support": [[[1, 0], [0, 1]]], "weights": [1.0]}, "n_max": 10}


def test_builtin_counterexample():
    cfg = parse_config("paper-counterexample")
    law = cfg.law
    assert law.kind == "markov_finite" and law.labels == ("a", "sigma", "omega")
    assert np.allclose(law.support[0], np.diag([3, 1, 1 / 3]))
    assert np.allclose(law.kernel, [[0.5, 0.5, 0], [0, 0, 1], [1, 0, 0]])
    assert np.allclose(law.initial, [0.5, 0.25, 0.25])


def test_minimal_config(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert cfg.dim == 2 and cfg.trials == 1 and cfg.name == "custom"


def test_complex_entries(tmp_path):
    obj = {"law": {"kind": "iid_finite", "support": [[[[0, 1], 0], [0, 1.5]]]}, "n_max": 5,
           "probe_vector": [[1, -1], 2]}
    cfg = parse_config(write(tmp_path, obj))
    assert cfg.law.support[0][0, 0] == 1j
    assert np.allclose(cfg.probe_vector, [1 - 1j, 2])


@pytest.mark.parametrize("mutate, path", [
    (lambda o: o["law"].update(support=[[[1, 0], [0, 1]], [[1, 0], [0, 1]]], weights=[0.5, 0.6]), "law.weights"),
    (lambda o: o["law"].update(support=[[[1, 2], [2, 4]]]), "law.support[0]"),
    (lambda o: o["law"].update(support=[[[1, "x"], [0, 1]]]), "law.support[0][0][1]"),
    (lambda o: o["law"].update(kind="gaussian"), "law.kind"),
    (lambda o: o.update(trials=0), "trials"),
    (lambda o: o.update(n_max="many"), "n_max"),
    (lambda o: o.update(epsilons=[0.1, -0.2]), "epsilons"),
    (lambda o: o.update(l_mu=[[1, 1]]), "l_mu"),
    (lambda o: o.update(surprise=1), "surprise"),
    (lambda o: o.pop("n_max"), "n_max"),
])
def test_config_errors_name_the_field(tmp_path, mutate, path):
    obj = json.loads(json.dumps(MINIMAL))
    mutate(obj)
    with pytest.raises(ConfigError) as err:
        parse_config(write(tmp_path, obj))
    assert err.value.path == path


def test_markov_kernel_errors(tmp_path):
    obj = {"law": {"kind": "markov_finite", "support": [[[1]], [[2]]], "kernel": [[0.5, 0.5], [0.3, 0.3]],
                   "initial": [1, 0]}, "n_max": 3}
    with pytest.raises(ConfigError) as err:
        parse_config(write(tmp_path, obj))
    assert err.value.path == "law.kernel[1]"


def test_malformed_and_missing_files(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.json")


def test_builtin_override_and_seed(tmp_path):
    cfg = parse_config(write(tmp_path, {"builtin": "sl2-irreducible", "trials": 3, "master_seed": 9}))
    assert cfg.name == "sl2-irreducible" and cfg.trials == 3 and cfg.master_seed == 9
    assert parse_config("sl2-irreducible", seed=4).master_seed == 4


@pytest.mark.parametrize("name", list(BUILTINS))
def test_config_dict_round_trip(name):
    cfg = parse_config(name)
    again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
    assert config_to_dict(again) == config_to_dict(cfg)


# ---------------------------------------------------------------- results


def table(rows=None, summary=None):
    return ResultTable(SCHEMA_VERSION, {"name": "t"}, ["n", "x", "label"],
                       rows if rows is not None else [[1, 0.1, "a,b"], [2, float("nan"), 'q"q']],
                       summary or {"lambda": np.array([1.0, -1.0]), "checks": {"ok": True}})


def test_empty_rows_give_header_only_csv():
    assert emit(table(rows=[]), "csv") == "n,x,label\r\n"


def test_csv_quoting_and_precision():
    text = emit(table(rows=[[1, 1 / 3, "a,b"], [2, None, 'q"q']]), "csv")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[1] == ["1", "0.33333333333333331", "a,b"]
    assert rows[2] == ["2", "", 'q"q']
    assert float(rows[1][1]) == 1 / 3


def test_json_round_trip(tmp_path):
    t = table()
    p = tmp_path / "out.json"
    emit(t, "json", p)
    back = read_json(p)
    assert back.rows == t.rows and back.summary == t.summary and back.columns == t.columns
    obj = json.loads(p.read_text())
    assert set(obj) >= {"schema", "scenario", "rows", "summary"}
    assert obj["rows"][1]["x"] is None  # non-finite -> null


def test_output_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(table(), "csv", a)
    emit(table(), "csv", b)
    assert a.read_bytes() == b.read_bytes()


def test_row_width_is_checked():
    with pytest.raises(ValueError):
        table(rows=[[1, 2]])


def test_io_error_names_path(tmp_path):
    with pytest.raises(OSError, match="nodir"):
        emit(table(), "csv", tmp_path / "nodir" / "x.csv")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), max_size=20))
def test_csv_and_json_carry_identical_numbers(xs):
    t = ResultTable(SCHEMA_VERSION, {}, ["x"], [[x] for x in xs], {})
    from_csv = [float(r[0]) for r in list(csv.reader(io.StringIO(emit(t, "csv"))))[1:]]
    from_json = [r["x"] for r in json.loads(emit(t, "json"))["rows"]]
    assert from_csv == [float(x) for x in from_json] == [float(x) for x in xs]
    assert all(math.isfinite(v) for v in from_csv)
