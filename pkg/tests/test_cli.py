import csv
import io
import json
import math
from pathlib import Path

import pytest

from permsums import cli

GOLDEN = Path(__file__).parent / "golden" / "verify_all_schema.json"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def schema(obj):
    """Shape of a JSON value: key names and value kinds, lists by their first entry."""
    if isinstance(obj, dict):
        return {k: schema(v) for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return [schema(obj[0])] if obj else []
    if isinstance(obj, bool):
        return "bool"
    if isinstance(obj, (int, float)):
        return "number"
    if obj is None:
        return "null"
    return "string"


def test_pk_exact_example():
    code, out, err = call("pk-exact", "--k", "2")
    assert code == 0
    payload = json.loads(out)
    assert payload["p_k"] == pytest.approx(1 - 2 * math.exp(-1.5), abs=1e-12)
    assert "0.5537396797031402" in out  # 17 significant digits
    assert "done" in err


def test_gfun_fourier_example():
    code, out, _ = call("gfun-fourier", "--m", "0")
    assert code == 0
    assert json.loads(out)["real"] == pytest.approx(5.1278218186, abs=1e-8)


def test_pk_mc_is_deterministic_and_thread_independent():
    a = call("pk-mc", "--k", "1", "--samples", "100000", "--seed", "7")[1]
    b = call("pk-mc", "--k", "1", "--samples", "100000", "--seed", "7")[1]
    c = call("pk-mc", "--k", "1", "--samples", "100000", "--seed", "7", "--threads", "4")[1]
    assert a == b == c
    assert json.loads(a)["p_k"] == 0.63375


def test_ink_exact_fraction():
    code, out, _ = call("ink-exact", "--n", "4", "--k", "2")
    assert code == 0
    assert json.loads(out)["i_nk"] == "5/12"


def test_csv_key_value_output():
    code, out, _ = call("pk-exact", "--k", "1", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["key", "value"]
    assert dict(rows[1:])["k"] == "1"


def test_csv_table_output():
    code, out, _ = call("end-to-end", "--k-list", "256,512", "--samples", "2000", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["k"] for r in rows] == ["256", "512"]


def test_tau_and_rho_with_values():
    code, out, _ = call("tau", "--values", "1,2,3")
    assert code == 0 and json.loads(out)["distinct_sums"] == 7
    # window exponent is the largest u, so [3/4, 1] catches 3/4 twice and 1 once
    code, out, _ = call("rho", "--values", "1,1,2")
    assert code == 0 and json.loads(out)["count"] == 3


def test_negative_mode_list():
    code, out, _ = call("mu-fourier", "--m-mode=-1,0,1", "--ell", "8", "--samples", "500")
    assert code == 0
    assert out.strip().startswith("{")


@pytest.mark.parametrize("argv,code", [
    (("pk-exact", "--k", "0"), 64),          # range-checked flag
    (("pk-exact", "--bogus", "1"), 64),      # unknown flag
    (("no-such-command",), 64),
    (("gfun-fourier", "--m", "65"), 2),
    (("walk-llt", "--m", "-1"), 2),
    (("ink-exact", "--n", "4", "--k", "9"), 2),
    (("pk-exact", "--k", "21"), 3),
    (("ink-exact", "--n", "50", "--k", "3"), 3),
    (("mu-fourier", "--ell", "60", "--samples", "10"), 3),
    (("verify-all", "--budget", "10"), 2),
    (("verify-all", "--only", "99"), 2),
])
def test_exit_codes(argv, code):
    got, out, err = call(*argv)
    assert got == code
    assert out == ""
    assert err


def test_run_record_roundtrip_and_replay(tmp_path):
    rec_path = tmp_path / "rec.json"
    code, out, _ = call("thinning", "--k", "64", "--samples", "5000", "--seed", "3",
                        "--out", str(rec_path))
    assert code == 0
    data = json.loads(rec_path.read_text())
    assert set(data) == {"command", "params", "build", "seed", "wall_time_s", "results"}
    assert len(data["build"]) == 12 and data["build"] == cli.build_id()
    rec = cli.RunRecord.from_dict(data)
    again = json.loads(cli.dumps(cli.replay(rec)))
    assert again == json.loads(out) == data["results"]


def test_replay_with_negative_modes(tmp_path):
    rec_path = tmp_path / "rec.json"
    code, out, _ = call("muprime-fourier", "--m-mode=-1,1", "--ell", "10", "--samples", "400",
                        "--out", str(rec_path))
    assert code == 0
    rec = cli.RunRecord.from_dict(json.loads(rec_path.read_text()))
    assert cli.dumps(cli.replay(rec)) == out.strip()


def test_verify_all_schema_is_stable():
    code, out, _ = call("verify-all", "--only", "1,2", "--budget", "60")
    assert code == 0
    payload = json.loads(out)
    assert payload["all_gating_passed"] is True
    assert [c["status"] for c in payload["criteria"]] == ["pass", "pass"]
    assert schema(payload) == json.loads(GOLDEN.read_text())


def test_verify_all_failing_criterion_exits_one():
    code, out, _ = call("verify-all", "--only", "7", "--budget", "60")
    assert code == 1
    assert json.loads(out)["criteria"][0]["status"] == "fail"


def test_help_exits_zero():
    assert call("--help")[0] == 0
