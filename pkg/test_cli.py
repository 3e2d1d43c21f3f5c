"""
CLI 테스트
=========
서브커맨드 payload, 종료 코드, stderr 에러 객체, 출력 형식
"""

import json

import pytest

from cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def payload_of(out):
    record = json.loads(out)
    assert record["tool_version"] == "1.0.0"
    return record["payload"]


def last_error(err):
    return json.loads([line for line in err.splitlines() if line.strip()][-1])


def test_group_info(capsys):
    code, out, _ = run(capsys, "group-info", "--group", "gl2:3", "--log-level", "WARNING")
    assert code == 0
    payload = payload_of(out)
    assert payload["order"] == 48
    assert payload["kappa"] == 8
    assert payload["cp"] == "1/6"
    assert payload["is_abelian"] is False


def test_exact_expectation_methods(capsys):
    code, out, _ = run(capsys, "exact-expectation", "--group", "sym:3", "--k", "2", "--log-level", "WARNING")
    assert code == 0
    assert payload_of(out)["value"] == "28/5"

    code, out, _ = run(capsys, "exact-expectation", "--group", "sym:3", "--k", "2",
                       "--method", "PRINTED_CLOSED_FORM", "--log-level", "WARNING")
    assert code == 0
    payload = payload_of(out)
    assert payload["value"] == "6"
    assert payload["discrepancy"] == "2/5"


def test_action_expectation_with_bounds(capsys):
    code, out, _ = run(capsys, "exact-expectation", "--group", "cyclic:6", "--k", "2", "--variant", "ACTION",
                       "--h", "2", "--bounds", "ORDERED_CORRECTED", "--log-level", "WARNING")
    assert code == 0
    payload = payload_of(out)
    assert payload["value"] == "24/5"
    assert payload["bounds"]["upper"] == "24/5"


def test_energy_of_a_sidon_set(capsys):
    code, out, _ = run(capsys, "energy", "--group", "cyclic:100", "--a", "0,1,3,7", "--log-level", "WARNING")
    assert code == 0
    payload = payload_of(out)
    assert payload["energy"] == 28
    assert payload["product_set_size"] == 10


def test_energy_of_model_words(capsys):
    code, out, _ = run(capsys, "energy", "--model", "free:2", "--a", "a;b", "--d", "aa;AA;bb",
                       "--log-level", "WARNING")
    assert code == 0
    assert payload_of(out)["energy"] == 6


def test_thin_basis_csv(capsys):
    code, out, _ = run(capsys, "thin-basis", "--n", "4", "--format", "csv", "--log-level", "WARNING")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header.split(",")[:2] == ["n", "a_count"]
    assert row.split(",")[:2] == ["4", "5"]


def test_mc_estimate_ignores_thread_count(capsys):
    common = ["mc-estimate", "--group", "sym:4", "--k", "5", "--trials", "500", "--seed", "11",
              "--log-level", "WARNING"]
    code_one, out_one, _ = run(capsys, *common, "--threads", "1")
    code_three, out_three, _ = run(capsys, *common, "--threads", "3")
    assert code_one == code_three == 0
    assert payload_of(out_one) == payload_of(out_three)


def test_bad_spec_exits_with_code_3(capsys):
    code, out, err = run(capsys, "group-info", "--group", "sym:x")
    assert code == 3
    assert out == ""
    error = last_error(err)
    assert error["error"] == "malformed_spec"
    assert error["success"] is False


def test_brute_force_cap_exits_with_code_4(capsys):
    code, _, err = run(capsys, "brute-force", "--group", "sym:4", "--k", "4", "--cap-brute", "10")
    assert code == 4
    assert last_error(err)["error"] == "cap_exceeded"


def test_model_without_radius(capsys):
    code, _, err = run(capsys, "mc-estimate", "--model", "free:2", "--k", "2", "--trials", "10")
    assert code == 3
    assert "radius" in last_error(err)["message"]


def test_out_file(capsys, tmp_path):
    target = tmp_path / "cover.json"
    code, out, _ = run(capsys, "power-cover", "--group", "sym:3", "--a", "0,2,3", "--m", "3",
                       "--out", str(target), "--log-level", "WARNING")
    assert code == 0
    assert out == ""
    record = json.loads(target.read_text(encoding="utf-8"))
    assert record["payload"]["sizes"] == [3, 6, 6]
    assert record["config"]["m"] == 3


@pytest.mark.slow
def test_validate_small_battery(capsys):
    code, out, _ = run(capsys, "validate", "--groups", "cyclic:5", "sym:3", "gl2:2", "--max-k", "3",
                       "--log-level", "WARNING")
    assert code == 0
    payload = payload_of(out)
    assert payload["failed"] == 0
    assert payload["total_checks"] > 0


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["exact-expectation", "--group", "sym:3", "--k", "two"],
    ["energy", "--group", "sym:3"],
    ["group-info", "--group", "sym:3", "--no-such-flag"],
])
def test_usage_errors_are_one_json_line(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == ""
    error = last_error(err)
    assert error["success"] is False
    assert error["error"] == "usage_error"
    assert error["exit_code"] == 2
