"""End-to-end CLI runs through cli.run: exit codes, outputs, determinism."""

import json

import numpy as np
import pytest

from nehariphi import EstimateOptions, analyze_ray, bump_field, estimate_extremal
from nehariphi import cli as cl
from nehariphi import domain as dm
from conftest import make_problem
from nehariphi.nfunction import power

N_SUB = 32


def config_text(out_dir, *, lam=5.0, phi='{ family = "power", r = 2.0 }',
                p=3.0, extra=""):
    return (
        "[problem]\n"
        "dim = 1\n"
        "bounds = [0.0, 1.0]\n"
        f"subdivisions = {N_SUB}\n"
        "q = 1.5\n"
        f"p = {p!r}\n"
        f"lambda = {lam!r}\n"
        f"phi = {phi}\n"
        "\n[estimate]\n"
        "starts = 2\n"
        "max_iters = 400\n"
        "\n[output]\n"
        f"directory = {json.dumps(str(out_dir))}\n"
        + extra
    )


def put(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return str(path)


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


@pytest.fixture(scope="module")
def star32():
    prob = make_problem(power(2.0), 1.5, 3.0, n=N_SUB)
    return estimate_extremal(prob, EstimateOptions(starts=2, max_iters=400, seed=0))


def test_validate_pass(tmp_path, capsys):
    cfg = put(tmp_path, config_text(tmp_path / "out"))
    assert cl.run(["validate", cfg]) == 0
    out = capsys.readouterr().out
    assert "all hypotheses pass" in out
    assert "weight" in out and "H4" in out


def test_validate_hypothesis_failure(tmp_path, capsys):
    # p equal to the upper growth index violates the gap requirement
    cfg = put(tmp_path, config_text(
        tmp_path / "out", phi='{ family = "double_power", r1 = 2.0, r2 = 3.0 }'))
    assert cl.run(["validate", cfg]) == 2
    assert "fail" in capsys.readouterr().out


def test_validate_weight_failure(tmp_path, capsys):
    w = tmp_path / "w.csv"
    dm.write_nodal_csv(w, np.zeros(N_SUB + 1))
    extra = f'\n[problem.weight]\nkind = "csv"\npath = {json.dumps(str(w))}\n'
    cfg = put(tmp_path, config_text(tmp_path / "out", extra=extra))
    assert cl.run(["validate", cfg]) == 2
    assert "weight" in capsys.readouterr().out


def test_missing_config_file(tmp_path):
    assert cl.run(["validate", str(tmp_path / "absent.toml")]) == 1


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = put(tmp_path, config_text(tmp_path / "out") + "\n[problem2]\nx = 1\n")
    assert cl.run(["validate", cfg]) == 1
    assert "unknown config keys: problem2" in capsys.readouterr().err


def test_invalid_toml(tmp_path):
    cfg = put(tmp_path, "problem = [[[")
    assert cl.run(["validate", cfg]) == 1


def test_unknown_subcommand():
    assert cl.run(["frobnicate"]) == 1


def test_ray_grid_peaks_at_known_radius(tmp_path, capsys):
    # scale the bump so its peak radius lands on the midpoint of a
    # symmetric log grid, then check the traced quotient peaks there
    prob = make_problem(power(2.0), 1.5, 3.0, n=N_SUB)
    summary = analyze_ray(prob, bump_field(prob.mesh))
    scale = 3.0 * summary.t_n
    extra = (
        "\n[ray]\n"
        'direction = "bump"\n'
        f"scale = {scale!r}\n"
        f"t_min = {1.0 / 300.0!r}\n"
        f"t_max = {100.0 / 3.0!r}\n"
        "samples = 49\n"
    )
    out = tmp_path / "out"
    cfg = put(tmp_path, config_text(out, lam=0.5 * summary.Lambda_n, extra=extra))
    assert cl.run(["ray", cfg]) == 0
    header, rows = read_csv(out / "ray.csv")
    assert header == ["t", "rn", "re", "gamma"]
    assert len(rows) == 49
    ts = np.array([float(r[0]) for r in rows])
    rn_col = np.array([float(r[1]) for r in rows])
    np.testing.assert_allclose(ts[24], 1.0 / 3.0, rtol=1e-11)
    assert int(np.argmax(rn_col)) == 24
    echoed = capsys.readouterr().out
    assert "t_n =" in echoed and "t_plus" in echoed


def test_estimate_outputs_and_reruns_identically(tmp_path):
    cfg = put(tmp_path, config_text(tmp_path / "out"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert cl.run(["estimate", cfg, "--out", str(a)]) == 0
    assert cl.run(["estimate", cfg, "--out", str(b)]) == 0
    for name in ("lambda_star.csv", "minimizer_n.csv", "minimizer_e.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header, rows = read_csv(a / "lambda_star.csv")
    assert header == ["quantity", "value", "starts", "iters", "seed"]
    values = {r[0]: float(r[1]) for r in rows}
    assert 0.0 < values["lambda_lower"] < values["lambda_star"]


def test_solve_writes_report_and_solutions(tmp_path, star32, capsys):
    out = tmp_path / "out"
    cfg = put(tmp_path, config_text(out, lam=0.5 * star32.lambda_star))
    assert cl.run(["solve", cfg, "--lambda-star", repr(star32.lambda_star)]) == 0
    header, rows = read_csv(out / "solve_report.csv")
    assert header[:4] == ["branch_requested", "status", "lambda", "branch"]
    assert [r[1] for r in rows] == ["ok", "ok"]
    assert [r[3] for r in rows] == ["N_plus", "N_minus"]
    for name in ("solution_plus.csv", "solution_minus.csv"):
        _, data = read_csv(out / name)
        assert len(data) == N_SUB + 1
    echoed = capsys.readouterr().out
    assert "plus: ok" in echoed and "minus: ok" in echoed


def test_solve_nonconvergence_exits_3(tmp_path, star32):
    out = tmp_path / "out"
    extra = "\n[solver]\nmax_iters = 1\n"
    cfg = put(tmp_path, config_text(out, lam=0.5 * star32.lambda_star, extra=extra))
    assert cl.run(["solve", cfg, "--lambda-star", repr(star32.lambda_star)]) == 3
    _, rows = read_csv(out / "solve_report.csv")
    assert "not_converged" in {r[1] for r in rows}


def test_solve_lambda_guard_exits_1(tmp_path, star32, capsys):
    cfg = put(tmp_path, config_text(tmp_path / "out", lam=1.2 * star32.lambda_star))
    assert cl.run(["solve", cfg, "--lambda-star", repr(star32.lambda_star)]) == 1
    assert "extremal estimate" in capsys.readouterr().err


def test_hypothesis_failure_on_solve_exits_2(tmp_path):
    cfg = put(tmp_path, config_text(
        tmp_path / "out", phi='{ family = "double_power", r1 = 2.0, r2 = 3.0 }'))
    assert cl.run(["solve", cfg, "--lambda-star", "1.0"]) == 2


def test_overwrite_refusal_and_force(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = put(tmp_path, config_text(out, lam=1.0))
    assert cl.run(["ray", cfg]) == 0
    assert cl.run(["ray", cfg]) == 1
    assert "refusing to overwrite" in capsys.readouterr().err
    assert cl.run(["ray", cfg, "--force"]) == 0


def test_continuation_path_length_and_final(tmp_path, star32, capsys):
    out = tmp_path / "out"
    extra = "\n[continuation]\nk_max = 3\n"
    cfg = put(tmp_path, config_text(out, lam=1.0, extra=extra))
    assert cl.run(["continue", cfg, "--lambda-star", repr(star32.lambda_star)]) == 0
    header, rows = read_csv(out / "continuation.csv")
    assert header[:2] == ["step", "lambda"]
    assert len(rows) == 4
    np.testing.assert_allclose(float(rows[-1][1]), star32.lambda_star, rtol=1e-11)
    assert (out / "final_solution.csv").exists()
    assert "final:" in capsys.readouterr().out


def test_sweep_thread_count_does_not_change_bytes(tmp_path, star32, monkeypatch):
    extra = (
        "\n[sweep]\n"
        "relative = true\n"
        "lambda_min = 0.5\n"
        "lambda_max = 0.9\n"
        "count = 4\n"
    )
    cfg = put(tmp_path, config_text(tmp_path / "out", lam=1.0, extra=extra))
    star, lower = repr(star32.lambda_star), repr(star32.lambda_lower)
    a, b = tmp_path / "a", tmp_path / "b"
    monkeypatch.setenv(cl.THREADS_ENV, "3")
    assert cl.run(["sweep", cfg, "--lambda-star", star,
                   "--lambda-lower", lower, "--out", str(a)]) == 0
    monkeypatch.setenv(cl.THREADS_ENV, "1")
    assert cl.run(["sweep", cfg, "--lambda-star", star,
                   "--lambda-lower", lower, "--out", str(b)]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    header, rows = read_csv(a / "sweep.csv")
    assert header[0] == "lambda" and header[5] == "sign_tag"
    assert len(rows) == 4
    assert {r[6] for r in rows} == {"ok"}
