"""End-to-end checks of the command-line interface."""

import pytest
from click.testing import CliRunner

import combqfi.bench as bench
from combqfi.analytic import (perp_damping_optimal, perp_dephasing_teeth,
                              strategy_from_teeth)
from combqfi.bench import read_rows, write_rows
from combqfi.cli import main
from combqfi.comb import link_strategy, save_comb
from combqfi.seesaw import random_strategy, save_strategy
from helpers import make_row


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, body):
    path = tmp_path / "exp.yaml"
    path.write_text(body)
    return str(path)


NOISELESS = """\
model:
  variant: noiseless
grid:
  n: [1, 2]
  d_a: [2]
  seeds: [0]
convergence:
  restarts: 1
  q0: 0.0
output:
  csv: {csv}
  plot: {plot}
"""


def test_help_lists_subcommands(runner):
    res = runner.invoke(main, ["--help"])
    assert res.exit_code == 0
    for name in ("optimize", "evaluate", "bound", "decompose", "split",
                 "plot"):
        assert name in res.output


def test_optimize_exit_zero_when_converged(tmp_path, runner):
    csv = tmp_path / "out.csv"
    svg = tmp_path / "out.svg"
    cfg = write_config(tmp_path, NOISELESS.format(csv=csv, plot=svg))
    res = runner.invoke(main, ["optimize", cfg])
    assert res.exit_code == 0, res.output
    assert "N=2" in res.output and "converged=True" in res.output
    rows = read_rows(csv)
    assert [row.n for row in rows] == [1, 2]
    assert rows[1].qfi == pytest.approx(4.0, rel=1e-3)
    assert svg.read_text().startswith("<svg ")


def test_optimize_exit_one_on_failure(tmp_path, runner, monkeypatch):
    def boom(model, n, config):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(bench, "optimize", boom)
    cfg = write_config(tmp_path, NOISELESS.format(
        csv=tmp_path / "out.csv", plot=""))
    res = runner.invoke(main, ["optimize", cfg])
    assert res.exit_code == 1
    assert "converged=False" in res.output


def test_optimize_env_override(tmp_path, runner, monkeypatch):
    moved = tmp_path / "moved.csv"
    monkeypatch.setenv(bench.CSV_ENV, str(moved))
    cfg = write_config(tmp_path, NOISELESS.format(
        csv=tmp_path / "ignored.csv", plot=""))
    cfg_obj = bench.load_config(cfg)
    assert cfg_obj.resolved_csv_path() == str(moved)
    res = runner.invoke(main, ["optimize", cfg])
    assert res.exit_code == 0, res.output
    assert moved.exists()
    assert not (tmp_path / "ignored.csv").exists()


def test_evaluate_scores_a_saved_strategy(tmp_path, runner):
    path = tmp_path / "strategy.json"
    save_strategy(path, strategy_from_teeth(perp_dephasing_teeth(2, 0.9)))
    res = runner.invoke(main, ["evaluate", str(path), "--variant",
                               "dephasing_perp", "--p", "0.9"])
    assert res.exit_code == 0, res.output
    qfi = float(res.output.split("qfi=")[1].split()[0])
    assert qfi == pytest.approx(3.6, abs=1e-9)


def test_evaluate_rejects_non_strategy_container(tmp_path, runner):
    strat = random_strategy(2, 2, seed=0)
    path = tmp_path / "comb.json"
    save_comb(path, link_strategy(strat))
    res = runner.invoke(main, ["evaluate", str(path), "--variant",
                               "noiseless"])
    assert res.exit_code != 0


def test_input_errors_are_one_line_messages(tmp_path, runner):
    # Malformed inputs must not leak tracebacks through the CLI.
    cfg = tmp_path / "exp.yaml"
    cfg.write_text("model:\n  variant: noiseless\nsolver:\n  restarts: 1\n")
    res = runner.invoke(main, ["optimize", str(cfg)])
    assert res.exit_code == 1
    assert "Error: unknown key 'restarts' in section 'solver'" in res.output
    box = tmp_path / "bad.json"
    box.write_text('{"hello": 1}')
    res = runner.invoke(main, ["evaluate", str(box), "--variant",
                               "noiseless"])
    assert res.exit_code == 1
    assert "Error: not a combqfi-tensors document" in res.output


@pytest.mark.parametrize("args, expected", [
    (["--variant", "dephasing_perp", "--p", "0.75", "--n", "2"], 3.0),
    (["--variant", "dephasing_parallel", "--p", "0.85", "--n", "3"],
     3 * 0.35 ** 2 / (0.85 * 0.15)),
    (["--variant", "damping_perp", "--p", "0.75", "--n", "5"],
     perp_damping_optimal(5, 0.75).fi),
])
def test_bound_values(runner, args, expected):
    res = runner.invoke(main, ["bound"] + args)
    assert res.exit_code == 0, res.output
    assert float(res.output) == pytest.approx(expected, rel=1e-12)


def test_bound_usage_errors(runner):
    res = runner.invoke(main, ["bound", "--variant", "noiseless",
                               "--p", "0.5"])
    assert res.exit_code != 0
    assert "no analytic reference" in res.output
    res = runner.invoke(main, ["bound", "--variant", "dephasing_perp",
                               "--p", "0.5", "--n", "3"])
    assert res.exit_code != 0


def test_decompose_reports_residuals(tmp_path, runner):
    strat = random_strategy(3, 2, seed=5)
    path = tmp_path / "comb.json"
    save_comb(path, link_strategy(strat))
    res = runner.invoke(main, ["decompose", str(path)])
    assert res.exit_code == 0, res.output
    assert "n=3" in res.output
    assert "bond dims=" in res.output
    assert res.output.count("isometry residual=") == 3
    recon = float(res.output.split("reconstruction residual=")[1].split()[0])
    assert recon < 1e-7


def test_split_rewrites_the_table(tmp_path, runner):
    rows = [
        make_row(n=1, qfi=1.0, qfi_per_n=1.0, split_qfi_per_n=1.0),
        make_row(n=2, qfi=1.2, qfi_per_n=0.6, split_qfi_per_n=0.6),
    ]
    src = tmp_path / "in.csv"
    write_rows(src, rows)
    out = tmp_path / "out.csv"
    res = runner.invoke(main, ["split", str(src), "-o", str(out)])
    assert res.exit_code == 0, res.output
    back = read_rows(out)
    assert back[1].split_qfi_per_n == pytest.approx(1.0)
    assert back[1].qfi_per_n == pytest.approx(0.6)
    # source untouched when an output path is given
    assert read_rows(src)[1].split_qfi_per_n == pytest.approx(0.6)


def test_split_in_place_default(tmp_path, runner):
    rows = [make_row(n=1, qfi=2.0, qfi_per_n=2.0, split_qfi_per_n=2.0),
            make_row(n=2, qfi=3.0, qfi_per_n=1.5, split_qfi_per_n=1.5)]
    src = tmp_path / "t.csv"
    write_rows(src, rows)
    res = runner.invoke(main, ["split", str(src)])
    assert res.exit_code == 0
    assert read_rows(src)[1].split_qfi_per_n == pytest.approx(2.0)


def test_plot_renders_csv(tmp_path, runner):
    rows = [make_row(n=n, qfi=float(n * n), qfi_per_n=float(n),
                     split_qfi_per_n=float(n)) for n in (1, 2, 3)]
    src = tmp_path / "t.csv"
    write_rows(src, rows)
    out = tmp_path / "chart.svg"
    res = runner.invoke(main, ["plot", str(src), "-o", str(out),
                               "--title", "demo"])
    assert res.exit_code == 0, res.output
    text = out.read_text()
    assert text.startswith("<svg ")
    assert "demo" in text


def test_plot_empty_table_fails(tmp_path, runner):
    src = tmp_path / "t.csv"
    write_rows(src, [])
    res = runner.invoke(main, ["plot", str(src), "-o",
                               str(tmp_path / "x.svg")])
    assert res.exit_code != 0


def test_missing_file_arguments(runner):
    assert runner.invoke(main, ["optimize", "absent.yaml"]).exit_code != 0
    assert runner.invoke(main, ["plot", "absent.csv"]).exit_code != 0
