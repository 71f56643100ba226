import json
import subprocess
import sys

import pytest

from eqpost import cli
from eqpost.panel import read_panel_csv, read_params


def run(*argv):
    return cli.main([str(a) for a in argv])


SEPARATED = "pi1=0.2\npi2=0.3\npi3=0.5\nmu1=-2\nmu2=0\nmu3=2\ntau2_1=0.05\ntau2_2=0.05\ntau2_3=0.05\n"


@pytest.fixture
def panel_csv(tmp_path):
    truth_params = tmp_path / "truth_params.txt"
    truth_params.write_text(SEPARATED)
    path = tmp_path / "panel.csv"
    code = run("simulate", "--m", 800, "--seed", 5, "--params", truth_params,
               "-o", path, "--truth", tmp_path / "truth.csv")
    assert code == 0
    return path


class TestSimulate:
    def test_writes_panel_and_truth(self, panel_csv, tmp_path):
        panel = read_panel_csv(panel_csv)
        assert len(panel) == 800
        truth = (tmp_path / "truth.csv").read_text().splitlines()
        assert truth[0] == "gene_id,theta,equivalent,component"
        assert len(truth) == 801

    def test_bad_law(self, tmp_path):
        assert run("simulate", "--m", 10, "--sigma2", "normal:1", "-o", tmp_path / "x.csv") == cli.EXIT_INVALID


class TestFitScore:
    def test_pipeline(self, panel_csv, tmp_path, capsys):
        params = tmp_path / "params.txt"
        assert run("fit", panel_csv, "-o", params) == 0
        prior, meta = read_params(params)
        assert meta["converged"] == "true"
        assert int(meta["n_genes"]) == 800
        assert run("score", panel_csv, "--params", params) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "gene_id,p_equiv,q_value"
        assert len(out) == 801
        ps = [float(line.split(",")[1]) for line in out[1:]]
        assert ps == sorted(ps, reverse=True)

    def test_non_convergence_exit_code(self, panel_csv, tmp_path):
        code = run("fit", panel_csv, "-o", tmp_path / "p.txt", "--max-iters", 1)
        assert code == cli.EXIT_NOT_CONVERGED
        assert (tmp_path / "p.txt").exists()

    def test_custom_starts(self, panel_csv, tmp_path):
        params = tmp_path / "p.txt"
        assert run("fit", panel_csv, "-o", params, "--starts", "0.2,0.3,0.5", "--max-iters", 10) in (0, 2)
        assert read_params(params)[1]["start"] == "0.2,0.3,0.5"

    def test_threads_do_not_change_output(self, tmp_path):
        panel = tmp_path / "big.csv"
        run("simulate", "--m", 20000, "--seed", 1, "-o", panel)
        params = tmp_path / "p.txt"
        params.write_text(SEPARATED)
        run("score", panel, "--params", params, "-o", tmp_path / "a.csv")
        run("score", panel, "--params", params, "--threads", 4, "-o", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_invalid_panel(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("gene_id,mean_log_ratio,variance\na,1,-1\n")
        assert run("score", bad, "--params", tmp_path / "missing.txt") == cli.EXIT_INVALID
        assert "line 2" in capsys.readouterr().err

    def test_fit_needs_three_rows(self, tmp_path):
        small = tmp_path / "s.csv"
        small.write_text("gene_id,mean_log_ratio,variance\na,1,1\nb,0,1\n")
        assert run("fit", small, "-o", tmp_path / "p.txt") == cli.EXIT_INVALID


class TestPValue:
    def test_output(self, tmp_path):
        panel = tmp_path / "p.csv"
        panel.write_text("gene_id,mean_log_ratio,variance\na,0.5,100\nb,0.5,0.09\n")
        out = tmp_path / "out.csv"
        assert run("pvalue", panel, "-o", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == cli.PVALUE_WARNING
        assert lines[1] == "gene_id,mean_log_ratio,se,p_value"
        assert abs(float(lines[2].split(",")[3]) - 0.03969) <= 5e-5
        assert abs(float(lines[3].split(",")[3]) - 0.04779) <= 5e-5


class TestVerify:
    def test_small_run(self, tmp_path, capsys):
        code = run("verify", "--outdir", tmp_path, "--n-lemma", 30, "--n-theorem", 4, "--panel-size", 500)
        assert code == 0
        assert json.loads((tmp_path / "verdicts.json").read_text())["all_passed"]
        assert "FAIL" not in capsys.readouterr().out


class TestEntryPoint:
    def test_module_help(self):
        res = subprocess.run([sys.executable, "-m", "eqpost.cli", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "simulate" in res.stdout

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit):
            run()
