import numpy as np
import pytest

from eqpost.panel import Panel, PanelFormatError, read_panel_csv, read_params, write_panel_csv, write_params
from eqpost.posterior import TABLE3_PRIOR, GeneObservation


def write(tmp_path, text, name="p.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestPanelCsv:
    def test_round_trip_is_exact(self, tmp_path, rng):
        panel = Panel.from_arrays(rng.normal(size=50), rng.uniform(1e-6, 1, 50))
        write_panel_csv(panel, tmp_path / "a.csv")
        back = read_panel_csv(tmp_path / "a.csv")
        np.testing.assert_array_equal(back.y, panel.y)
        np.testing.assert_array_equal(back.sigma2, panel.sigma2)
        assert back.ids == panel.ids
        write_panel_csv(back, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_spot_type_column(self, tmp_path):
        p = read_panel_csv(write(tmp_path, "gene_id,mean_log_ratio,variance,spot_type\na,0.1,0.2,gene\nb,0,1,\n"))
        assert p.spot_type == ("gene", None)
        assert p.observations()[0] == GeneObservation("a", 0.1, 0.2, "gene")

    def test_blank_lines_skipped(self, tmp_path):
        p = read_panel_csv(write(tmp_path, "gene_id,mean_log_ratio,variance\n\na,1,1\n\n"))
        assert len(p) == 1

    @pytest.mark.parametrize(
        "text, fragment",
        [
            ("", "empty"),
            ("id,y,v\na,1,1\n", "line 1"),
            ("gene_id,mean_log_ratio,variance\na,1,0\n", "line 2"),
            ("gene_id,mean_log_ratio,variance\na,1,1\nb,x,1\n", "line 3"),
            ("gene_id,mean_log_ratio,variance\na,1,1\na,2,1\n", "duplicate"),
            ("gene_id,mean_log_ratio,variance\na,1\n", "fields"),
            ("gene_id,mean_log_ratio,variance\na,inf,1\n", "finite"),
            ("gene_id,mean_log_ratio,variance\n", "at least 1"),
        ],
    )
    def test_errors_carry_location(self, tmp_path, text, fragment):
        with pytest.raises(PanelFormatError, match=fragment):
            read_panel_csv(write(tmp_path, text))

    def test_min_rows(self, tmp_path):
        with pytest.raises(PanelFormatError, match="at least 3"):
            read_panel_csv(write(tmp_path, "gene_id,mean_log_ratio,variance\na,1,1\n"), min_rows=3)


class TestParams:
    def test_round_trip(self, tmp_path):
        write_params(tmp_path / "p.txt", TABLE3_PRIOR, {"loglik": -1.5, "converged": True, "n": 4})
        prior, meta = read_params(tmp_path / "p.txt")
        assert prior == TABLE3_PRIOR
        assert meta == {"loglik": "-1.5", "converged": "true", "n": "4"}

    def test_missing_key(self, tmp_path):
        with pytest.raises(PanelFormatError, match="missing"):
            read_params(write(tmp_path, "pi1=1\n", "p.txt"))

    def test_invalid_prior(self, tmp_path):
        text = "pi1=0.5\npi2=0.5\npi3=0.5\nmu1=0\nmu2=0\nmu3=0\ntau2_1=1\ntau2_2=1\ntau2_3=1\n"
        with pytest.raises(PanelFormatError):
            read_params(write(tmp_path, text, "p.txt"))


class TestPanel:
    def test_validation(self):
        with pytest.raises(PanelFormatError):
            Panel.from_arrays([0.0, 1.0], [0.1])
        with pytest.raises(PanelFormatError):
            Panel.from_arrays([0.0], [-0.1])
