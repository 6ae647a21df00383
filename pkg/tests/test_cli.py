import json

import numpy as np
import pytest

from choreo.cli import main
from choreo.model import load_trajectory


@pytest.fixture(scope="module")
def solved_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run.traj"
    code = main(["solve", "--n", "2", "--omega", "+,-", "--nodes", "32",
                 "--out", str(out)])
    assert code == 0
    return out


class TestSolve:
    def test_writes_trajectory_with_certificate(self, solved_file):
        loop, doc = load_trajectory(solved_file)
        assert doc["n"] == 2
        assert doc["omega"] == [1, -1]
        assert doc["certificate"]["passed"] is True
        assert doc["provenance"]["status"] == "converged"

    def test_infeasible_exit_code(self, capsys):
        code = main(["solve", "--n", "3", "--omega", "+,-"])
        assert code == 3
        err = capsys.readouterr().err
        assert "odd n needs two differing signs" in err

    def test_bad_flags_exit_code(self):
        assert main(["solve", "--n", "2", "--omega", "+,?"]) == 2
        assert main(["solve", "--n", "2"]) == 2  # missing --omega


class TestVerify:
    def test_untampered_passes(self, solved_file, capsys):
        assert main(["verify", str(solved_file)]) == 0
        out = capsys.readouterr().out
        assert "overall: PASS" in out
        assert "agreement: yes" in out

    def test_tampered_fails(self, solved_file, tmp_path, capsys):
        doc = json.loads(solved_file.read_text())
        pos = np.array(doc["positions"])
        pos[7] = pos[7] + 0.4  # break equivariance at one sample
        doc["positions"] = pos.tolist()
        bad = tmp_path / "bad.traj"
        bad.write_text(json.dumps(doc))
        assert main(["verify", str(bad)]) == 4

    def test_missing_file(self):
        assert main(["verify", "/nonexistent/file.traj"]) == 2


class TestPlot:
    @pytest.mark.parametrize("proj", ["xy", "xz", "yz", "3d-oblique"])
    def test_writes_vector_image_and_csv(self, solved_file, tmp_path, proj):
        out = tmp_path / f"orbit_{proj}.svg"
        assert main(["plot", str(solved_file), "--proj", proj,
                     "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 0
        assert b"<svg" in out.read_bytes()[:500]
        assert out.with_suffix(".csv").exists()


class TestSweep:
    def test_n2_sweep_outputs(self, tmp_path, capsys):
        outdir = tmp_path / "sweep"
        code = main(["sweep", "--n", "2", "--nodes", "32",
                     "--out", str(outdir)])
        assert code == 0
        summary = (outdir / "n2_summary.csv").read_text().strip().splitlines()
        assert summary[0] == "omega,action,min_distance,status"
        words = [line.split(",")[0] + "," + line.split(",")[1] for line in summary[1:]]
        assert len(summary) == 3  # header + two admissible words
        assert sorted(words) == words
        assert (outdir / "n2_pm.traj").exists()
        assert (outdir / "n2_mp.traj").exists()

    def test_n3_sweep_infeasible(self):
        assert main(["sweep", "--n", "3"]) == 3
