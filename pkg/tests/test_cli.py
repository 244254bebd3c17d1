"""Command-line surface: subcommand artifacts, exit codes, config echo,
and byte-identical reruns.

Everything runs in-process through main(argv) with the working directory
pinned to a temp dir, so default output paths cannot leak into the repo.
"""

import os

import numpy as np
import pytest

from ove.cli import main
from ove.fields import Grid2D, IndexVolume
from ove.io import export_volume, import_field, import_volume, read_pgm
from testutil import haar_bank_oracle

TINY_DESIGN = "\n".join([
    "grid.nx = 32",
    "grid.ny = 32",
    "volume.nz = 4",
    "task.kind = custom",
    "task.num_pairs = 2",
    "task.spot_ring_um = 3.0",
    "task.spot_radius_um = 1.5",
    "optimizer.max_iters = 3",
    "optimizer.step_size = 0.002",
]) + "\n"


def read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def read_csv_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


class TestScaling:
    def test_reference_rows(self, tmp_path):
        assert main(["scaling", "--n", "1,15,225", "--pitch", "20",
                     "--out", "s"]) == 0
        lines = read_csv_lines(tmp_path / "s" / "scaling.csv")
        assert lines[0].startswith("n_neurons,elements_2d,planes_3d")
        got = [tuple(int(x) for x in ln.split(",")[:3]) for ln in lines[1:]]
        assert got == [(1, 1, 1), (15, 225, 15), (225, 50625, 225)]

    def test_footprints_at_printed_pitch(self, tmp_path):
        main(["scaling", "--n", "225", "--pitch", "20", "--out", "s"])
        row = read_csv_lines(tmp_path / "s" / "scaling.csv")[1].split(",")
        assert float(row[5]) == 50625 * 400.0
        assert float(row[6]) == 300.0 * 300.0

    def test_rerun_byte_identical(self, tmp_path):
        main(["scaling", "--n", "1,2,3", "--pitch", "5", "--out", "a"])
        main(["scaling", "--n", "1,2,3", "--pitch", "5", "--out", "b"])
        assert read_bytes(tmp_path / "a" / "scaling.csv") == \
            read_bytes(tmp_path / "b" / "scaling.csv")

    def test_bad_count_list(self, tmp_path, capsys):
        assert main(["scaling", "--n", "1,x", "--out", "s"]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert err.count("\n") == 1


class TestHolography:
    def test_single_m_superposed(self, tmp_path):
        assert main(["holography", "--m", "1", "--scheme", "superposed",
                     "--out", "h"]) == 0
        lines = read_csv_lines(tmp_path / "h" / "efficiency.csv")
        assert lines[0] == "m,eta_per_output"
        assert len(lines) == 2
        m, eta = lines[1].split(",")
        assert m == "1"
        assert 0.0 < float(eta) < 1.0
        metrics = dict(ln.split(",") for ln in
                       read_csv_lines(tmp_path / "h" / "metrics.csv")[1:])
        assert metrics["scheme"] == "superposed"
        assert metrics["fitted_log_slope"] == "nan"

    def test_single_m_optimized(self, tmp_path):
        assert main(["holography", "--m", "1", "--scheme", "optimized",
                     "--budget", "0.05", "--out", "h"]) == 0
        lines = read_csv_lines(tmp_path / "h" / "efficiency.csv")
        assert len(lines) == 2
        assert lines[1].startswith("1,")
        assert 0.0 < float(lines[1].split(",")[1]) <= 1.0

    def test_superposed_rerun_byte_identical(self, tmp_path):
        main(["holography", "--m", "1,2", "--out", "a"])
        main(["holography", "--m", "1,2", "--out", "b"])
        for name in ("efficiency.csv", "metrics.csv", "resolved.cfg"):
            assert read_bytes(tmp_path / "a" / name) == \
                read_bytes(tmp_path / "b" / name)


class TestDesign:
    def write_config(self, tmp_path, text=TINY_DESIGN) -> str:
        path = tmp_path / "run.cfg"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_artifacts_and_config_echo(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        assert main(["design", cfg, "--out", "d"]) == 0
        out = capsys.readouterr().out
        assert "grid.nx = 32" in out
        assert "task.kind = custom" in out

        outdir = tmp_path / "d"
        for name in ("resolved.cfg", "design.ivol", "design.ivol.meta",
                     "loss.csv", "coupling.csv", "metrics.csv"):
            assert (outdir / name).exists(), name
        for k in range(2):
            for stem in ("input", "target", "output"):
                assert (outdir / f"{stem}_{k:02d}.pgm").exists()
        assert read_bytes(outdir / "resolved.cfg").decode() == out

    def test_loss_and_coupling_tables(self, tmp_path):
        cfg = self.write_config(tmp_path)
        main(["design", cfg, "--out", "d"])
        loss_lines = read_csv_lines(tmp_path / "d" / "loss.csv")
        assert loss_lines[0] == "iteration,loss"
        assert len(loss_lines) == 2 + 3  # header + initial + three iterations
        losses = [float(ln.split(",")[1]) for ln in loss_lines[1:]]
        assert losses == sorted(losses, reverse=True) or losses[-1] <= losses[0]

        coupling_lines = read_csv_lines(tmp_path / "d" / "coupling.csv")
        assert coupling_lines[0] == "target,input,before,after"
        assert len(coupling_lines) == 1 + 4  # 2x2 task

    def test_written_volume_reimports(self, tmp_path):
        cfg = self.write_config(tmp_path)
        main(["design", cfg, "--out", "d"])
        vol = import_volume(str(tmp_path / "d" / "design.ivol"))
        assert vol.grid.nx == 32 and vol.nz == 4
        assert vol.dn.min() >= vol.dn_min and vol.dn.max() <= vol.dn_max

    def test_rerun_byte_identical(self, tmp_path):
        cfg = self.write_config(tmp_path)
        main(["design", cfg, "--out", "a"])
        main(["design", cfg, "--out", "b"])
        for name in ("design.ivol", "loss.csv", "coupling.csv", "metrics.csv",
                     "resolved.cfg", "output_00.pgm", "output_01.pgm"):
            assert read_bytes(tmp_path / "a" / name) == \
                read_bytes(tmp_path / "b" / name), name

    def test_bad_config_exits_one_with_diagnostic(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("grid.nz = 8\n", encoding="utf-8")  # unknown key
        assert main(["design", str(path), "--out", "d"]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "unknown key" in err
        assert err.count("\n") == 1

    def test_outputs_confined_to_out_dir(self, tmp_path):
        cfg = self.write_config(tmp_path)
        before = set(os.listdir(tmp_path))
        main(["design", cfg, "--out", str(tmp_path / "only_here")])
        after = set(os.listdir(tmp_path))
        assert after - before == {"only_here"}


class TestLanternAndHaarSubcommands:
    def test_lantern_smoke(self, tmp_path):
        path = tmp_path / "l.cfg"
        path.write_text("\n".join([
            "grid.nx = 32", "grid.ny = 32", "volume.nz = 4",
            "optimizer.max_iters = 2", "optimizer.step_size = 0.002",
        ]) + "\n", encoding="utf-8")
        assert main(["lantern", str(path), "--out", "l"]) == 0
        metrics = dict(ln.split(",") for ln in
                       read_csv_lines(tmp_path / "l" / "metrics.csv")[1:])
        assert float(metrics["final_loss"]) <= float(metrics["initial_loss"])

    def test_haar_grin_smoke(self, tmp_path):
        path = tmp_path / "h.cfg"
        path.write_text("\n".join([
            "task.kind = haar-grin", "volume.nz = 2",
            "optimizer.max_iters = 1", "optimizer.step_size = 0.006",
        ]) + "\n", encoding="utf-8")
        assert main(["haar-grin", str(path), "--out", "h"]) == 0
        # Seven lobes: 3 signed kinds x 2 lobes + uniform's single lobe.
        coupling_lines = read_csv_lines(tmp_path / "h" / "coupling.csv")
        assert len(coupling_lines) == 1 + 49


class TestPropagate:
    def setup_volume(self, tmp_path) -> str:
        grid = Grid2D(32, 32, 0.5, 0.5)
        vol = IndexVolume(grid=grid, nz=4, dz=1.0, n0=1.5,
                          dn=np.zeros((32, 32, 4)))
        path = str(tmp_path / "v.ivol")
        export_volume(vol, path)
        return path

    def test_forward_pass_artifacts(self, tmp_path):
        vol = self.setup_volume(tmp_path)
        assert main(["propagate", "--volume", vol, "--source", "gaussian",
                     "--waist-um", "3.0", "--out", "p"]) == 0
        field = import_field(str(tmp_path / "p" / "output.cfield"))
        assert field.grid.nx == 32
        img = read_pgm(str(tmp_path / "p" / "output.pgm"))
        assert img.max() == 255

    def test_rerun_byte_identical(self, tmp_path):
        vol = self.setup_volume(tmp_path)
        args = ["propagate", "--volume", vol, "--source", "plane",
                "--theta-x-deg", "2.0"]
        main(args + ["--out", "a"])
        main(args + ["--out", "b"])
        assert read_bytes(tmp_path / "a" / "output.cfield") == \
            read_bytes(tmp_path / "b" / "output.cfield")

    def test_missing_volume_exits_one(self, tmp_path, capsys):
        assert main(["propagate", "--volume", "nope.ivol", "--out", "p"]) == 1
        assert capsys.readouterr().err.startswith("error:")


class TestHaarBank:
    def write_edge_image(self, tmp_path) -> str:
        img = np.zeros((21, 21), dtype=np.uint8)
        img[:10, :] = 255
        path = str(tmp_path / "edge.pgm")
        header = b"P5\n21 21\n255\n"
        with open(path, "wb") as fh:
            fh.write(header + img.ravel(order="F").tobytes())
        return path

    def test_all_kinds_match_oracle(self, tmp_path):
        image_path = self.write_edge_image(tmp_path)
        assert main(["haar-bank", "--image", image_path, "--out", "hb"]) == 0
        lines = read_csv_lines(tmp_path / "hb" / "haar_bank.csv")
        assert lines[0] == "kind,patch_x,patch_y,s_plus,s_minus,response"
        assert len(lines) == 1 + 4 * 49

        img = np.zeros((21, 21), dtype=np.int64)
        img[:10, :] = 255
        for kind in ("vertical", "horizontal", "diagonal", "uniform"):
            _, _, want = haar_bank_oracle(img, kind)
            rows = [ln.split(",") for ln in lines[1:] if ln.startswith(kind + ",")]
            got = np.zeros((7, 7))
            for _, i, j, _, _, resp in rows:
                got[int(i), int(j)] = float(resp)
            np.testing.assert_array_equal(got, want)

    def test_single_kind(self, tmp_path):
        image_path = self.write_edge_image(tmp_path)
        assert main(["haar-bank", "--image", image_path, "--kind", "vertical",
                     "--out", "hb"]) == 0
        lines = read_csv_lines(tmp_path / "hb" / "haar_bank.csv")
        assert len(lines) == 1 + 49

    def test_wrong_size_image_exits_one(self, tmp_path, capsys):
        path = str(tmp_path / "small.pgm")
        with open(path, "wb") as fh:
            fh.write(b"P5\n2 2\n255\n\x00\x01\x02\x03")
        assert main(["haar-bank", "--image", path, "--out", "hb"]) == 1
        assert "21x21" in capsys.readouterr().err


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        assert main(["polish"]) == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag(self, capsys):
        assert main(["scaling", "--pitchfork", "3"]) == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_arguments(self, capsys):
        assert main([]) == 2
