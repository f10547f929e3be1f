"""CLI subcommand tests: run main() in-process, check files and exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from steadydepth import formats
from steadydepth.cli import main
from steadydepth.pairing import sample_pairs
from steadydepth.synth import scene_static_plane, scene_to_dict


@pytest.fixture(scope="module")
def plane_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("plane_ds")
    assert main(["synth", "--preset", "plane", "--out", str(out),
                 "--tracks", "40", "--perturb-sigma", "0.2"]) == 0
    return out


class TestPairsCommand:
    def test_five_frames_prints_eight_pairs(self, capsys):
        assert main(["pairs", "--frames", "5"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 8
        got = [tuple(int(v) for v in line.split()) for line in lines]
        assert got == list(sample_pairs(5))

    def test_too_few_frames_is_validation_error(self, capsys):
        assert main(["pairs", "--frames", "1"]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "validation"


class TestSynthCommand:
    def test_dataset_layout(self, plane_dataset):
        out = plane_dataset
        cams = formats.read_cameras(out / "cameras.json")
        n = len(cams)
        assert n == 8
        pairs = sample_pairs(n)
        for f in range(n):
            assert (out / "rgb" / f"frame_{f:04d}.ppm").is_file()
            assert (out / "depth" / f"depth_{f:04d}.pfm").is_file()
            assert (out / "init" / f"depth_{f:04d}.pfm").is_file()
            assert (out / "stereo" / f"right_{f:04d}.ppm").is_file()
        for (i, j) in pairs:
            assert (out / "flows" / f"flow_{i:04d}_{j:04d}.flo").is_file()
            assert (out / "flows" / f"flow_{j:04d}_{i:04d}.flo").is_file()
            assert (out / "masks" / f"mask_{i:04d}_{j:04d}.pgm").is_file()
        assert (out / "tracks.txt").is_file()
        assert (out / "config.json").is_file()
        assert (out / "scene.json").is_file()

    def test_spec_file_round_trip(self, tmp_path, capsys):
        spec_path = tmp_path / "scene.json"
        spec_path.write_text(json.dumps(scene_to_dict(scene_static_plane(n_frames=3))))
        assert main(["synth", "--spec", str(spec_path), "--out",
                     str(tmp_path / "ds"), "--tracks", "5"]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["frames"] == 3

    def test_requires_exactly_one_source(self, tmp_path, capsys):
        assert main(["synth", "--out", str(tmp_path / "x")]) == 1
        assert main(["synth", "--preset", "plane", "--spec", "a.json",
                     "--out", str(tmp_path / "y")]) == 1

    def test_unknown_preset(self, tmp_path, capsys):
        assert main(["synth", "--preset", "nope", "--out", str(tmp_path / "z")]) == 1
        err = json.loads(capsys.readouterr().err)
        assert "nope" in err["message"]


class TestCheckFlowCommand:
    def test_masks_and_acceptance(self, plane_dataset, tmp_path, capsys):
        out = tmp_path / "cf"
        assert main(["check-flow", "--frames", "8",
                     "--flows", str(plane_dataset / "flows"),
                     "--out", str(out)]) == 0
        table = capsys.readouterr().out.strip().splitlines()
        assert table[0] == "i,j,valid_ratio,accepted"
        rows = [line.split(",") for line in table[1:]]
        assert len(rows) == len(sample_pairs(8))
        # the plane scene's true flows are self-consistent: everything accepted
        assert all(r[3] == "1" for r in rows)
        for (i, j) in sample_pairs(8):
            assert (out / "masks" / f"mask_{i:04d}_{j:04d}.pgm").is_file()

    def test_missing_flows_rejected(self, tmp_path, capsys):
        (tmp_path / "empty").mkdir()
        assert main(["check-flow", "--frames", "4",
                     "--flows", str(tmp_path / "empty"),
                     "--out", str(tmp_path / "cfo")]) == 1


class TestCalibrateCommand:
    def test_recovers_known_scale(self, plane_dataset, tmp_path, capsys):
        # reconstruction depth at half scale: per-frame ratio 2, translations x2
        mvs = tmp_path / "mvs"
        mvs.mkdir()
        for f in range(8):
            d = formats.read_pfm(plane_dataset / "depth" / f"depth_{f:04d}.pfm")
            formats.write_pfm(mvs / f"depth_{f:04d}.pfm", d / 2.0)
        out = tmp_path / "cal"
        assert main(["calibrate", "--cameras", str(plane_dataset / "cameras.json"),
                     "--depth-ref", str(plane_dataset / "depth"),
                     "--depth-mvs", str(mvs), "--out", str(out)]) == 0
        report = json.loads((out / "scale_report.json").read_text())
        assert report["global_scale"] == pytest.approx(2.0)
        assert report["frames_skipped"] == []
        cams_in = formats.read_cameras(plane_dataset / "cameras.json")
        cams_out = formats.read_cameras(out / "cameras_calibrated.json")
        for a, b in zip(cams_out, cams_in):
            np.testing.assert_allclose(a.pose.t, 2.0 * b.pose.t)


class TestFinetuneCommand:
    def test_small_run_outputs(self, plane_dataset, tmp_path, capsys):
        out = tmp_path / "ft"
        assert main(["finetune", "--cameras", str(plane_dataset / "cameras.json"),
                     "--depth-init", str(plane_dataset / "init"),
                     "--flows", str(plane_dataset / "flows"),
                     "--masks", str(plane_dataset / "masks"),
                     "--out", str(out), "--epochs", "2", "--seed", "7"]) == 0
        info = json.loads(capsys.readouterr().out)
        assert np.isfinite(info["final_mean_total"])
        history = (out / "history.csv").read_text().strip().splitlines()
        assert history[0] == "epoch,mean_total,mean_spatial,mean_disparity,n_pairs"
        assert len(history) == 1 + 1 + 2  # header + baseline + 2 epochs
        for f in range(8):
            assert (out / "depth" / f"depth_{f:04d}.pfm").is_file()
        assert (out / "pair_log.csv").is_file()
        assert (out / "config.json").is_file()

    def test_rerun_from_written_config(self, plane_dataset, tmp_path):
        first = tmp_path / "first"
        assert main(["finetune", "--cameras", str(plane_dataset / "cameras.json"),
                     "--depth-init", str(plane_dataset / "init"),
                     "--flows", str(plane_dataset / "flows"),
                     "--masks", str(plane_dataset / "masks"),
                     "--out", str(first), "--epochs", "2", "--seed", "9"]) == 0
        second = tmp_path / "second"
        assert main(["finetune", "--config", str(first / "config.json"),
                     "--out", str(second)]) == 0
        assert (first / "history.csv").read_bytes() == \
            (second / "history.csv").read_bytes()
        for f in range(8):
            name = f"depth_{f:04d}.pfm"
            assert (first / "depth" / name).read_bytes() == \
                (second / "depth" / name).read_bytes()

    def test_config_rejects_unknown_keys(self, plane_dataset, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"epoches": 3}))
        assert main(["finetune", "--config", str(cfg),
                     "--out", str(tmp_path / "x")]) == 1

    def test_identical_seeds_identical_bytes(self, plane_dataset, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["finetune", "--cameras",
                         str(plane_dataset / "cameras.json"),
                         "--depth-init", str(plane_dataset / "init"),
                         "--flows", str(plane_dataset / "flows"),
                         "--masks", str(plane_dataset / "masks"),
                         "--out", str(out), "--epochs", "3", "--seed", "5"]) == 0
            outs.append(out)
        a, b = outs
        assert (a / "history.csv").read_bytes() == (b / "history.csv").read_bytes()
        assert (a / "pair_log.csv").read_bytes() == (b / "pair_log.csv").read_bytes()
        for f in range(8):
            name = f"depth_{f:04d}.pfm"
            assert (a / "depth" / name).read_bytes() == (b / "depth" / name).read_bytes()

    def test_all_rejected_masks_is_runtime_error(self, plane_dataset, tmp_path,
                                                 capsys):
        dead = tmp_path / "dead_masks"
        dead.mkdir()
        h, w = formats.read_pfm(plane_dataset / "depth" / "depth_0000.pfm").shape
        for (i, j) in sample_pairs(8):
            formats.write_pgm(dead / f"mask_{i:04d}_{j:04d}.pgm",
                              np.zeros((h, w), dtype=bool))
        code = main(["finetune", "--cameras", str(plane_dataset / "cameras.json"),
                     "--depth-init", str(plane_dataset / "init"),
                     "--flows", str(plane_dataset / "flows"),
                     "--masks", str(dead), "--out", str(tmp_path / "ftx"),
                     "--epochs", "1"])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "NoAcceptedPairs"

    def test_missing_inputs_are_validation_errors(self, plane_dataset, tmp_path,
                                                  capsys):
        assert main(["finetune", "--cameras", str(plane_dataset / "cameras.json"),
                     "--depth-init", str(tmp_path / "nope"),
                     "--flows", str(plane_dataset / "flows"),
                     "--masks", str(plane_dataset / "masks"),
                     "--out", str(tmp_path / "fty")]) == 1


class TestEvaluateCommand:
    def test_tracks_and_depth_metrics(self, plane_dataset, tmp_path, capsys):
        out = tmp_path / "ev"
        assert main(["evaluate", "--cameras", str(plane_dataset / "cameras.json"),
                     "--depths", str(plane_dataset / "depth"),
                     "--tracks", str(plane_dataset / "tracks.txt"),
                     "--gt-depths", str(plane_dataset / "depth"),
                     "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["instability_raw"] < 1e-5
        assert metrics["drift_raw"] < 1e-9
        assert metrics["depth"]["abs_rel"] == 0.0
        assert metrics["depth"]["delta1"] == 1.0
        assert (out / "per_track.csv").is_file()
        assert (out / "curves.csv").is_file()

    def test_perturbed_depth_scores_worse(self, plane_dataset, tmp_path, capsys):
        out_true = tmp_path / "ev_true"
        out_noisy = tmp_path / "ev_noisy"
        main(["evaluate", "--cameras", str(plane_dataset / "cameras.json"),
              "--depths", str(plane_dataset / "depth"),
              "--tracks", str(plane_dataset / "tracks.txt"),
              "--out", str(out_true)])
        main(["evaluate", "--cameras", str(plane_dataset / "cameras.json"),
              "--depths", str(plane_dataset / "init"),
              "--tracks", str(plane_dataset / "tracks.txt"),
              "--out", str(out_noisy)])
        true_m = json.loads((out_true / "metrics.json").read_text())
        noisy_m = json.loads((out_noisy / "metrics.json").read_text())
        assert noisy_m["instability_raw"] > 100 * true_m["instability_raw"]


class TestStereoEvaluate:
    def test_photometric_metric_from_files(self, tmp_path, capsys):
        ds = tmp_path / "ds"
        assert main(["synth", "--preset", "plane_sphere", "--out", str(ds),
                     "--tracks", "10"]) == 0
        out = tmp_path / "ev"
        assert main(["evaluate", "--cameras", str(ds / "cameras.json"),
                     "--depths", str(ds / "depth"),
                     "--left-rgb", str(ds / "rgb"),
                     "--stereo-right", str(ds / "stereo"),
                     "--stereo-disp", str(ds / "stereo"),
                     "--stereo-baseline", "60.0",
                     "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        # true depth, true disparity: only 8-bit color quantization and
        # interpolation remain
        assert metrics["photometric_mse"] < 1e-3

    def test_incomplete_stereo_flags_rejected(self, plane_dataset, tmp_path,
                                              capsys):
        assert main(["evaluate", "--cameras", str(plane_dataset / "cameras.json"),
                     "--depths", str(plane_dataset / "depth"),
                     "--stereo-right", str(plane_dataset / "stereo"),
                     "--out", str(tmp_path / "ev2")]) == 1


class TestDynamicMasks:
    def test_check_flow_intersects_dynamic(self, tmp_path, capsys):
        ds = tmp_path / "mds"
        assert main(["synth", "--preset", "moving", "--out", str(ds),
                     "--tracks", "10"]) == 0
        assert (ds / "dynamic" / "dynamic_0000.pgm").is_file()
        out = tmp_path / "cf"
        assert main(["check-flow", "--frames", "10",
                     "--flows", str(ds / "flows"),
                     "--dynamic-masks", str(ds / "dynamic"),
                     "--out", str(out)]) == 0
        # dynamic pixels must be cleared from the masks
        mask = formats.read_pgm(out / "masks" / "mask_0000_0001.pgm")
        dyn = formats.read_pgm(ds / "dynamic" / "dynamic_0000.pgm")
        assert dyn.any()
        assert not (mask & dyn).any()


class TestFullPipeline:
    def test_synth_finetune_evaluate_improves_stability(self, tmp_path, capsys):
        """End-to-end through the file formats: noisy depth in, stable out."""
        from steadydepth.synth import scene_convergence

        spec_path = tmp_path / "scene.json"
        spec_path.write_text(
            json.dumps(scene_to_dict(scene_convergence(n_frames=384))))
        ds = tmp_path / "ds"
        assert main(["synth", "--spec", str(spec_path), "--out", str(ds),
                     "--tracks", "60", "--perturb-sigma", "0.2"]) == 0
        ft = tmp_path / "ft"
        assert main(["finetune", "--cameras", str(ds / "cameras.json"),
                     "--depth-init", str(ds / "init"),
                     "--flows", str(ds / "flows"),
                     "--masks", str(ds / "masks"),
                     "--out", str(ft), "--grid-long-side", "24",
                     "--stride", "2", "--seed", "0"]) == 0
        results = {}
        for name, depths in (("pre", ds / "init"), ("post", ft / "depth")):
            out = tmp_path / f"ev_{name}"
            assert main(["evaluate", "--cameras", str(ds / "cameras.json"),
                         "--depths", str(depths),
                         "--tracks", str(ds / "tracks.txt"),
                         "--out", str(out)]) == 0
            results[name] = json.loads((out / "metrics.json").read_text())
        ratio = (results["pre"]["instability_raw"]
                 / results["post"]["instability_raw"])
        assert ratio >= 10.0
        hist = (ft / "history.csv").read_text().strip().splitlines()
        final_spatial = float(hist[-1].split(",")[2])
        assert final_spatial < 0.5


class TestGlobalFlags:
    def test_threads_validation(self, capsys):
        assert main(["--threads", "0", "pairs", "--frames", "4"]) == 1

    def test_module_entrypoint(self):
        proc = subprocess.run(
            [sys.executable, "-m", "steadydepth.cli", "pairs", "--frames", "5"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert len(proc.stdout.strip().splitlines()) == 8
