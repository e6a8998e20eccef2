"""Command-line contract: exit codes, artifacts on disk, determinism."""

import filecmp
import os

import numpy as np
import pytest

from magniflow.cli import main
from magniflow.datagen import SceneConfig, render_synthetic_video
from magniflow.flowcore import (
    FlowField,
    flow_metrics,
    image_metrics,
    list_flo,
    read_flo,
    read_video,
    write_flo,
    write_ppm,
)

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")

TINY_DMM = ["--dmm_widths", "4,4,8", "--t_count", "50"]


def run(*argv):
    return main([str(a) for a in argv])


def same_tree(a, b):
    names = sorted(os.listdir(a))
    if names != sorted(os.listdir(b)):
        return False
    return all(filecmp.cmp(os.path.join(a, n), os.path.join(b, n), shallow=False) for n in names)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Shared tiny artifacts: dataset, scene, trained checkpoints."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert (
        run("gen-data", "--out", data, "--count", 6, "--width", 16, "--height", 16, "--seed", 3)
        == 0
    )
    scene = root / "scene"
    render_synthetic_video(SceneConfig(width=48, height=48, frames=4, amplitude=0.5), 11, scene)
    dmm_run = root / "dmm_run"
    assert (
        run(
            "train", "dmm", "--data", data, "--out", dmm_run, *TINY_DMM,
            "--steps", 4, "--batch_size", 2, "--log_every", 2, "--seed", 1,
        )
        == 0
    )
    fvs_run = root / "fvs_run"
    assert (
        run(
            "train", "fvs", "--data", scene, "--out", fvs_run, "--fvs_widths", "4,8,8",
            "--steps", 3, "--batch_size", 2, "--log_every", 1, "--seed", 1,
        )
        == 0
    )
    return {
        "root": root,
        "data": data,
        "scene": scene,
        "dmm": dmm_run / "dmm.ckpt",
        "fvs": fvs_run / "fvs.ckpt",
    }


class TestGenData:
    def test_writes_pairs_and_manifest(self, workspace):
        names = sorted(os.listdir(workspace["data"]))
        assert "manifest.json" in names
        assert sum(n.endswith("_cond.flo") for n in names) == 6
        assert sum(n.endswith("_targ.flo") for n in names) == 6

    def test_rerun_bit_identical(self, workspace, tmp_path):
        out = tmp_path / "again"
        assert (
            run(
                "gen-data", "--out", out, "--count", 6,
                "--width", 16, "--height", 16, "--seed", 3,
            )
            == 0
        )
        assert same_tree(workspace["data"], out)

    def test_env_seed_overrides_flag(self, tmp_path, monkeypatch, workspace):
        monkeypatch.setenv("MAGNIFLOW_SEED", "3")
        out = tmp_path / "env_seeded"
        assert (
            run(
                "gen-data", "--out", out, "--count", 6,
                "--width", 16, "--height", 16, "--seed", 999,
            )
            == 0
        )
        assert same_tree(workspace["data"], out)

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("made_up_key = 1\n")
        assert run("gen-data", "--out", tmp_path / "x", "--count", 2, "--config", cfg) == 2
        assert "made_up_key" in capsys.readouterr().err

    def test_summary_statistics_printed(self, tmp_path, capsys):
        assert (
            run("gen-data", "--out", tmp_path / "d", "--count", 4, "--width", 16, "--height", 16)
            == 0
        )
        out = capsys.readouterr().out
        assert "alpha histogram" in out
        assert "mask coverage" in out


class TestFitNoise:
    def test_prints_mu_sigma(self, workspace, capsys):
        assert run("fit-noise", "--frames", workspace["scene"] / "frames", "--strength", 0.02) == 0
        out = capsys.readouterr().out
        assert "mu = " in out and "sigma = " in out

    def test_zero_strength_degenerate_exit_2(self, workspace, capsys):
        assert run("fit-noise", "--frames", workspace["scene"] / "frames", "--strength", 0) == 2
        assert "strength 0" in capsys.readouterr().err

    def test_deterministic_for_fixed_seed(self, workspace, capsys):
        frames = workspace["scene"] / "frames"
        run("fit-noise", "--frames", frames, "--strength", 0.02, "--seed", 5)
        first = capsys.readouterr().out
        run("fit-noise", "--frames", frames, "--strength", 0.02, "--seed", 5)
        assert capsys.readouterr().out == first


class TestTrain:
    def test_resume_continues(self, workspace, tmp_path):
        out = tmp_path / "short"
        assert (
            run(
                "train", "dmm", "--data", workspace["data"], "--out", out, *TINY_DMM,
                "--steps", 2, "--batch_size", 2, "--log_every", 1, "--seed", 1,
            )
            == 0
        )
        assert (
            run(
                "train", "dmm", "--data", workspace["data"], "--out", out, *TINY_DMM,
                "--steps", 4, "--batch_size", 2, "--log_every", 1, "--seed", 1,
                "--resume", out / "dmm.ckpt",
            )
            == 0
        )
        with open(out / "dmm_loss.csv") as fh:
            steps = [line.split(",")[0] for line in fh.read().strip().splitlines()[1:]]
        assert steps == ["1", "2", "3", "4"]

    def test_missing_resume_checkpoint_exits_3(self, workspace, tmp_path):
        code = run(
            "train", "dmm", "--data", workspace["data"], "--out", tmp_path / "r", *TINY_DMM,
            "--steps", 1, "--resume", tmp_path / "ghost.ckpt",
        )
        assert code == 3

    def test_missing_dataset_exits_2(self, tmp_path):
        code = run(
            "train", "dmm", "--data", tmp_path / "no_data", "--out", tmp_path / "o",
            *TINY_DMM, "--steps", 1,
        )
        assert code == 2

    def test_scenes_flag_rejected_for_fvs(self, workspace, tmp_path):
        code = run(
            "train", "fvs", "--data", workspace["scene"], "--out", tmp_path / "o",
            "--scenes", workspace["scene"], "--steps", 1,
        )
        assert code == 2


class TestMagnify:
    def test_n_minus_one_outputs(self, workspace, tmp_path):
        out = tmp_path / "mag"
        code = run(
            "magnify", "--frames", workspace["scene"] / "frames", "--alpha", 4,
            "--dmm", workspace["dmm"], "--fvs", workspace["fvs"], "--out", out,
            "--sample_steps", 4, "--seed", 2,
        )
        assert code == 0
        names = sorted(os.listdir(out))
        assert sum(n.startswith("frame_") for n in names) == 3
        assert sum(n.startswith("cond_") and n.endswith(".ppm") for n in names) == 3
        assert sum(n.startswith("mag_") and n.endswith(".ppm") for n in names) == 3
        assert sum(n.endswith(".flo") for n in names) == 6
        assert names[-1] == "mag_000004.ppm"

    def test_refuses_nonempty_out_dir(self, workspace, tmp_path, capsys):
        out = tmp_path / "occupied"
        out.mkdir()
        (out / "keep.txt").write_text("precious")
        code = run(
            "magnify", "--frames", workspace["scene"] / "frames", "--alpha", 1,
            "--dmm", workspace["dmm"], "--fvs", workspace["fvs"], "--out", out,
        )
        assert code == 2
        assert "refusing" in capsys.readouterr().err
        assert (out / "keep.txt").read_text() == "precious"

    def test_never_modifies_inputs(self, workspace, tmp_path):
        frames_dir = workspace["scene"] / "frames"
        before = {n: os.path.getmtime(os.path.join(frames_dir, n)) for n in os.listdir(frames_dir)}
        contents = {n: open(os.path.join(frames_dir, n), "rb").read() for n in before}
        run(
            "magnify", "--frames", frames_dir, "--alpha", 2,
            "--dmm", workspace["dmm"], "--fvs", workspace["fvs"],
            "--out", tmp_path / "m", "--sample_steps", 3,
        )
        for n, data in contents.items():
            assert open(os.path.join(frames_dir, n), "rb").read() == data
        assert before == {
            n: os.path.getmtime(os.path.join(frames_dir, n)) for n in os.listdir(frames_dir)
        }

    def test_missing_checkpoint_exits_3(self, workspace, tmp_path):
        code = run(
            "magnify", "--frames", workspace["scene"] / "frames", "--alpha", 1,
            "--dmm", tmp_path / "none.ckpt", "--fvs", workspace["fvs"],
            "--out", tmp_path / "m",
        )
        assert code == 3

    def test_swapped_checkpoint_kind_exits_3(self, workspace, tmp_path):
        code = run(
            "magnify", "--frames", workspace["scene"] / "frames", "--alpha", 1,
            "--dmm", workspace["fvs"], "--fvs", workspace["fvs"], "--out", tmp_path / "m",
        )
        assert code == 3

    def test_flo_dir_flow_source(self, workspace, tmp_path):
        out = tmp_path / "mag_flo"
        code = run(
            "magnify", "--frames", workspace["scene"] / "frames", "--alpha", 2,
            "--dmm", workspace["dmm"], "--fvs", workspace["fvs"], "--out", out,
            "--flow-source", workspace["scene"] / "flows", "--sample_steps", 3,
        )
        assert code == 0
        # conditionals must be the provided files, not estimates
        given = read_flo(list_flo(workspace["scene"] / "flows")[0])
        used = read_flo(out / "cond_000002.flo")
        np.testing.assert_array_equal(given.u, used.u)

    def test_wrong_flo_count_exits_2(self, workspace, tmp_path):
        short = tmp_path / "short_flows"
        short.mkdir()
        paths = list_flo(workspace["scene"] / "flows")
        write_flo(short / "only_000002.flo", read_flo(paths[0]))
        code = run(
            "magnify", "--frames", workspace["scene"] / "frames", "--alpha", 1,
            "--dmm", workspace["dmm"], "--fvs", workspace["fvs"],
            "--out", tmp_path / "m", "--flow-source", short,
        )
        assert code == 2


class TestEvaluate:
    def test_pred_equals_ref(self, workspace, tmp_path, capsys):
        frames = workspace["scene"] / "frames"
        out = tmp_path / "rep"
        code = run(
            "evaluate", "--pred", frames, "--ref", frames,
            "--pred-flows", workspace["scene"] / "flows",
            "--gt-flows", workspace["scene"] / "flows", "--out", out,
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "EPE 0.0000 px" in text
        assert "PSNR 99.00 dB" in text
        assert "SSIM 1.0000" in text
        assert os.path.getsize(out / "metrics.csv") > 0
        assert os.path.getsize(out / "metrics.png") > 0

    def test_constant_offset_epe_exactly_one(self, workspace, tmp_path, capsys):
        gt_dir = workspace["scene"] / "flows"
        pred_dir = tmp_path / "shifted"
        pred_dir.mkdir()
        for p in list_flo(gt_dir):
            f = read_flo(p)
            write_flo(pred_dir / os.path.basename(p), FlowField(u=f.u + 1.0, v=f.v))
        code = run(
            "evaluate", "--pred-flows", pred_dir, "--gt-flows", gt_dir, "--out", tmp_path / "rep"
        )
        assert code == 0
        assert "EPE 1.0000 px" in capsys.readouterr().out

    def test_matches_direct_metric_calls(self, workspace, tmp_path, capsys):
        frames = workspace["scene"] / "frames"
        mag_out = tmp_path / "mag"
        run(
            "magnify", "--frames", frames, "--alpha", 3, "--dmm", workspace["dmm"],
            "--fvs", workspace["fvs"], "--out", mag_out, "--sample_steps", 3, "--seed", 4,
        )
        ref = tmp_path / "ref"
        ref.mkdir()
        pred_flows = tmp_path / "pred_flows"
        pred_flows.mkdir()
        for i, frame in enumerate(read_video(frames)[1:], start=2):
            write_ppm(ref / f"frame_{i:06d}.ppm", frame)
            name = f"mag_{i:06d}.flo"
            write_flo(pred_flows / name, read_flo(mag_out / name))
        capsys.readouterr()
        code = run(
            "evaluate", "--pred", mag_out, "--ref", ref,
            "--pred-flows", pred_flows, "--gt-flows", workspace["scene"] / "flows",
            "--out", tmp_path / "rep2",
        )
        assert code == 0
        text = capsys.readouterr().out
        psnrs, ssims = zip(
            *(image_metrics(p, r) for p, r in zip(read_video(mag_out), read_video(ref)))
        )
        epes = [
            flow_metrics(read_flo(pp), read_flo(gp))
            for pp, gp in zip(list_flo(pred_flows), list_flo(workspace["scene"] / "flows"))
        ]
        assert f"EPE {np.mean(epes):.4f} px" in text
        assert f"PSNR {np.mean(psnrs):.2f} dB" in text
        assert f"SSIM {np.mean(ssims):.4f}" in text

    def test_count_mismatch_exits_2(self, workspace, tmp_path, capsys):
        frames = workspace["scene"] / "frames"
        partial = tmp_path / "partial"
        partial.mkdir()
        write_ppm(partial / "frame_000001.ppm", read_video(frames)[0])
        assert run("evaluate", "--pred", partial, "--ref", frames, "--out", tmp_path / "r") == 2
        assert "mismatch" in capsys.readouterr().err

    def test_requires_some_input(self, tmp_path):
        assert run("evaluate", "--out", tmp_path / "r") == 2

    def test_half_specified_pair_exits_2(self, workspace, tmp_path):
        assert (
            run("evaluate", "--pred", workspace["scene"] / "frames", "--out", tmp_path / "r") == 2
        )
