import json
import os
import shutil

import numpy as np
import pytest

from irissr.cli.config import ConfigError, EngineSpec, ExperimentConfig, config_digest, load_config
from irissr.cli.main import main
from irissr.cli.manifest import ManifestEntry, ManifestError, load_manifest, manifest_digest, write_manifest
from irissr.cli.pipeline import parallel_map, run_experiment, worker_count
from irissr.eval import read_report_csv
from irissr.imgcore import load_image, save_image


@pytest.fixture(scope="module")
def eyes(tmp_path_factory):
    out = tmp_path_factory.mktemp("eyes")
    assert main(["fixtures", "--out", str(out), "--subjects", "5", "--samples", "3", "--seed", "2"]) == 0
    return out


@pytest.fixture(scope="module")
def textures(tmp_path_factory):
    out = tmp_path_factory.mktemp("tex")
    assert main(["fixtures", "--kind", "textures", "--count", "8", "--size", "48", "--out", str(out)]) == 0
    return out


def write_config(path, eyes, **extra):
    lines = [f'factors = {extra.pop("factors", [2])}', f'matchers = {json.dumps(extra.pop("matchers", ["gabor"]))}',
             "with_fsim = false", "[manifests]", f'enroll = "{eyes}/enroll.csv"', f'probe = "{eyes}/probe.csv"']
    if "train" in extra:
        lines.append(f'train = "{extra.pop("train")}"')
    for eng in extra.pop("engines", [{"kind": "bicubic"}]):
        lines.append("[[engines]]")
        lines += [f"{k} = {json.dumps(v)}" for k, v in eng.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestManifest:
    def test_fixture_manifests(self, eyes):
        all_ = load_manifest(eyes / "all.csv")
        enroll, probe = load_manifest(eyes / "enroll.csv"), load_manifest(eyes / "probe.csv")
        assert len(all_) == 15 and len(enroll) == 5 and len(probe) == 10
        assert {e.sample for e in enroll} == {0}
        assert all(os.path.exists(e.path) for e in all_)
        assert all_[0].label == "s000/L"

    def test_round_trip_and_digest(self, eyes, tmp_path):
        entries = load_manifest(eyes / "all.csv")
        write_manifest(tmp_path / "m.csv", entries)
        back = load_manifest(tmp_path / "m.csv")
        assert back == entries
        assert manifest_digest(back) == manifest_digest(entries)

    @pytest.mark.parametrize("body", [
        "path,subject,eye\nx.png,a,L\n",
        "path,subject,eye,sample\nmissing.png,a,L,0\n",
        "path,subject,eye,sample\nimg.png,a,L,zero\n",
        "path,subject,eye,sample\nimg.png,a,L,0\nimg.png,a,L,0\n",
    ])
    def test_invalid(self, tmp_path, body):
        save_image(tmp_path / "img.png", np.zeros((4, 4)))
        (tmp_path / "m.csv").write_text(body)
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "m.csv")

    def test_sorted(self, tmp_path):
        save_image(tmp_path / "i.png", np.zeros((4, 4)))
        (tmp_path / "m.csv").write_text("path,subject,eye,sample\ni.png,b,L,1\ni.png,a,R,0\ni.png,a,L,2\n")
        assert [(e.subject, e.eye) for e in load_manifest(tmp_path / "m.csv")] == [("a", "L"), ("a", "R"), ("b", "L")]

    def test_entry_label(self):
        assert ManifestEntry("/x.png", "7", "R", 0).label == "7/R"


class TestConfig:
    def test_load_and_digest(self, eyes, tmp_path):
        p = write_config(tmp_path / "c.toml", eyes, factors=[1, 2])
        cfg = load_config(p)
        assert cfg.factors == [1, 2] and cfg.engines[0].kind == "bicubic"
        other = load_config(p, {"out": str(tmp_path / "elsewhere")})
        assert config_digest(cfg) == config_digest(other)
        assert config_digest(cfg) != config_digest(load_config(p, {"seed": 9}))

    def test_relative_paths(self, eyes, tmp_path):
        rel = os.path.relpath(eyes, tmp_path)
        (tmp_path / "c.toml").write_text(f'factors = [2]\n[manifests]\nenroll = "{rel}/enroll.csv"\n'
                                         f'probe = "{rel}/probe.csv"\n[[engines]]\nkind = "bicubic"\n')
        cfg = load_config(tmp_path / "c.toml")
        assert os.path.samefile(cfg.enroll, eyes / "enroll.csv")

    @pytest.mark.parametrize("kwargs", [
        dict(engines=[], factors=[2]),
        dict(engines=[EngineSpec("bicubic")], factors=[]),
        dict(engines=[EngineSpec("bicubic")], factors=[2], matchers=[]),
        dict(engines=[EngineSpec("bicubic")], factors=[2], matchers=["ocr"]),
        dict(engines=[EngineSpec("bicubic")], factors=[0]),
        dict(engines=[EngineSpec("bicubic")], factors=[2], segmentation="manual"),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs)

    def test_unknown_engine_and_key(self, tmp_path):
        with pytest.raises(ConfigError):
            EngineSpec("magic")
        (tmp_path / "c.toml").write_text('factors = [2]\nbogus = 1\n[[engines]]\nkind = "bicubic"\n')
        with pytest.raises(ConfigError):
            load_config(tmp_path / "c.toml")
        (tmp_path / "d.toml").write_text("factors = [2\n")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "d.toml")


class TestCommands:
    def test_sr_bicubic_no_model(self, eyes, tmp_path):
        lr = np.round(np.random.default_rng(0).random((57, 57)) * 255) / 255
        save_image(tmp_path / "in.png", lr)
        assert main(["sr", str(tmp_path / "in.png"), "--factor", "4", "--out", str(tmp_path / "o")]) == 0
        assert load_image(tmp_path / "o" / "in.png").shape == (228, 228)

    def test_sr_missing_model(self, tmp_path):
        save_image(tmp_path / "in.png", np.zeros((8, 8)))
        assert main(["sr", str(tmp_path / "in.png"), "--engine", "srcnn", "--factor", "2",
                     "--out", str(tmp_path / "o")]) == 2
        assert main(["sr", str(tmp_path / "in.png"), "--model", str(tmp_path / "none.model"),
                     "--factor", "2", "--out", str(tmp_path / "o")]) == 2

    def test_train_then_sr(self, textures, tmp_path, capsys):
        model = tmp_path / "s.model"
        rc = main(["train", "--manifest", str(textures / "train.csv"), "--engine", "srcnn", "--factor", "2",
                   "--epochs", "1", "--stride", "15", "--patch", "21", "--out", str(model)])
        assert rc == 0 and model.exists()
        test_imgs = [e.path for e in load_manifest(textures / "test.csv")]
        assert main(["sr", *test_imgs, "--model", str(model), "--factor", "2", "--from-hr",
                     "--out", str(tmp_path / "rec")]) == 0
        assert len(os.listdir(tmp_path / "rec")) == len(test_imgs)
        # trained for x2 only
        assert main(["sr", test_imgs[0], "--model", str(model), "--factor", "3", "--out", str(tmp_path / "r3")]) == 2
        assert "not 3" in capsys.readouterr().err

    def test_train_empty_manifest(self, tmp_path):
        (tmp_path / "m.csv").write_text("path,subject,eye,sample\n")
        assert main(["train", "--manifest", str(tmp_path / "m.csv"), "--engine", "srcnn", "--factor", "2"]) == 2

    def test_train_pca_single_image_warns(self, textures, tmp_path, caplog):
        entries = load_manifest(textures / "train.csv")[:1]
        write_manifest(tmp_path / "one.csv", entries)
        rc = main(["train", "--manifest", str(tmp_path / "one.csv"), "--engine", "pca_eigenpatch",
                   "--factor", "2", "--out", str(tmp_path / "p.model")])
        assert rc == 0 and "rank-0" in caplog.text

    def test_assess(self, eyes, tmp_path):
        ref = tmp_path / "ref"
        ref.mkdir()
        for name in ("s000_L_0.png", "s001_L_0.png"):
            shutil.copy(eyes / name, ref / name)
        out = tmp_path / "q.csv"
        assert main(["assess", "--ref", str(ref), "--test", str(ref), "--out", str(out), "--no-fsim"]) == 0
        rows = out.read_text().splitlines()
        assert rows[1].split(",")[2] == "1.000000" and rows[3].startswith("mean,100.000000,1.000000")
        shutil.copy(eyes / "s002_L_0.png", ref / "extra.png")
        test = tmp_path / "t"
        shutil.copytree(ref, test)
        os.remove(test / "extra.png")
        assert main(["assess", "--ref", str(ref), "--test", str(test), "--out", str(out), "--no-fsim"]) == 1

    def test_verify_self_and_failures(self, eyes, tmp_path, capsys):
        assert main(["verify", "--manifest", str(eyes / "all.csv"), "--out", str(tmp_path / "v")]) == 0
        info = json.loads((tmp_path / "v" / "eer.json").read_text())
        assert info["eer"] == 0.0 and info["n_genuine"] == 15
        assert {"scores.csv", "hist.svg", "roc.svg"} <= set(os.listdir(tmp_path / "v"))
        # a broken sidecar excludes one image and makes the exit code nonzero
        bad = tmp_path / "bad"
        shutil.copytree(eyes, bad)
        (bad / "s000_L_1.seg.csv").write_text("garbage\n")
        assert main(["verify", "--manifest", str(bad / "all.csv"), "--out", str(tmp_path / "v2")]) == 1
        info = json.loads((tmp_path / "v2" / "eer.json").read_text())
        assert len(info["failures"]) == 1 and info["n_genuine"] == 13

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("IRIS_SR_THREADS", "3")
        assert worker_count() == 3
        assert parallel_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
        monkeypatch.setenv("IRIS_SR_THREADS", "lots")
        assert worker_count() == 1


class TestExperiment:
    def test_smoke_and_determinism(self, eyes, tmp_path):
        cfg = write_config(tmp_path / "c.toml", eyes)
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
        a, b = (tmp_path / "a" / "report.csv").read_bytes(), (tmp_path / "b" / "report.csv").read_bytes()
        assert a == b
        rows = read_report_csv(tmp_path / "a" / "report.csv")
        assert len(rows) == 1 and 0.0 <= float(rows[0]["eer"]) <= 0.5
        assert a.startswith(b"# config_digest=")

    def test_threads_do_not_change_output(self, eyes, tmp_path, monkeypatch):
        cfg = write_config(tmp_path / "c.toml", eyes, factors=[1, 4], matchers=["gabor", "sift"])
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        monkeypatch.setenv("IRIS_SR_THREADS", "4")
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()

    def test_matches_stage_by_stage(self, eyes, tmp_path):
        cfg = load_config(write_config(tmp_path / "c.toml", eyes, factors=[4]), {"out": str(tmp_path / "exp")})
        row = run_experiment(cfg).rows[0]

        probe = load_manifest(eyes / "probe.csv")
        ref, rec = tmp_path / "ref", tmp_path / "rec"
        ref.mkdir()
        for e in probe:
            shutil.copy(e.path, ref / e.name)
        assert main(["sr", str(ref), "--factor", "4", "--from-hr", "--out", str(rec)]) == 0
        assert main(["assess", "--ref", str(ref), "--test", str(rec), "--no-fsim",
                     "--out", str(tmp_path / "q.csv")]) == 0
        mean = (tmp_path / "q.csv").read_text().splitlines()[-2].split(",")
        assert float(mean[1]) == pytest.approx(row.mean_psnr, abs=1e-6)
        assert float(mean[2]) == pytest.approx(row.mean_ssim, abs=1e-6)
        for e in probe:
            shutil.copy(e.path[:-4] + ".seg.csv", rec / (e.name[:-4] + ".seg.csv"))
        write_manifest(rec / "probe.csv", [ManifestEntry(str(rec / e.name), e.subject, e.eye, e.sample)
                                           for e in probe])
        assert main(["verify", "--manifest", str(eyes / "enroll.csv"), "--probe", str(rec / "probe.csv"),
                     "--out", str(tmp_path / "v")]) == 0
        info = json.loads((tmp_path / "v" / "eer.json").read_text())
        assert info["eer"] == row.eer
        assert (info["n_genuine"], info["n_impostor"]) == (row.n_genuine, row.n_impostor)

    def test_trainable_engine_and_original_row(self, eyes, textures, tmp_path):
        cfg = write_config(tmp_path / "c.toml", eyes, factors=[1, 2], train=textures / "train.csv",
                           engines=[{"kind": "srcnn", "epochs": 1, "patch": 21, "stride": 15, "train_corpus": "tex"}])
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rows = read_report_csv(tmp_path / "o" / "report.csv")
        assert [(r["engine"], r["factor"]) for r in rows] == [("original", "1"), ("srcnn", "2")]
        assert rows[1]["train_corpus"] == "tex"
        info = json.loads((tmp_path / "o" / "run_info.json").read_text())
        assert info["failures"] == []

    def test_failures_recorded_not_fatal(self, eyes, tmp_path):
        # srcnn with no training manifest fails to train; bicubic rows are still produced
        cfg = write_config(tmp_path / "c.toml", eyes, engines=[{"kind": "srcnn"}, {"kind": "bicubic"}])
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        rows = read_report_csv(tmp_path / "o" / "report.csv")
        assert [r["engine"] for r in rows] == ["bicubic"]
        info = json.loads((tmp_path / "o" / "run_info.json").read_text())
        assert info["failures"][0]["stage"] == "train"
