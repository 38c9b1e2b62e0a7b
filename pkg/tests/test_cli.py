import json
from pathlib import Path

import numpy as np
import pytest

from nightforge.cli import main
from nightforge.image import load_image, save_image
from nightforge.restorer import (
    LinearPatchRestorer,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)

from conftest import make_clear_image


@pytest.fixture()
def clear_dir(tmp_path):
    d = tmp_path / "clear"
    d.mkdir()
    for i in range(4):
        save_image(make_clear_image((400, i), h=24, w=24), d / f"clear_{i}.png")
    return d


@pytest.fixture()
def unlabeled_dir(tmp_path):
    d = tmp_path / "unlabeled"
    d.mkdir()
    for i in range(7):
        save_image(make_clear_image((401, i), h=20, w=20), d / f"haze_{i}.png")
    return d


def _dir_bytes(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


# ----------------------------------------------------------------- augment


def test_augment_writes_outputs_and_manifest(clear_dir, tmp_path):
    out = tmp_path / "out"
    rc = main(["augment", "--in", str(clear_dir), "--out", str(out), "--seed", "3", "--count", "5"])
    assert rc == 0
    pngs = sorted(p.name for p in out.glob("*.png"))
    assert pngs == [f"aug_{i:05d}.png" for i in range(5)]
    sidecars = sorted(out.glob("*.json"))
    assert (out / "manifest.json").exists()
    record = json.loads((out / "aug_00000.json").read_text())
    assert record["config"]["blend_max"] == 0.1
    assert record["config"]["noise_weight"] == 0.1
    assert record["source_image"] == "clear_0.png"


def test_augment_deterministic_bytes(clear_dir, tmp_path):
    out = tmp_path / "out"
    inputs_before = _dir_bytes(clear_dir)
    args = ["augment", "--in", str(clear_dir), "--out", str(out), "--seed", "9", "--count", "3"]
    assert main(args) == 0
    first = _dir_bytes(out)
    for p in out.iterdir():
        p.unlink()
    assert main(args) == 0
    assert _dir_bytes(out) == first
    assert _dir_bytes(clear_dir) == inputs_before  # inputs never mutated


def test_augment_count_zero_manifest_only(clear_dir, tmp_path):
    out = tmp_path / "empty"
    assert main(["augment", "--in", str(clear_dir), "--out", str(out), "--count", "0"]) == 0
    assert [p.name for p in out.iterdir()] == ["manifest.json"]


def test_augment_missing_input_dir(tmp_path):
    rc = main(["augment", "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_augment_sidecar_replays(clear_dir, tmp_path):
    out = tmp_path / "rep"
    assert main(["augment", "--in", str(clear_dir), "--out", str(out), "--seed", "4", "--count", "1"]) == 0
    from nightforge.degrade import AugRecord, replay

    record = AugRecord.from_dict(json.loads((out / "aug_00000.json").read_text()))
    clear = load_image(clear_dir / record.source_image)
    replayed = replay(record, clear)
    written = load_image(out / "aug_00000.png")
    assert np.max(np.abs(replayed - written)) <= 1.0 / 510.0


# -------------------------------------------------------------- train-prior


def test_train_prior_toy_improves(clear_dir, tmp_path):
    ckpt = tmp_path / "model.ckpt"
    rc = main([
        "train-prior", "--data", str(clear_dir), "--out", str(ckpt),
        "--seed", "5", "--steps", "60", "--batch-size", "4",
        "--learning-rate", "0.005", "--crop-size", "16", "--radius", "1",
    ])
    assert rc == 0
    assert ckpt.exists()
    rows = (tmp_path / "model.ckpt.loss.csv").read_text().strip().splitlines()[1:]
    losses = [float(r.split(",")[1]) for r in rows]
    assert len(losses) == 60
    assert np.mean(losses[-10:]) < np.mean(losses[:10])
    manifest = json.loads((tmp_path / "model.ckpt.manifest.json").read_text())
    assert manifest["command"] == "train-prior"


def test_train_prior_zero_steps_keeps_init(clear_dir, tmp_path):
    ckpt = tmp_path / "init.ckpt"
    rc = main([
        "train-prior", "--data", str(clear_dir), "--out", str(ckpt),
        "--steps", "0", "--radius", "2",
    ])
    assert rc == 0
    _, weights = load_checkpoint(ckpt)
    assert np.array_equal(weights, LinearPatchRestorer(2, 3).get_weights())


def test_train_prior_invalid_dir_no_partial_checkpoint(tmp_path):
    ckpt = tmp_path / "never.ckpt"
    rc = main(["train-prior", "--data", str(tmp_path / "missing"), "--out", str(ckpt)])
    assert rc == 2
    assert not ckpt.exists()


def test_train_prior_preset_recorded(clear_dir, tmp_path):
    # preset supplies the published recipe; overrides keep the run small
    ckpt = tmp_path / "p.ckpt"
    rc = main([
        "train-prior", "--data", str(clear_dir), "--out", str(ckpt),
        "--preset", "reference-prior", "--steps", "1", "--batch-size", "1",
        "--crop-size", "16",
    ])
    assert rc == 0
    manifest = json.loads((tmp_path / "p.ckpt.manifest.json").read_text())
    assert manifest["config"]["train"]["learning_rate"] == 1.5e-4


# ------------------------------------------------------------------ refine


@pytest.fixture()
def prior_ckpt(tmp_path):
    model = LinearPatchRestorer(radius=1, channels=3)
    path = tmp_path / "prior.ckpt"
    save_checkpoint(model, path)
    return path


def test_refine_always_reject_checkpoint_identical(prior_ckpt, unlabeled_dir, tmp_path):
    out = tmp_path / "refined.ckpt"
    rc = main([
        "refine", "--checkpoint", str(prior_ckpt), "--unlabeled", str(unlabeled_dir),
        "--out", str(out), "--steps", "5", "--batch-size", "2",
        "--patch-size", "12", "--stride", "6", "--probe-count", "2",
        "--score-threshold", "inf", "--seed", "2",
    ])
    assert rc == 0
    assert out.read_bytes() == prior_ckpt.read_bytes()
    audit = (tmp_path / "refined.ckpt.audit.jsonl").read_text().strip().splitlines()
    assert len(audit) == 5
    assert all(not json.loads(line)["accepted"] for line in audit)


def test_refine_audit_schema(prior_ckpt, unlabeled_dir, tmp_path):
    out = tmp_path / "r.ckpt"
    rc = main([
        "refine", "--checkpoint", str(prior_ckpt), "--unlabeled", str(unlabeled_dir),
        "--out", str(out), "--steps", "3", "--batch-size", "1",
        "--patch-size", "12", "--stride", "6", "--probe-count", "2", "--seed", "1",
    ])
    assert rc == 0
    for line in (tmp_path / "r.ckpt.audit.jsonl").read_text().strip().splitlines():
        rec = json.loads(line)
        assert set(rec) == {"step", "image", "loss", "score", "accepted"}


def test_refine_missing_checkpoint(unlabeled_dir, tmp_path):
    rc = main([
        "refine", "--checkpoint", str(tmp_path / "none.ckpt"),
        "--unlabeled", str(unlabeled_dir), "--out", str(tmp_path / "o.ckpt"),
    ])
    assert rc == 2


def test_refine_dump_pseudo_labels(prior_ckpt, unlabeled_dir, tmp_path):
    out = tmp_path / "d.ckpt"
    dump = tmp_path / "pseudo"
    rc = main([
        "refine", "--checkpoint", str(prior_ckpt), "--unlabeled", str(unlabeled_dir),
        "--out", str(out), "--steps", "1", "--batch-size", "1",
        "--patch-size", "12", "--stride", "6", "--probe-count", "2", "--seed", "1",
        "--dump-pseudo", str(dump),
    ])
    assert rc == 0
    names = sorted(p.name for p in dump.iterdir())
    assert "haze_0_mean.png" in names and "haze_0_mask.png" in names


# ------------------------------------------------------------------- infer


def test_infer_identity_roundtrip(prior_ckpt, clear_dir, tmp_path):
    out = tmp_path / "restored"
    rc = main(["infer", "--checkpoint", str(prior_ckpt), "--in", str(clear_dir), "--out", str(out)])
    assert rc == 0
    for src in clear_dir.glob("*.png"):
        a = load_image(src)
        b = load_image(out / src.name)
        assert np.array_equal(a, b)


def test_infer_ensemble_logs_patch_count(prior_ckpt, clear_dir, tmp_path, capsys):
    out = tmp_path / "ens"
    rc = main([
        "infer", "--checkpoint", str(prior_ckpt), "--in", str(clear_dir),
        "--out", str(out), "--ensemble", "16", "4",
    ])
    assert rc == 0
    err = capsys.readouterr().err
    assert "9 patches" in err  # 24px axis, patch 16, stride 4: 3 positions per axis
    for src in clear_dir.glob("*.png"):
        assert np.array_equal(load_image(src), load_image(out / src.name))


def test_infer_missing_checkpoint(clear_dir, tmp_path):
    rc = main([
        "infer", "--checkpoint", str(tmp_path / "ghost.ckpt"),
        "--in", str(clear_dir), "--out", str(tmp_path / "o"),
    ])
    assert rc == 2


# ------------------------------------------------------------------- score


def test_score_stdout_csv(clear_dir, capsys):
    rc = main(["score", "--in", str(clear_dir), "--metric", "contrast"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "image,score"
    assert lines[-1].startswith("mean,")
    assert len(lines) == 2 + len(list(clear_dir.glob("*.png")))
    values = [float(l.split(",")[1]) for l in lines[1:-1]]
    assert float(lines[-1].split(",")[1]) == pytest.approx(np.mean(values))


def test_score_deterministic_stdout(clear_dir, capsys):
    main(["score", "--in", str(clear_dir)])
    first = capsys.readouterr().out
    main(["score", "--in", str(clear_dir)])
    assert capsys.readouterr().out == first


def test_score_empty_dir(tmp_path):
    d = tmp_path / "none"
    d.mkdir()
    assert main(["score", "--in", str(d)]) == 2


# ----------------------------------------------------------------- plumbing


def test_usage_error_exit_code_one(capsys):
    assert main(["augment", "--out", "somewhere"]) == 1
    assert main(["bogus-command"]) == 1


def test_version_flag(capsys):
    assert main(["--version"]) == 0


def test_config_file_layered_with_flag_override(clear_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"augment": {"blend_max": 0.2, "noise_weight": 0.05}}))
    out = tmp_path / "out"
    rc = main([
        "augment", "--in", str(clear_dir), "--out", str(out),
        "--config", str(cfg), "--count", "1", "--severity-ratio", "0.0",
    ])
    assert rc == 0
    record = json.loads((out / "aug_00000.json").read_text())
    assert record["config"]["blend_max"] == 0.2  # from file
    assert record["config"]["severity_ratio"] == 0.0  # flag wins
    assert record["severe"] is False


def test_config_file_unknown_section(clear_dir, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"augmentation": {}}))
    rc = main(["augment", "--in", str(clear_dir), "--out", str(tmp_path / "o"), "--config", str(cfg)])
    assert rc == 2
