"""End-to-end training over fundus-prep output trees."""

import shutil
import subprocess
from pathlib import Path

import pytest

from conftest import fundus_prep_cmd, run_fundus_prep, write_disc_images
from ropharness import HeadSpec, build_model, train_eval
from ropharness.errors import EmptyClass, PairingViolation


@pytest.fixture(scope="session")
def trained(disc_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("train_out")
    handle = build_model(HeadSpec("resnet50", "plus"), input_size=96)
    result = train_eval(
        handle,
        disc_dataset / "train",
        disc_dataset / "val",
        out,
        epochs=5,
        batch_size=8,
        learning_rate=2e-3,
        seed=7,
    )
    return result


def test_acceptance_synthetic_separable_task(trained):
    assert trained.val_accuracy > 0.9
    assert len(trained.history["val_accuracy"]) <= 5
    print(f"\nACCEPTANCE PASS: synthetic separable task (val acc {trained.val_accuracy:.2f} in <=5 epochs)")


def test_pred_csv_row_count_matches_validation(trained, disc_dataset):
    rows = Path(trained.pred_csv).read_text().strip().splitlines()
    assert rows[0] == "path,predicted,true"
    n_val = len(list((disc_dataset / "val").rglob("*.png")))
    assert len(rows) - 1 == n_val


def test_pred_csv_feeds_primary_metrics_cli(trained, tmp_path):
    out_csv = tmp_path / "scores.csv"
    cmd = fundus_prep_cmd() + [
        "metrics", "--pred", str(trained.pred_csv), "--out-csv", str(out_csv),
    ]
    result = subprocess.run(cmd, capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    assert "Accuracy" in result.stdout
    assert out_csv.read_text().startswith("method,class,")


def test_gradcam_smoke_renders(trained):
    assert len(trained.gradcam_paths) == 3
    for path in trained.gradcam_paths:
        assert Path(path).stat().st_size > 0


def test_history_csv_written(trained):
    header = Path(trained.history_csv).read_text().splitlines()[0]
    assert header.startswith("epoch,")
    assert "val_accuracy" in header


def test_mixed_method_dirs_rejected(disc_dataset, tmp_path):
    other_root = tmp_path / "gray_src"
    other_root.mkdir()
    manifest = write_disc_images(other_root, n_train=2, n_val=2, seed=5)
    gray_ds = run_fundus_prep(manifest, other_root / "ds", method="gray")
    handle = build_model(HeadSpec("resnet50", "plus"), input_size=96)
    with pytest.raises(PairingViolation):
        train_eval(handle, disc_dataset / "train", gray_ds / "val", tmp_path / "out", epochs=1)


def test_single_class_train_dir_rejected(disc_dataset, tmp_path):
    crippled = tmp_path / "oneclass"
    shutil.copytree(disc_dataset, crippled)
    shutil.rmtree(crippled / "train" / "1")
    handle = build_model(HeadSpec("resnet50", "plus"), input_size=96)
    with pytest.raises(EmptyClass):
        train_eval(handle, crippled / "train", crippled / "val", tmp_path / "out", epochs=1)
