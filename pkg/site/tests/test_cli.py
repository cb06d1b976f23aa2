import pytest
from click.testing import CliRunner

from typed_crf import config
from typed_crf.cli import cli
from typed_crf.crf_model import Weights, load_weights, save_weights
from typed_crf.experiments import MULTI, metric_image_accuracy, metric_pixel_accuracy
from typed_crf.snake_data import TYPED_SCHEMA, ImageLabel, load_dataset, load_predictions

PRESETS = """
tiny:
  train_snakes: 4
  test_snakes: 3
  logistic:
    epochs: 20
  ssvm:
    epochs: 1
  admm:
    max_iterations: 40
    residual_tolerance: 1.0e-4
"""


@pytest.fixture()
def runner(monkeypatch, tmp_path):
    for name in (config.SEED_ENV_VAR, config.WORKERS_ENV_VAR, config.EXPERIMENTS_ENV_VAR):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    return CliRunner()


@pytest.fixture()
def hidden_data(runner, tmp_path):
    path = tmp_path / "hidden.txt"
    result = runner.invoke(
        cli, ["gen-data", "--count", "2", "--hidden", "--seed", "4", "--out", str(path)]
    )
    assert result.exit_code == 0, result.output
    return path


def test_gen_data(runner, tmp_path):
    path = tmp_path / "snakes.txt"
    result = runner.invoke(cli, ["gen-data", "--count", "3", "--seed", "1", "--out", str(path)])
    assert result.exit_code == 0, result.output
    samples = load_dataset(path)
    assert len(samples) == 3
    assert all(s.image_label is ImageLabel.SNAKE for s in samples)


def test_gen_data_seed_from_environment(runner, monkeypatch, tmp_path):
    monkeypatch.setenv(config.SEED_ENV_VAR, "1")
    runner.invoke(cli, ["gen-data", "--count", "2", "--out", str(tmp_path / "a.txt")])
    runner.invoke(cli, ["gen-data", "--count", "2", "--seed", "1", "--out", str(tmp_path / "b.txt")])
    assert (tmp_path / "a.txt").read_text() == (tmp_path / "b.txt").read_text()


def test_eval_gold_against_itself(runner, hidden_data):
    result = runner.invoke(cli, ["eval", "--pred", str(hidden_data), "--data", str(hidden_data)])
    assert result.exit_code == 0, result.output
    assert "1.0000" in result.output


def test_train_and_predict(runner, hidden_data, tmp_path):
    presets = tmp_path / "experiments.yaml"
    presets.write_text(PRESETS)
    model = tmp_path / "model.txt"
    result = runner.invoke(
        cli,
        [
            "train", "--model", "multi", "--data", str(hidden_data), "--epochs", "1",
            "--config", str(presets), "--preset", "tiny", "--out", str(model),
        ],
    )
    assert result.exit_code == 0, result.output
    assert load_weights(model).schema == TYPED_SCHEMA

    pred = tmp_path / "pred.txt"
    result = runner.invoke(
        cli,
        [
            "predict", "--model-file", str(model), "--data", str(hidden_data),
            "--constraints", "snake10", "--config", str(presets), "--preset", "tiny",
            "--out", str(pred),
        ],
    )
    assert result.exit_code == 0, result.output
    predictions = load_predictions(pred)
    assert len(predictions) == len(load_dataset(hidden_data))
    for sample in predictions:
        labels = sample.image.labels.ravel().tolist()
        assert all(labels.count(s) <= 1 for s in range(1, 11))


def test_library_errors_become_clean_failures(runner, tmp_path, hidden_data):
    bad = tmp_path / "bad.txt"
    bad.write_text("3 3 S\n...\n")
    result = runner.invoke(cli, ["eval", "--pred", str(bad), "--data", str(hidden_data)])
    assert result.exit_code == 1
    assert "Error:" in result.output
    assert "Traceback" not in result.output


def test_missing_constraints_file(runner, tmp_path, hidden_data):
    model = tmp_path / "model.txt"
    save_weights(Weights.zeros(TYPED_SCHEMA), model)
    result = runner.invoke(
        cli,
        [
            "predict", "--model-file", str(model), "--data", str(hidden_data),
            "--constraints", str(tmp_path / "nowhere.txt"), "--out", str(tmp_path / "pred.txt"),
        ],
    )
    assert result.exit_code != 0
    assert "does not exist" in result.output
    assert "Traceback" not in result.output


def test_undecodable_dataset(runner, tmp_path, hidden_data):
    bad = tmp_path / "bad.txt"
    bad.write_bytes(b"3 3 S\n\xff\n")
    result = runner.invoke(cli, ["eval", "--pred", str(bad), "--data", str(hidden_data)])
    assert result.exit_code == 1
    assert "cannot read dataset" in result.output
    assert result.exception is None or isinstance(result.exception, SystemExit)


def test_unknown_experiment(runner):
    result = runner.invoke(cli, ["experiment", "nope"])
    assert result.exit_code == 2


def test_experiment_report_matches_dumped_predictions(runner, tmp_path):
    presets = tmp_path / "experiments.yaml"
    presets.write_text(PRESETS)
    out = tmp_path / "results"
    result = runner.invoke(
        cli,
        [
            "experiment", "hidden", "--seed", "3", "--config", str(presets), "--preset", "tiny",
            "--dump-predictions", "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output

    lines = [l for l in (out / "hidden.tsv").read_text().splitlines() if not l.startswith("#")]
    header, *rows = [l.split("\t") for l in lines]
    row = next(dict(zip(header, r)) for r in rows if r[1] == MULTI)

    gold = load_dataset(out / "hidden-hidden-gold.txt")
    pred = load_predictions(out / "hidden-hidden-multi-type_CRF.txt")
    assert len(pred) == len(gold) >= 3
    assert row["pixel_accuracy"] == f"{metric_pixel_accuracy(pred, gold):.4f}"
    assert row["image_accuracy"] == f"{metric_image_accuracy(pred, gold):.4f}"
