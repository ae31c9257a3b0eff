"""End-to-end command-line pipeline on synthetic data: artifacts,
determinism, manifest integrity, and the exit-code taxonomy."""

import json
from pathlib import Path

import numpy as np
import pytest

from conftest import SCHEMA_TEXT, synthetic_rows, write_csv
from tabfair.cli import config_hash, load_config, main, read_provenance
from tabfair.linalg import load_matrix

BASE_CONFIG = {
    "dataset": "synthetic",
    "csv": "synthetic.csv",
    "schema": "synthetic.schema",
    "out_dir": "out",
    "seed": 0,
    "test_fraction": 0.5,
    "encoder": {
        "latent_num": 6,
        "latent_cat": 6,
        "hidden_num_cat": 3,
        "hidden_cat_num": 3,
        "epochs": 6,
        "batch_size": 32,
        "val_fraction": 0.1,
    },
    "projection": {"k": 4, "include_intercept": False, "attributes": ["group"]},
    "probe": {"learning_rate": 0.01, "epochs": 200},
}

PIPELINE_ARTIFACTS = [
    "X_num.txt", "X_cat.txt", "S.txt", "y.txt", "levelmap.txt", "split.txt",
    "sensitive_names.txt", "prepare.provenance.txt",
    "Z.txt", "model_num_cat.txt", "model_cat_num.txt",
    "loss_num_cat.csv", "loss_cat_num.csv", "train_embed.provenance.txt",
    "Z_hat.txt", "debias.provenance.txt",
    "report_biased.txt", "roc_biased.csv", "report_debiased.txt",
    "roc_debiased.csv", "evaluate.provenance.txt",
]


def make_workspace(tmp_path: Path, **config_overrides) -> Path:
    write_csv(tmp_path / "synthetic.csv", synthetic_rows())
    (tmp_path / "synthetic.schema").write_text(SCHEMA_TEXT, encoding="utf-8")
    cfg = json.loads(json.dumps(BASE_CONFIG))
    for key, value in config_overrides.items():
        if isinstance(value, dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path


def manifest_without_clock(path: Path) -> dict:
    data = json.loads(path.read_text(encoding="utf-8"))
    data.pop("timestamp")
    data.pop("timings_seconds")
    return data


class TestStages:
    def test_full_pipeline_writes_everything(self, tmp_path):
        config = make_workspace(tmp_path)
        assert main(["pipeline", "--config", str(config)]) == 0
        out = tmp_path / "out"
        for name in PIPELINE_ARTIFACTS + ["manifest.json"]:
            assert (out / name).exists(), name
        Z = load_matrix(out / "Z.txt")
        assert Z.shape == (240, 12)
        Z_hat = load_matrix(out / "Z_hat.txt")
        S = load_matrix(out / "S.txt")
        assert np.max(np.abs(Z_hat.T @ S)) < 1e-8 * np.linalg.norm(Z_hat) * np.linalg.norm(S) + 1e-12

    def test_stages_runnable_individually(self, tmp_path):
        config = make_workspace(tmp_path)
        for verb in ("prepare", "train-embed", "debias", "evaluate"):
            assert main([verb, "--config", str(config)]) == 0, verb
        assert (tmp_path / "out" / "report_debiased.txt").exists()

    def test_loss_csv_one_row_per_epoch(self, tmp_path):
        config = make_workspace(tmp_path)
        main(["prepare", "--config", str(config)])
        main(["train-embed", "--config", str(config)])
        lines = (tmp_path / "out" / "loss_num_cat.csv").read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss"
        assert len(lines) == 1 + BASE_CONFIG["encoder"]["epochs"]

    def test_train_embed_never_touches_sensitive_artifacts(self, tmp_path):
        # Structural firewall: representation learning runs even with
        # the sensitive matrix and labels deleted.
        config = make_workspace(tmp_path)
        main(["prepare", "--config", str(config)])
        (tmp_path / "out" / "S.txt").unlink()
        (tmp_path / "out" / "y.txt").unlink()
        assert main(["train-embed", "--config", str(config)]) == 0

    def test_debias_provenance_records_rank_and_residual(self, tmp_path):
        config = make_workspace(tmp_path)
        main(["pipeline", "--config", str(config)])
        prov = read_provenance(tmp_path / "out" / "debias.provenance.txt")
        assert prov["k"] == "4"
        assert float(prov["orthogonality_residual"]) >= 0.0
        assert float(prov["relative_residual"]) < 1e-8
        assert prov["attributes"] == "group"


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        config = make_workspace(tmp_path)
        assert main(["pipeline", "--config", str(config)]) == 0
        out = tmp_path / "out"
        first = {n: (out / n).read_bytes() for n in PIPELINE_ARTIFACTS}
        assert main(["pipeline", "--config", str(config)]) == 0
        for name in PIPELINE_ARTIFACTS:
            assert (out / name).read_bytes() == first[name], name

    def test_manifests_identical_except_clock(self, tmp_path):
        config = make_workspace(tmp_path)
        main(["pipeline", "--config", str(config), "--out", str(tmp_path / "a")])
        main(["pipeline", "--config", str(config), "--out", str(tmp_path / "b")])
        ma = manifest_without_clock(tmp_path / "a" / "manifest.json")
        mb = manifest_without_clock(tmp_path / "b" / "manifest.json")
        assert ma == mb

    def test_seed_override_changes_representation(self, tmp_path):
        config = make_workspace(tmp_path)
        main(["pipeline", "--config", str(config), "--out", str(tmp_path / "a")])
        main(["pipeline", "--config", str(config), "--seed", "1",
              "--out", str(tmp_path / "b")])
        Za = load_matrix(tmp_path / "a" / "Z.txt")
        Zb = load_matrix(tmp_path / "b" / "Z.txt")
        assert not np.array_equal(Za, Zb)

    def test_config_hash_excludes_out_dir_only(self, tmp_path):
        config = make_workspace(tmp_path)
        cfg = load_config(config)
        assert config_hash({**cfg, "out_dir": "elsewhere"}) == config_hash(cfg)
        assert config_hash({**cfg, "seed": 5}) != config_hash(cfg)


class TestManifest:
    def test_hashes_match_files_and_config(self, tmp_path):
        import hashlib

        config = make_workspace(tmp_path)
        main(["pipeline", "--config", str(config)])
        out = tmp_path / "out"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_hash"] == config_hash(load_config(config))
        listed = {a["name"]: a["sha256"] for a in manifest["artifacts"]}
        assert set(listed) == set(PIPELINE_ARTIFACTS)
        for name, digest in listed.items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
        # Every stage's provenance carries the manifest's config hash.
        for stage in ("prepare", "train_embed", "debias", "evaluate"):
            prov = read_provenance(out / f"{stage}.provenance.txt")
            assert prov["config_hash"] == manifest["config_hash"]

    def test_summaries_present(self, tmp_path):
        config = make_workspace(tmp_path)
        main(["pipeline", "--config", str(config)])
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert set(manifest["timings_seconds"]) == {
            "prepare", "train-embed", "debias", "evaluate"
        }
        assert "final_val_bce" in manifest["loss_summary"]
        assert "biased_accuracy" in manifest["report_summary"]
        assert "debiased_di_x100_group" in manifest["report_summary"]


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert main(["prepare"]) == 1  # --config missing
        assert main(["not-a-command", "--config", "x"]) == 1

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["prepare", "--config", str(tmp_path / "none.json")]) == 1
        assert "config error" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["prepare", "--config", str(path)]) == 1

    def test_missing_config_key(self, tmp_path):
        path = tmp_path / "c.json"
        cfg = dict(BASE_CONFIG)
        cfg.pop("probe")
        path.write_text(json.dumps(cfg), encoding="utf-8")
        assert main(["prepare", "--config", str(path)]) == 1

    def test_missing_csv_is_config_error(self, tmp_path, capsys):
        config = make_workspace(tmp_path)
        (tmp_path / "synthetic.csv").unlink()
        assert main(["prepare", "--config", str(config)]) == 1

    def test_malformed_csv_is_data_error(self, tmp_path, capsys):
        config = make_workspace(tmp_path)
        rows = synthetic_rows(6)
        rows[3] = rows[3][:-2]
        write_csv(tmp_path / "synthetic.csv", rows)
        assert main(["prepare", "--config", str(config)]) == 2
        assert "data error" in capsys.readouterr().err

    def test_evaluate_without_debias_names_missing_stage(self, tmp_path, capsys):
        config = make_workspace(tmp_path)
        main(["prepare", "--config", str(config)])
        main(["train-embed", "--config", str(config)])
        assert main(["evaluate", "--config", str(config)]) == 1
        assert "run debias first" in capsys.readouterr().err

    def test_train_embed_without_prepare(self, tmp_path, capsys):
        config = make_workspace(tmp_path)
        assert main(["train-embed", "--config", str(config)]) == 1
        assert "run prepare first" in capsys.readouterr().err

    def test_collinear_sensitive_is_numerical_error(self, tmp_path, capsys):
        schema = SCHEMA_TEXT.replace(
            "column group sensitive privileged=B",
            "column group sensitive privileged=B\n"
            "column group2 sensitive privileged=B",
        )
        rows = [r[:4] + [r[4], r[4]] + r[5:] for r in synthetic_rows()]
        header = ["x1", "x2", "color", "shape", "group", "group2", "outcome"]
        write_csv(tmp_path / "synthetic.csv", rows, header=header)
        (tmp_path / "synthetic.schema").write_text(schema, encoding="utf-8")
        cfg = json.loads(json.dumps(BASE_CONFIG))
        cfg["projection"]["attributes"] = ["group", "group2"]
        config = tmp_path / "config.json"
        config.write_text(json.dumps(cfg), encoding="utf-8")
        main(["prepare", "--config", str(config)])
        main(["train-embed", "--config", str(config)])
        assert main(["debias", "--config", str(config)]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_unknown_projection_attribute(self, tmp_path, capsys):
        config = make_workspace(tmp_path, projection={"attributes": ["nope"]})
        main(["prepare", "--config", str(config)])
        main(["train-embed", "--config", str(config)])
        assert main(["debias", "--config", str(config)]) == 1

    def test_k_out_of_range_fails_before_compute(self, tmp_path, capsys):
        config = make_workspace(tmp_path, projection={"k": 999})
        main(["prepare", "--config", str(config)])
        main(["train-embed", "--config", str(config)])
        assert main(["debias", "--config", str(config)]) == 1
        assert "out of range" in capsys.readouterr().err


class TestShippedConfigs:
    """The in-repo configs must stay loadable and consistent with the
    schemas and with the column headers the fetch script writes, even
    when the data files themselves are absent."""

    ROOT = Path(__file__).resolve().parents[1]

    @pytest.mark.parametrize(
        "name, latent, k, attributes",
        [("german", 50, 20, ["age"]), ("adult", 100, 18, ["sex", "race"])],
    )
    def test_config_loads_with_documented_grid(self, name, latent, k, attributes):
        cfg = load_config(self.ROOT / "configs" / f"{name}.json")
        assert cfg["encoder"]["latent_num"] == latent
        assert cfg["encoder"]["latent_cat"] == latent
        assert cfg["projection"]["k"] == k
        assert cfg["projection"]["attributes"] == attributes
        assert cfg["test_fraction"] == 0.5

    def test_schema_columns_match_fetch_script_headers(self):
        import importlib.util

        from tabfair.dataset import load_schema

        spec = importlib.util.spec_from_file_location(
            "fetch_data", self.ROOT / "scripts" / "fetch_data.py"
        )
        fetch_data = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(fetch_data)
        for name, header in (
            ("german", fetch_data.GERMAN_HEADER),
            ("adult", fetch_data.ADULT_HEADER),
        ):
            cfg = load_config(self.ROOT / "configs" / f"{name}.json")
            schema = load_schema(cfg["schema"])
            assert {c.name for c in schema} == set(header), name
            # the projection attributes must name sensitive columns
            sensitive = {c.name for c in schema if c.kind == "sensitive"}
            assert set(cfg["projection"]["attributes"]) <= sensitive


class TestReports:
    def test_provenance_reproducible_from_artifacts(self, tmp_path):
        # Every number in evaluate.provenance.txt must be recomputable
        # from the persisted matrices alone, and exactly so: the text
        # format round-trips float64.
        from tabfair.dataset import load_split
        from tabfair.evaluation import ProbeConfig, evaluate_representation

        config = make_workspace(tmp_path)
        assert main(["pipeline", "--config", str(config)]) == 0
        out = tmp_path / "out"
        S = load_matrix(out / "S.txt")
        y = load_matrix(out / "y.txt").ravel()
        split = load_split(out / "split.txt")
        names = (out / "sensitive_names.txt").read_text().split()
        prov = read_provenance(out / "evaluate.provenance.txt")
        probe = ProbeConfig(learning_rate=0.01, epochs=200)
        for tag, source in (("biased", "Z.txt"), ("debiased", "Z_hat.txt")):
            Z = load_matrix(out / source)
            report = evaluate_representation(Z, y, S, split, names, probe)
            assert float(prov[f"{tag}_accuracy"]) == report.accuracy
            assert float(prov[f"{tag}_roc_auc"]) == report.roc_auc
            assert float(prov[f"{tag}_di_x100_group"]) == report.attributes[0].di_x100
            assert float(prov[f"{tag}_spd_group"]) == report.attributes[0].spd
