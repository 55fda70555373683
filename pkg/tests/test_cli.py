"""End-to-end tests of the command-line workflow."""

import json
import subprocess

import numpy as np
import pandas as pd
import pytest

from hbkmr.cli import load_artifact, main
from hbkmr.kernel import FactorizationError

SIM_CONFIG = {
    "n": 60,
    "exposures": ["pb", "hg"],
    "r": [0.3, 0.3],
    "tau": 0.4,
    "gamma": [-0.6, 0.5],
    "beta": [0.6, -0.3],
    "covariates": [
        {"name": "w", "kind": "normal", "sd": 1.0},
        {"name": "site", "kind": "categorical", "levels": ["a", "b"]},
    ],
    "variance": [["w", "identity"]],
    "seed": 1,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Simulate a dataset and fit both variance models once for the module."""
    root = tmp_path_factory.mktemp("cli")
    sim_config = root / "sim.json"
    sim_config.write_text(json.dumps(SIM_CONFIG))
    data_csv = root / "data.csv"
    truth_json = root / "truth.json"
    assert (
        main(
            [
                "simulate",
                "--config", str(sim_config),
                "--output", str(data_csv),
                "--truth", str(truth_json),
            ]
        )
        == 0
    )

    fit_config = {
        "input": str(data_csv),
        "outcome": "y",
        "exposures": ["pb", "hg"],
        "covariates": ["w", "site"],
        "variance": [["w", "identity"]],
        "mcmc": {"n_burn": 200, "n_keep": 150, "seed": 3},
        "output_dir": str(root / "fit_het"),
    }
    het_json = root / "fit_het.json"
    het_json.write_text(json.dumps(fit_config))
    assert main(["fit", "--config", str(het_json)]) == 0

    hom_config = dict(fit_config, variance=[], output_dir=str(root / "fit_hom"))
    hom_json = root / "fit_hom.json"
    hom_json.write_text(json.dumps(hom_config))
    assert main(["fit", "--config", str(hom_json)]) == 0

    return {
        "root": root,
        "data_csv": data_csv,
        "truth_json": truth_json,
        "het_json": het_json,
        "het_dir": root / "fit_het",
        "hom_dir": root / "fit_hom",
    }


# -- simulate and fit -----------------------------------------------------------


def test_simulate_writes_dataset_and_truth(workspace):
    frame = pd.read_csv(workspace["data_csv"])
    assert list(frame.columns) == ["y", "pb", "hg", "w", "site"]
    assert len(frame) == 60
    truth = json.loads(workspace["truth_json"].read_text())
    assert truth["gamma"] == [-0.6, 0.5]
    assert len(truth["h"]) == 60


def test_fit_artifact_contents(workspace):
    het = workspace["het_dir"]
    for name in ("samples.csv", "dataset.csv", "meta.json", "manifest.json"):
        assert (het / name).exists(), name
    meta = json.loads((het / "meta.json").read_text())
    assert meta["label"] == "HBKMR"
    assert meta["z_names"] == ["pb", "hg"]
    assert meta["x_names"] == ["w", "site=b"]
    assert meta["w_names"] == ["w"]
    assert meta["mcmc"]["n_keep"] == 150
    assert len(meta["transforms"]) == 2
    manifest = json.loads((het / "manifest.json").read_text())
    assert {"version", "seed", "config_hash", "input_hash", "timings", "created"} <= set(
        manifest
    )
    hom_meta = json.loads((workspace["hom_dir"] / "meta.json").read_text())
    assert hom_meta["label"] == "BKMR"


def test_load_artifact_round_trip(workspace):
    samples, dataset, W, meta = load_artifact(str(workspace["het_dir"]))
    assert samples.n_draws == 150
    assert samples.label == "HBKMR"
    assert dataset.n == 60
    assert dataset.transforms is not None
    assert W.n_terms == 1
    assert dataset.categorical_levels == {"site": ["a", "b"]}
    # Standardized storage: columns mean 0 sd 1.
    np.testing.assert_allclose(dataset.Z.mean(axis=0), 0.0, atol=1e-8)


def test_fit_rerun_is_byte_identical(workspace, tmp_path):
    rerun_dir = tmp_path / "fit_rerun"
    assert (
        main(
            [
                "fit",
                "--config", str(workspace["het_json"]),
                "--output-dir", str(rerun_dir),
            ]
        )
        == 0
    )
    het = workspace["het_dir"]
    for name in ("samples.csv", "dataset.csv", "meta.json"):
        assert (rerun_dir / name).read_bytes() == (het / name).read_bytes(), name
    a = json.loads((rerun_dir / "manifest.json").read_text())
    b = json.loads((het / "manifest.json").read_text())
    for volatile in ("created", "timings"):
        a.pop(volatile)
        b.pop(volatile)
    assert a == b


def test_fit_flag_overrides_change_the_chain(workspace, tmp_path):
    out = tmp_path / "fit_seed9"
    assert (
        main(
            [
                "fit",
                "--config", str(workspace["het_json"]),
                "--output-dir", str(out),
                "--seed", "9",
                "--n-keep", "120",
            ]
        )
        == 0
    )
    samples, _, _, meta = load_artifact(str(out))
    assert samples.n_draws == 120
    assert meta["mcmc"]["seed"] == 9


# -- diagnose ----------------------------------------------------------------------


def test_diagnose_writes_reports(workspace, tmp_path, capsys):
    out = tmp_path / "diag"
    rc = main(
        [
            "diagnose",
            "--artifact", str(workspace["het_dir"]),
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    for name in (
        "residuals_posterior_mean_h.csv",
        "residuals_posterior_mean_h.svg",
        "residuals_linear_approximation.csv",
        "residuals_linear_approximation.svg",
        "associations.csv",
    ):
        assert (out / name).exists(), name
    printed = capsys.readouterr().out
    assert "posterior-mean-h" in printed
    assert "linear-approximation" in printed
    assoc = pd.read_csv(out / "associations.csv")
    assert set(assoc["method"]) == {"posterior-mean-h", "linear-approximation"}
    assert {"pb", "hg", "w", "site"} <= set(assoc["name"])


def test_diagnose_single_method_and_predictors(workspace, tmp_path):
    out = tmp_path / "diag_one"
    rc = main(
        [
            "diagnose",
            "--artifact", str(workspace["het_dir"]),
            "--method", "linear-approximation",
            "--predictors", "w,pb",
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    assert not (out / "residuals_posterior_mean_h.csv").exists()
    assoc = pd.read_csv(out / "associations.csv")
    assert list(assoc["name"]) == ["w", "pb"]


def test_diagnose_unknown_predictor_fails(workspace, tmp_path, capsys):
    rc = main(
        [
            "diagnose",
            "--artifact", str(workspace["het_dir"]),
            "--predictors", "bmi",
            "--output-dir", str(tmp_path / "x"),
        ]
    )
    assert rc == 1
    assert "unknown predictor" in capsys.readouterr().err


# -- sections -----------------------------------------------------------------------


def test_sections_outputs(workspace, tmp_path):
    out = tmp_path / "sections"
    rc = main(
        [
            "sections",
            "--artifact", str(workspace["het_dir"]),
            "--grid-size", "12",
            "--stride", "15",
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    for name in (
        "univariate_pb.csv",
        "univariate_pb.svg",
        "univariate_hg.csv",
        "joint_effects.csv",
        "joint_effects.svg",
        "single_variable_effects.csv",
        "single_variable_effects.svg",
    ):
        assert (out / name).exists(), name
    curve = pd.read_csv(out / "univariate_pb.csv")
    assert len(curve) == 12
    assert {"label", "estimate", "sd", "lower95", "upper95"} <= set(curve.columns)
    assert curve["label"].str.startswith("pb=").all()
    joint = pd.read_csv(out / "joint_effects.csv")
    assert len(joint) == 9  # quantiles 0.10 ... 0.90
    single = pd.read_csv(out / "single_variable_effects.csv")
    assert len(single) == 2 * 3


def test_sections_compare_reports_width_changes(workspace, tmp_path):
    out = tmp_path / "sections_cmp"
    rc = main(
        [
            "sections",
            "--artifact", str(workspace["het_dir"]),
            "--compare", str(workspace["hom_dir"]),
            "--stride", "15",
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    table = pd.read_csv(out / "ci_width.csv")
    assert len(table) == 9
    assert np.all(np.isfinite(table["width_reduction_pct"]))
    assert np.all(table["width"] > 0)
    # Positive means the primary artifact's interval is narrower, measured
    # against the comparison baseline.
    expected = (
        100.0 * (table["width_compare"] - table["width"]) / table["width_compare"]
    ).round(1)
    np.testing.assert_array_equal(table["width_reduction_pct"], expected)


def test_sections_compare_with_itself_is_zero_change(workspace, tmp_path):
    out = tmp_path / "sections_self"
    rc = main(
        [
            "sections",
            "--artifact", str(workspace["het_dir"]),
            "--compare", str(workspace["het_dir"]),
            "--stride", "15",
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    table = pd.read_csv(out / "ci_width.csv")
    np.testing.assert_array_equal(table["width_reduction_pct"], np.zeros(9))


# -- predict ------------------------------------------------------------------------


def test_predict_training_rows_reports_coverage(workspace, tmp_path, capsys):
    out = tmp_path / "pred"
    rc = main(
        [
            "predict",
            "--artifact", str(workspace["het_dir"]),
            "--stride", "15",
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    assert "interval coverage of observed outcomes" in capsys.readouterr().out
    frame = pd.read_csv(out / "predictions.csv")
    assert len(frame) == 60
    assert "observed" in frame.columns
    assert (out / "predictions.svg").exists()


def test_predict_new_rows(workspace, tmp_path):
    new_csv = tmp_path / "new.csv"
    pd.DataFrame(
        {
            "pb": [1.2, 2.5],
            "hg": [0.8, 1.6],
            "w": [0.0, 1.0],
            "site": ["a", "b"],
        }
    ).to_csv(new_csv, index=False)
    out = tmp_path / "pred_new"
    rc = main(
        [
            "predict",
            "--artifact", str(workspace["het_dir"]),
            "--input", str(new_csv),
            "--stride", "15",
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    frame = pd.read_csv(out / "predictions.csv")
    assert len(frame) == 2
    assert "observed" not in frame.columns
    assert np.all(frame["upper95"] > frame["lower95"])


def test_predict_single_row_input(workspace, tmp_path):
    new_csv = tmp_path / "one.csv"
    pd.DataFrame(
        {"pb": [1.5], "hg": [1.1], "w": [0.3], "site": ["b"]}
    ).to_csv(new_csv, index=False)
    out = tmp_path / "pred_one"
    rc = main(
        [
            "predict",
            "--artifact", str(workspace["het_dir"]),
            "--input", str(new_csv),
            "--stride", "15",
            "--output-dir", str(out),
        ]
    )
    assert rc == 0
    assert len(pd.read_csv(out / "predictions.csv")) == 1


def test_predict_unseen_level_fails(workspace, tmp_path, capsys):
    new_csv = tmp_path / "bad.csv"
    pd.DataFrame(
        {"pb": [1.2], "hg": [0.8], "w": [0.0], "site": ["c"]}
    ).to_csv(new_csv, index=False)
    rc = main(
        [
            "predict",
            "--artifact", str(workspace["het_dir"]),
            "--input", str(new_csv),
            "--output-dir", str(tmp_path / "x"),
        ]
    )
    assert rc == 1
    assert "unseen in training" in capsys.readouterr().err


# -- waic ---------------------------------------------------------------------------


def test_waic_compares_artifacts(workspace, tmp_path, capsys):
    out_csv = tmp_path / "waic.csv"
    rc = main(
        [
            "waic",
            "--artifacts", str(workspace["het_dir"]), str(workspace["hom_dir"]),
            "--labels", "het,hom",
            "--output", str(out_csv),
        ]
    )
    assert rc == 0
    printed = capsys.readouterr().out
    assert "delta_waic" in printed
    table = pd.read_csv(out_csv)
    assert set(table["label"]) == {"het", "hom"}
    assert table["delta_waic"].iloc[0] == 0.0


def test_waic_label_mismatch_fails(workspace, capsys):
    rc = main(
        [
            "waic",
            "--artifacts", str(workspace["het_dir"]),
            "--labels", "a,b",
        ]
    )
    assert rc == 1
    assert "labels count" in capsys.readouterr().err


# -- error handling -------------------------------------------------------------------


def test_no_command_prints_help(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_config_key_fails(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"input": "x.csv", "outcome": "y", "exposures": ["a"], "typo": 1}))
    assert main(["fit", "--config", str(bad)]) == 1
    assert "typo" in capsys.readouterr().err


def test_missing_input_file_fails(tmp_path, capsys):
    config = tmp_path / "fit.json"
    config.write_text(
        json.dumps({"input": str(tmp_path / "nope.csv"), "outcome": "y", "exposures": ["a"]})
    )
    assert main(["fit", "--config", str(config)]) == 1
    assert "not found" in capsys.readouterr().err


def test_missing_artifact_fails(tmp_path, capsys):
    rc = main(["diagnose", "--artifact", str(tmp_path / "nothing")])
    assert rc == 1
    assert "meta.json" in capsys.readouterr().err


def test_numerical_failure_exit_code(workspace, tmp_path, monkeypatch, capsys):
    import hbkmr.cli as cli_module

    def explode(*args, **kwargs):
        raise FactorizationError("synthetic blow-up")

    monkeypatch.setattr(cli_module, "fit", explode)
    rc = main(
        [
            "fit",
            "--config", str(workspace["het_json"]),
            "--output-dir", str(tmp_path / "x"),
        ]
    )
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err


def test_bad_flag_usage_fails(capsys):
    assert main(["fit"]) == 1
    assert "required" in capsys.readouterr().err


def test_console_script_reports_version():
    out = subprocess.run(["hbkmr", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "hbkmr" in out.stdout
