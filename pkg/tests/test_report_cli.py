from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest
from click.testing import CliRunner

from favfa.cli import main
from favfa.report import AnalysisConfig, run_analysis
from favfa.synth import make_verification_dataset, write_dataset

BUNDLE = [
    "fairness_report.json", "per_group.csv", "logit_tmr.csv", "logit_fmr.csv",
    "marginal_effects.csv", "marginal_effects.json", "marginal_effects.svg",
    "anova_pos.csv", "anova_pos.svg", "anova_neg.csv", "anova_neg.svg",
    "diagnostics.json", "run_manifest.json", "diagnostics_qq.svg",
]


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    dataset = make_verification_dataset(
        n_identities=120, images_per_identity=3, n_positive=900, n_negative=900,
        seed=5, fmr_bias={"African": 0.10},
    )
    write_dataset(dataset, out)
    return out


def config_for(demo_dir, out_dir, **overrides):
    values = dict(
        schema_path=demo_dir / "schema.json",
        images_path=demo_dir / "images.csv",
        pairs_path=demo_dir / "pairs.csv",
        out_dir=out_dir,
        min_support=20,
        seed=11,
    )
    values.update(overrides)
    return AnalysisConfig(**values)


def test_run_analysis_writes_bundle(demo_dir, tmp_path):
    result = run_analysis(config_for(demo_dir, tmp_path / "out"))
    assert sorted(result.outputs) == sorted(BUNDLE)
    for name in BUNDLE:
        path = tmp_path / "out" / name
        assert path.exists() and path.stat().st_size > 0
    report = json.loads((tmp_path / "out" / "fairness_report.json").read_text())
    assert 0.0 <= report["dpr"] <= 1.0
    assert report["per_group"]
    manifest = json.loads((tmp_path / "out" / "run_manifest.json").read_text())
    assert set(manifest["inputs"]) == {"schema", "images", "pairs"}
    assert all(len(v["sha256"]) == 64 for v in manifest["inputs"].values())


def test_run_analysis_deterministic_across_dirs(demo_dir, tmp_path):
    run_analysis(config_for(demo_dir, tmp_path / "a"))
    run_analysis(config_for(demo_dir, tmp_path / "b"))
    for name in BUNDLE:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_run_analysis_threads_do_not_change_bytes(demo_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("FAVFA_THREADS", "1")
    run_analysis(config_for(demo_dir, tmp_path / "single"))
    monkeypatch.setenv("FAVFA_THREADS", "4")
    run_analysis(config_for(demo_dir, tmp_path / "multi"))
    for name in BUNDLE:
        assert (tmp_path / "single" / name).read_bytes() == (tmp_path / "multi" / name).read_bytes()


def test_run_analysis_bootstrap_column(demo_dir, tmp_path):
    result = run_analysis(config_for(demo_dir, tmp_path / "boot", bootstrap=60))
    text = (tmp_path / "boot" / "marginal_effects.csv").read_text()
    header, first = text.splitlines()[:2]
    assert header.split(",")[-1] == "bootstrap_se"
    assert first.split(",")[-1] != ""
    assert result.bootstrap_se


def test_svgs_well_formed(demo_dir, tmp_path):
    run_analysis(config_for(demo_dir, tmp_path / "svg"))
    for name in BUNDLE:
        if name.endswith(".svg"):
            root = ET.fromstring((tmp_path / "svg" / name).read_text())
            assert root.tag.endswith("svg")


def test_cli_analyze_success(demo_dir, tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["analyze", "--schema", str(demo_dir / "schema.json"),
         "--images", str(demo_dir / "images.csv"),
         "--pairs", str(demo_dir / "pairs.csv"),
         "--out", str(tmp_path / "cli_out"), "--min-support", "20", "--seed", "2"],
    )
    assert result.exit_code == 0, result.output
    assert "threshold:" in result.output
    assert "DoB" in result.output and "(percent)" in result.output


def test_cli_analyze_domain_error_exit_1(demo_dir, tmp_path):
    pairs_path = tmp_path / "pairs_one_class.csv"
    lines = (demo_dir / "pairs.csv").read_text().splitlines()
    header = lines[0]
    kept = [header] + [l for l in lines[1:] if ",same," in l]
    pairs_path.write_text("\n".join(kept) + "\n")
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["analyze", "--schema", str(demo_dir / "schema.json"),
         "--images", str(demo_dir / "images.csv"),
         "--pairs", str(pairs_path), "--out", str(tmp_path / "nope")],
    )
    assert result.exit_code == 1
    payload = json.loads(result.stderr.strip().splitlines()[-1])
    assert payload["error"] == "DegeneratePairs"
    assert not (tmp_path / "nope" / "fairness_report.json").exists()


def test_cli_analyze_optional_flags(demo_dir, tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["analyze", "--schema", str(demo_dir / "schema.json"),
         "--images", str(demo_dir / "images.csv"),
         "--pairs", str(demo_dir / "pairs.csv"),
         "--out", str(tmp_path / "flags"), "--min-support", "20",
         "--factor-order", "pose,age,ethnicity,gender",
         "--pair-aggregate", "absdiff", "--interactions", "--alpha", "0.01"],
    )
    assert result.exit_code == 0, result.output
    anova_rows = (tmp_path / "flags" / "anova_neg.csv").read_text().splitlines()
    names = [row.split(",")[0] for row in anova_rows[1:]]
    assert names[:4] == ["pose", "age", "ethnicity", "gender"]
    assert any("×" in n for n in names)  # interaction factors present


def test_cli_missing_file_exit_2(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["analyze", "--schema", str(tmp_path / "missing.json"),
         "--images", "x", "--pairs", "y", "--out", str(tmp_path / "o")],
    )
    assert result.exit_code == 2


def test_cli_diversity_table(tmp_path):
    # 0.7 / 0.1 / 0.1 / 0.1 ethnicity split displays as 0.68 at 2 d.p.
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(json.dumps({
        "attributes": [
            {"name": "ethnicity", "kind": "categorical", "scope": "image",
             "levels": ["Caucasian", "African", "Asian", "Indian"],
             "reference": "Caucasian"},
        ]
    }))
    rows = ["image_id,identity_id,ethnicity"]
    for i in range(10):
        level = "Caucasian" if i < 7 else ["African", "Asian", "Indian"][i - 7]
        rows.append(f"img{i},I{i},{level}")
    images_path = tmp_path / "images.csv"
    images_path.write_text("\n".join(rows) + "\n")
    runner = CliRunner()
    result = runner.invoke(
        main, ["diversity", "--schema", str(schema_path), "--images", str(images_path)]
    )
    assert result.exit_code == 0, result.output
    assert "0.68" in result.output


def test_cli_diversity_extremes(tmp_path):
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(json.dumps({
        "attributes": [
            {"name": "gender", "kind": "categorical", "scope": "image",
             "levels": ["Male", "Female"], "reference": "Male"},
        ]
    }))
    balanced = tmp_path / "balanced.csv"
    balanced.write_text("image_id,identity_id,gender\na,A,Male\nb,B,Female\n")
    single = tmp_path / "single.csv"
    single.write_text("image_id,identity_id,gender\na,A,Male\nb,B,Male\n")
    runner = CliRunner()
    assert "1.00" in runner.invoke(
        main, ["diversity", "--schema", str(schema_path), "--images", str(balanced)]
    ).output
    assert "0.00" in runner.invoke(
        main, ["diversity", "--schema", str(schema_path), "--images", str(single)]
    ).output


def write_planner_inputs(tmp_path):
    from favfa.schema import schema_to_dict
    from favfa.synth import make_planner_pools
    from favfa.util import canonical_json

    schema, ids, styles = make_planner_pools(ids_per_cell=2, styles_per_segment=40)
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(canonical_json(schema_to_dict(schema)))

    def dump(table, path):
        rows = ["image_id,identity_id,gender,ethnicity,age,pose"]
        for rec in table:
            rows.append(
                f"{rec.image_id},{rec.identity_id},{rec.values['gender']},"
                f"{rec.values['ethnicity']},{rec.values['age']},{rec.values['pose']}"
            )
        path.write_text("\n".join(rows) + "\n")

    dump(ids, tmp_path / "ids.csv")
    dump(styles, tmp_path / "styles.csv")
    return schema_path, tmp_path / "ids.csv", tmp_path / "styles.csv"


def test_cli_plan_toy(tmp_path):
    schema_path, ids_path, styles_path = write_planner_inputs(tmp_path)
    runner = CliRunner()
    out = tmp_path / "plan.jsonl"
    result = runner.invoke(
        main,
        ["plan", "--schema", str(schema_path), "--ids", str(ids_path),
         "--styles", str(styles_path), "--n-identities", "8", "--samples", "8",
         "--seed", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "1.00" in result.output  # gender and ethnicity diversity
    lines = out.read_text().splitlines()
    assert len(lines) == 8
    entry = json.loads(lines[0])
    assert len(entry["styles"]) == 8


def test_cli_plan_missing_cell_exit_1(tmp_path):
    schema_path, ids_path, styles_path = write_planner_inputs(tmp_path)
    text = ids_path.read_text().splitlines()
    filtered = [text[0]] + [l for l in text[1:] if not l.split(",")[2:4] == ["Male", "Asian"]]
    ids_path.write_text("\n".join(filtered) + "\n")
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["plan", "--schema", str(schema_path), "--ids", str(ids_path),
         "--styles", str(styles_path), "--n-identities", "8", "--samples", "4",
         "--seed", "1", "--out", str(tmp_path / "plan.jsonl")],
    )
    assert result.exit_code == 1
    assert "InsufficientCandidates" in result.stderr


def test_cli_weights_stdout(tmp_path):
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(json.dumps({
        "attributes": [
            {"name": "ethnicity", "kind": "categorical", "scope": "image",
             "levels": ["African", "Asian"], "reference": "African"},
        ]
    }))
    images_path = tmp_path / "images.csv"
    images_path.write_text(
        "image_id,identity_id,ethnicity\ni1,a,African\ni2,b,African\ni3,c,Asian\n"
    )
    runner = CliRunner()
    result = runner.invoke(
        main, ["weights", "--schema", str(schema_path), "--images", str(images_path),
               "--attrs", "ethnicity"],
    )
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0] == "image_id,weight,probability"
    assert lines[1].split(",") == ["i1", "0.5", "0.25"]
    assert lines[3].split(",") == ["i3", "1.0", "0.5"]
