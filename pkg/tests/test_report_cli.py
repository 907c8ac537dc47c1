import json
import shutil
import sys

import pytest

from conftest import DATA
from slmadapt.cli import main
from slmadapt.data_core import compute_statistics, ingest_dataset
from slmadapt.errors import PipelineError, ValidationError
from slmadapt.metrics import MetricReport
from slmadapt.pipeline import load_config, run_pipeline
from slmadapt.report import RunRegistry, cmd_report, comparison_table, render_stats_csv, render_stats_markdown

GOLDEN = DATA / "golden"


# --- statistics tables ------------------------------------------------------


def test_stats_table_layout():
    rows = [(name, compute_statistics(ingest_dataset(DATA / f"toy_{name}.jsonl", name)))
            for name in ("train", "validation", "test1", "test2")]
    md = render_stats_markdown(rows).splitlines()
    assert md[0] == "| Split | Contexts | QA Pairs | QA/Context | Ques. length | Ans. length |"
    assert md[2].startswith("| train | 5 | 12 | 2.40 |")
    assert md[-1].startswith("| test2 | 1 | 2 | 2.00 |") and md[-1].endswith("| -- |")
    csv_lines = render_stats_csv(rows).splitlines()
    assert csv_lines[0] == "Split,Contexts,QA Pairs,QA/Context,Ques. length,Ans. length"
    assert len(csv_lines) == 5


def test_stats_cli_five_rows(tmp_path, capsys, toy_train):
    from slmadapt.data_core import write_split
    from slmadapt.synthgen import GenerationConfig, MockGenerationBackend, fixed_clock, run_generation_campaign

    synth = run_generation_campaign(toy_train, GenerationConfig("mock"), MockGenerationBackend("mock", 3), toy_train,
                                    clock=fixed_clock()).split
    path = write_split(synth, tmp_path / "synthetic.jsonl")
    args = [f"{n}={DATA / f'toy_{n}.jsonl'}" for n in ("train", "validation", "test1", "test2")] + [str(path)]
    assert main(["stats", *args]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 + 5
    assert lines[-1].startswith("| synthetic | 5 | 15 | 3.00 |")


def test_stats_cli_reports_bad_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"kind": "context", "context_id": "c", "text": "t"}\n{"kind": "qa"}\n', encoding="utf-8")
    assert main(["stats", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


# --- registry and comparison tables -----------------------------------------


def _golden_registry(tmp_path):
    root = tmp_path / "registry"
    shutil.copytree(GOLDEN / "registry", root)
    return RunRegistry(root)


@pytest.mark.parametrize(
    "style, splits",
    [("table3", ["validation", "test1"]), ("table4", ["validation"])],
)
@pytest.mark.parametrize("fmt", ["md", "csv"])
def test_report_matches_golden(tmp_path, style, splits, fmt):
    registry = _golden_registry(tmp_path)
    table = cmd_report(registry, ["m3", "m1", "m2"], splits, style=style)
    expected = (GOLDEN / f"{style}.{fmt}").read_text(encoding="utf-8")
    assert table.render(fmt) == expected
    # rendering twice is byte-identical
    assert cmd_report(registry, sorted(registry.entries), splits, style=style).render(fmt) == expected


def test_missing_report_gives_gap_and_warning(tmp_path):
    table = cmd_report(_golden_registry(tmp_path), ["m1", "m2", "m3"], ["validation", "test1"])
    assert table.warnings == ["no metric report for run 'm3' on split 'test1'"]
    assert table.to_csv().splitlines()[-1].endswith("n/a,n/a,n/a")


def test_single_run_flags_every_column():
    rep = MetricReport("solo", "validation", 1, rougeL_f=0.5, bleu=0.25, bertscore_f=0.75)
    md = comparison_table({"solo": {"validation": rep}}, ["validation"]).to_markdown()
    assert md.splitlines()[-1] == "| solo | **0.500** | **0.250** | **0.750** |"


def test_report_values_equal_stored_values_at_display_precision(tmp_path):
    registry = _golden_registry(tmp_path)
    table = cmd_report(registry, ["m1"], ["validation"], style="table4")
    rep = registry.report("m1", "validation")
    cells = table.to_csv().splitlines()[1].split(",")
    # a single run is the best of every column
    assert cells[1:] == [f"{rep.bleu1:.1f}*", f"{rep.bleu2:.1f}*", f"{rep.rouge1_f:.4f}*", f"{rep.rouge2_f:.4f}*",
                         f"{rep.rougeL_f:.4f}*", f"{rep.qa_f1:.3f}*"]


def test_unknown_run_and_style(tmp_path):
    registry = _golden_registry(tmp_path)
    with pytest.raises(ValidationError):
        cmd_report(registry, ["nope"], ["validation"])
    with pytest.raises(ValidationError):
        comparison_table({}, ["validation"], style="table9")


def test_registry_rules(tmp_path):
    reg = RunRegistry(tmp_path)
    (tmp_path / "manifest.json").write_text("{}")
    reg.register("r1", plan_digest="d", manifest="manifest.json")
    with pytest.raises(ValidationError):
        reg.register("r1", plan_digest="d", manifest="manifest.json")
    with pytest.raises(ValidationError):
        reg.register("r2", plan_digest="d", manifest="missing.json")
    outside = tmp_path.parent / "outside.json"
    outside.write_text("{}")
    with pytest.raises(ValidationError):
        reg.register("r3", plan_digest="d", manifest=outside)
    assert RunRegistry(tmp_path).entries == reg.entries
    assert reg.missing_files() == []


# --- CLI --------------------------------------------------------------------


def test_cli_report_golden(capsys):
    code = main(["report", "--registry", str(GOLDEN / "registry"), "--splits", "validation",
                 "--style", "table4", "--format", "csv"])
    assert code == 0
    assert capsys.readouterr().out == (GOLDEN / "table4.csv").read_text(encoding="utf-8")


def test_cli_end_to_end_commands(tmp_path, capsys):
    w = tmp_path
    train = DATA / "toy_train.jsonl"
    assert main(["generate", "--input", str(train), "--backend-id", "mock-phi", "--pairs-per-context", "3",
                 "--seed", "1", "--fixed-timestamps", "--out", str(w / "synth.jsonl")]) == 0
    assert len(ingest_dataset(w / "synth.jsonl").pairs) == 15
    assert (w / "synth.manifest.jsonl").is_file()
    assert main(["mix", "--strategy", "m2", "--original", str(train), "--synthetic", str(w / "synth.jsonl"),
                 "--out", str(w / "plan.json")]) == 0
    assert main(["train", "--plan", str(w / "plan.json"), "--lr", "1e-4", "--store", str(w / "store"),
                 "--out-dir", str(w / "run")]) == 0
    out = capsys.readouterr().out
    final = out.strip().splitlines()[-1].split()[2]
    assert main(["predict", "--artifact", final, "--input", str(DATA / "toy_validation.jsonl"),
                 "--store", str(w / "store"), "--out", str(w / "pred.jsonl")]) == 0
    assert main(["evaluate", "--predictions", str(w / "pred.jsonl"), "--gold", str(DATA / "toy_validation.jsonl"),
                 "--out", str(w / "report.json"), "--per-example-csv", str(w / "ex.csv")]) == 0
    rep = MetricReport.load(w / "report.json")
    assert rep.n_examples == 3 and 0.0 <= rep.rougeL_f <= 1.0
    assert (w / "ex.csv").read_text().count("\n") == 4


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["stats", str(tmp_path / "missing.jsonl")]) == 1
    pred = tmp_path / "p.jsonl"
    pred.write_text('{"pair_id": "nope", "prediction": "x"}\n', encoding="utf-8")
    assert main(["evaluate", "--predictions", str(pred), "--gold", str(DATA / "toy_validation.jsonl")]) == 1
    assert main(["evaluate", "--predictions", str(pred), "--gold", str(DATA / "toy_test2.jsonl")]) == 1
    # an adapter command that cannot start is a backend error
    assert main(["mix", "--strategy", "m1", "--original", str(DATA / "toy_train.jsonl"), "--out", str(tmp_path / "p1.json")]) == 0
    assert main(["train", "--plan", str(tmp_path / "p1.json"), "--lr", "1e-4", "--trainer", "adapter",
                 "--adapter-cmd", "/nonexistent/trainer", "--out-dir", str(tmp_path / "r")]) == 2
    assert main(["mix", "--strategy", "m2", "--original", str(DATA / "toy_train.jsonl")]) == 1


def test_cli_missing_lr_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["train", "--plan", "x.json"])
    assert info.value.code == 2  # argparse usage error


# --- pipeline ---------------------------------------------------------------


def _config(tmp_path, **changes):
    cfg = load_config(DATA / "pipeline.toml")
    cfg["root"] = str(tmp_path / "root")
    cfg.update(changes)
    return cfg


def test_pipeline_end_to_end(tmp_path):
    cfg = _config(tmp_path)
    cfg["data"] = {**cfg["data"], "eval": {"validation": "toy_validation.jsonl", "test2": "toy_test2.jsonl"}}
    res = run_pipeline(cfg)
    root = tmp_path / "root"
    registry = RunRegistry(root)
    assert sorted(registry.entries) == ["m1", "m2", "m3"]
    assert len(list((root / "plans").glob("*.json"))) == 3
    assert len(list((root / "artifacts").glob("*.json"))) >= 4
    assert sum(len(e["reports"]) for e in registry.entries.values()) == 3
    assert registry.missing_files() == []
    # the held-out split is predicted but never scored
    assert all("test2" in e["predictions"] and "test2" not in e["reports"] for e in registry.entries.values())
    assert any("test2" in w for w in res.warnings)
    assert (root / "report.md").is_file() and (root / "report.csv").is_file()
    synth = ingest_dataset(root / "synthetic" / "mock-phi.jsonl")
    assert len(synth.pairs) / len(synth.contexts) == 5


def test_pipeline_is_deterministic(tmp_path):
    a = run_pipeline(_config(tmp_path / "a"))
    b = run_pipeline(_config(tmp_path / "b"))
    again = run_pipeline(_config(tmp_path / "a"))
    assert a.registry_digest == b.registry_digest == again.registry_digest


def test_pipeline_missing_dataset_stops_at_ingest(tmp_path):
    cfg = _config(tmp_path)
    cfg["data"] = {**cfg["data"], "train": "does_not_exist.jsonl"}
    with pytest.raises(ValidationError) as info:
        run_pipeline(cfg)
    assert info.value.exit_code == 1
    assert not (tmp_path / "root").exists()


def test_pipeline_generation_failure_is_partial(tmp_path):
    cfg = _config(tmp_path)
    cfg["generation"] = [{"backend": "http", "backend_id": "dead", "endpoint": "http://127.0.0.1:9/x", "timeout": 2}]
    cfg["training"] = {**cfg["training"], "m2_synthetic": "dead"}
    with pytest.raises(PipelineError) as info:
        run_pipeline(cfg)
    assert info.value.exit_code == 3
    # partial output is kept for inspection
    assert (tmp_path / "root" / "data").is_dir()


def test_cli_pipeline_with_overrides(tmp_path, capsys):
    root = tmp_path / "cli_root"
    assert main(["pipeline", "--config", str(DATA / "pipeline.toml"), "--root", str(root), "--seed", "13"]) == 0
    out = capsys.readouterr().out
    assert out.startswith(f"registry {root} digest ")
    assert RunRegistry(root).digest() in out
    plan = json.loads(next((root / "plans").glob("m1*.json")).read_text())
    assert plan["seed"] == 13


@pytest.mark.skipif(sys.platform == "win32", reason="entry point shim")
def test_console_script_module_entry(tmp_path):
    import subprocess

    proc = subprocess.run([sys.executable, "-m", "slmadapt.cli", "report", "--registry", str(GOLDEN / "registry"),
                           "--splits", "validation,test1", "--format", "md"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == (GOLDEN / "table3.md").read_text(encoding="utf-8")
    assert "warning" in proc.stderr
