import json

import pytest

from mscr import cli
from mscr.config import load_config, plan_from_mapping
from mscr.errors import ConfigError
from mscr.presets import PRESETS

SMALL_YAML = """\
schema_version: 1
dataset: {source: synth, kind: diagonal_band, n: 200, noise: 0.02, seed: 4}
eps_units: eps_min
eps_train: [0, 1]
eps_test: [0, 1]
k_train: 2
k_test: 2
runs: 2
master_seed: 7
models:
  - {id: rf, kind: rf, trees: 5}
  - {id: nn, kind: knn, neighbors: 1}
kstudy: {k: [1, 3]}
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "plan.yaml"
    p.write_text(SMALL_YAML)
    return p


def test_load_config_maps_aliases(cfg_path):
    cfg = load_config(cfg_path)
    assert [m.kind for m in cfg.plan.models] == ["random_forest", "knn"]
    assert cfg.plan.models[0].rf_trees == 5
    assert cfg.plan.eps_units == "eps_min" and cfg.plan.runs == 2
    assert cfg.kstudy.k == (1, 3)
    assert len(cfg.config_hash) == 16


def test_seed_override_changes_only_master_seed(cfg_path):
    a = load_config(cfg_path).plan
    b = load_config(cfg_path, seed=99).plan
    assert b.master_seed == 99
    assert a.to_json() | {"master_seed": 99} == b.to_json()


def test_preset_merges_dataset_keys():
    plan, _ = plan_from_mapping({"preset": "synth-2d", "dataset": {"n": 500}, "runs": 3})
    base = PRESETS["synth-2d"]()
    assert plan.data.n == 500 and plan.data.kind == base.data.kind
    assert plan.runs == 3 and plan.models == base.models


@pytest.mark.parametrize("doc", [
    {"bogus": 1},
    {"schema_version": 2},
    {"preset": "nope"},
    {"dataset": {"source": "synth", "colour": "red"}},
    {"models": [{"kind": "knn", "wings": 2}]},
    {"models": ["knn"]},
    [1, 2],
])
def test_bad_configs_raise_config_error(doc):
    with pytest.raises(ConfigError):
        plan_from_mapping(doc)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_every_preset_builds():
    for name, make in PRESETS.items():
        plan = make()
        assert plan.runs >= 1 and plan.models, name


# --- CLI ---------------------------------------------------------------------

def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_separation_prints_json(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "separation", "--synth", "blobs", "--n", "50", "--noise", "0",
                           "--out", tmp_path)
    assert code == 0
    doc = json.loads(out)
    assert doc["epsilon_min"] == doc["two_r"] / 2
    assert json.loads((tmp_path / "separation.json").read_text()) == doc


def test_global_flags_work_before_and_after_subcommand(capsys, tmp_path):
    before = run_cli(capsys, "--threads", "2", "separation", "--synth", "blobs", "--n", "40")
    after = run_cli(capsys, "separation", "--synth", "blobs", "--n", "40", "--threads", "2")
    assert before[0] == after[0] == 0
    strip = lambda text: {k: v for k, v in json.loads(text).items() if k != "wall_time_ms"}  # noqa: E731
    assert strip(before[1]) == strip(after[1])
    parser = cli.build_parser()
    for argv in (["--threads", "3", "--seed", "4", "run"], ["run", "--threads", "3", "--seed", "4"]):
        args = parser.parse_args(argv)
        assert (args.threads, args.seed) == (3, 4)


def test_augment_writes_export(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "augment", "--synth", "blobs", "--n", "20", "--k", "3",
                           "--seed", "5", "--out", tmp_path)
    assert code == 0
    info = json.loads(out)
    assert info["rows"] == 20 * 4 and info["parents"] == 20
    assert (tmp_path / "augmented.csv").read_text().count("\n") == 1 + 80


def test_run_report_and_kstudy_end_to_end(capsys, tmp_path, cfg_path):
    out = tmp_path / "out"
    code, table, _ = run_cli(capsys, "--config", cfg_path, "run", "--out", out)
    assert code == 0 and "| MSCR" in table
    first = (out / "matrix.csv").read_bytes()
    code, doc, _ = run_cli(capsys, "report", "--from", out, "--out", tmp_path / "again")
    assert code == 0 and "matrix.csv" in json.loads(doc)["files"]
    assert (tmp_path / "again" / "matrix.csv").read_bytes() == first
    code, doc, _ = run_cli(capsys, "kstudy", "--config", cfg_path, "--out", out, "--k", "1,2")
    assert code == 0 and set(json.loads(doc)["k"]) == {"1", "2"}
    assert (out / "kstudy.svg").is_file()


def test_score_subcommand(capsys, tmp_path):
    run_cli(capsys, "augment", "--synth", "blobs", "--n", "10", "--k", "2", "--epsilon", "0.01",
            "--out", tmp_path)
    rows = (tmp_path / "augmented.csv").read_text().splitlines()
    header = rows[0].split(",")
    ip, io_, il = header.index("parent_index"), header.index("sample_ordinal"), header.index("label")
    pred = ["parent_index,sample_ordinal,predicted_label"]
    for line in rows[1:]:
        f = line.split(",")
        pred.append(f"{f[ip]},{f[io_]},{f[il]}")
    (tmp_path / "pred.csv").write_text("\n".join(pred) + "\n")
    code, out, _ = run_cli(capsys, "score", "--export", tmp_path / "augmented.csv",
                           "--predictions", tmp_path / "pred.csv", "--eps-min", "0.01")
    assert code == 0 and json.loads(out)["mscr"] == 0.0


@pytest.mark.parametrize("argv", [
    ["run", "--config", "/nonexistent/plan.yaml"],
    ["run"],
    ["separation"],
    ["separation", "--synth", "spirals"],
    ["separation", "--csv", "/nonexistent.csv"],
    ["report", "--from", "/nonexistent"],
])
def test_invalid_input_exits_2(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_runtime_failure_exits_3(capsys, monkeypatch):
    def boom(*a, **kw):
        raise MemoryError("out of memory")

    monkeypatch.setattr(cli, "min_class_separation", boom)
    code, _, err = run_cli(capsys, "separation", "--synth", "blobs", "--n", "20")
    assert code == 3 and "runtime" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["--threads", "0", "separation", "--synth", "blobs"])
    assert info.value.code == 2
