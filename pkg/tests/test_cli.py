import csv
import io
import json
import subprocess
import sys

import pytest

from longctx.cli import SUBCOMMANDS, main
from longctx.packing import CATEGORIES

from conftest import synthetic_corpus


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_extend_mropepp_csv(capsys):
    code, out, _ = run(capsys, "extend", "--method", "mropepp", "--head-dim", "128", "--base", "10000",
                       "--orig-len", "16384", "--target-len", "131072")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 64
    assert list(rows[0]) == ["d", "theta", "theta_prime", "lambda", "r", "segment"]
    temporal = [r for r in rows if r["segment"] == "temporal"]
    assert len(temporal) == 16 and all(r["theta"] == r["theta_prime"] for r in temporal)
    assert {r["segment"] for r in rows} == {"temporal", "height", "width"}


def test_plan_hybrid_json(capsys):
    code, out, _ = run(capsys, "plan-hybrid", "--frames", "1024", "--group-size", "4",
                       "--hi-res-tokens", "240", "--compression", "3")
    assert code == 0
    data = json.loads(out)
    assert data["total_tokens"] == 122880 and data["avg_tokens_per_frame"] == 120


def test_haystack_single_item(capsys):
    code, out, _ = run(capsys, "haystack", "--items", "1", "--trials", "10", "--seed", "0")
    assert code == 0
    rows = [line for line in out.splitlines() if not line.startswith("#")]
    assert rows == ["context_items,success_rate", "1,1"]
    assert out.splitlines()[-1] == "# effective_length@0.6=1"


def test_haystack_json(capsys):
    code, out, _ = run(capsys, "haystack", "--items", "1,4", "--trials", "5", "--method", "none",
                       "--format", "json")
    data = json.loads(out)
    assert [p["success_rate"] for p in data["points"]] == [1.0, 1.0]
    assert data["effective_length"] == 4


def test_tradeoff_and_basis(capsys):
    _, out, _ = run(capsys, "tradeoff")
    assert out.splitlines() == ["frames,tokens_per_frame", "128,960", "256,480", "512,240", "768,160", "1024,120"]
    _, out, _ = run(capsys, "analyze-basis", "--head-dim", "4")
    assert out.splitlines()[:3] == ["d,theta,lambda", "0,1,6.28318530718", "1,0.01,628.318530718"]


def test_positions(capsys):
    _, out, _ = run(capsys, "positions", "--span", "text:2", "--span", "image:1x2")
    got = [tuple(json.loads(l).values()) for l in out.splitlines()]
    assert got == [(0, 0, 0), (1, 1, 1), (2, 2, 2), (2, 2, 3)]


@pytest.fixture
def samples_file(tmp_path):
    path = tmp_path / "samples.jsonl"
    corpus = synthetic_corpus(per_category=60, seed=3, lo=200, hi=40000)
    path.write_text("".join(json.dumps(s.to_dict()) + "\n" for s in corpus))
    return path


def test_pack_and_serialize(capsys, samples_file, tmp_path):
    out_dir = tmp_path / "packs"
    code, out, _ = run(capsys, "pack", "--input", str(samples_file), "--target-len", "32768",
                       "--serialize-dir", str(out_dir))
    assert code == 0
    manifest = json.loads(out)
    assert all(p["total_len"] <= 32768 for p in manifest["packs"])
    assert len(list(out_dir.iterdir())) == len(manifest["packs"])
    n_ids = sum(len(p["sample_ids"]) for p in manifest["packs"]) + len(manifest["leftovers"])
    assert n_ids == 60 * len(CATEGORIES)


def test_pack_with_recipe_budget(capsys, samples_file, tmp_path):
    recipe = tmp_path / "recipe.json"
    recipe.write_text(json.dumps({"target_length": 65536, "long_ratio": 0.5}))
    code, out, _ = run(capsys, "pack", "--input", str(samples_file), "--recipe", str(recipe),
                       "--budget", "200000", "--seed", "3")
    assert code == 0
    data = json.loads(out)
    assert data["target_length"] == 65536
    assert data["selection"]["total_tokens"] <= 200000


def test_schedule(capsys, samples_file):
    code, out, _ = run(capsys, "schedule", "--input", str(samples_file))
    stages = json.loads(out)["stages"]
    assert [s["scale"] for s in stages] == [1, 4, 2, 2]
    for s in stages:
        assert all(p["total_len"] <= s["target_length"] for p in s["manifest"]["packs"])
    code, out, _ = run(capsys, "schedule", "--stages", "65536,131072", "--format", "csv")
    assert out.splitlines() == ["index,target_length,scale,packs,leftovers", "0,65536,1,,", "1,131072,2,,"]


def test_output_file(capsys, tmp_path):
    dest = tmp_path / "t.csv"
    assert main(["tradeoff", "--output", str(dest)]) == 0
    assert dest.read_text().startswith("frames,tokens_per_frame\n")


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["extend", "--head-dim", "odd"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["extend", "--head-dim", "7"])
    assert e.value.code == 2
    assert "head_dim" in capsys.readouterr().err


def test_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "pack", "--input", str(tmp_path / "missing.jsonl"))
    assert code == 1 and err


def test_env_seed(capsys, monkeypatch):
    args = ["haystack", "--items", "8,16", "--trials", "30", "--method", "extrapolation",
            "--tokens-per-item", "16", "--orig-len", "8", "--target-len", "64"]
    monkeypatch.setenv("LONGCTX_SEED", "5")
    _, from_env, _ = run(capsys, *args)
    monkeypatch.delenv("LONGCTX_SEED")
    _, explicit, _ = run(capsys, *args, "--seed", "5")
    assert from_env == explicit


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_every_subcommand_has_help(capsys, sub):
    with pytest.raises(SystemExit) as e:
        main([sub, "--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    assert "--seed" in text and "--format" in text


def test_byte_identical_across_processes():
    argv = [sys.executable, "-m", "longctx", "haystack", "--items", "4,16", "--trials", "20",
            "--tokens-per-item", "16", "--seed", "3"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and a
