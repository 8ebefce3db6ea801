import json
import subprocess
import sys

import pytest

from helpers import forge_kb
from oblivion import ForgottenSetEntry, KnowledgeBase, TargetKind, generate_questions, save_forgotten_set
from oblivion.cli import main


def run_cli(*argv):
    return main(list(argv))


def test_forget_creates_kb_and_prints_summary(tmp_path, capsys):
    kb_path = tmp_path / "kb.jsonl"
    code = run_cli("forget", "--kind", "concept", "--text", "Aurora Vale", "--kb", str(kb_path))
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"id": "aurora-vale", "kind": "concept", "entries": 5, "attempts_used": 1, "accepted": True}
    kb = KnowledgeBase.load(kb_path)
    assert [item.id for item in kb.unlearned] == ["aurora-vale"]


def test_forget_sample_and_custom_aspects(tmp_path, capsys):
    kb_path = tmp_path / "kb.jsonl"
    assert run_cli("forget", "--kind", "sample", "--text", "A sealed folio crossed the frontier.", "--kb", str(kb_path)) == 0
    assert json.loads(capsys.readouterr().out)["entries"] == 1
    assert run_cli("forget", "--kind", "concept", "--text", "Garnet Loom", "--kb", str(kb_path), "--aspects", "3") == 0
    assert json.loads(capsys.readouterr().out)["entries"] == 3


def test_forget_duplicate_exits_1(tmp_path, capsys):
    kb_path = tmp_path / "kb.jsonl"
    assert run_cli("forget", "--kind", "concept", "--text", "Aurora Vale", "--kb", str(kb_path)) == 0
    assert run_cli("forget", "--kind", "concept", "--text", "Aurora Vale", "--kb", str(kb_path)) == 1
    assert "DuplicateIdError" in capsys.readouterr().err


def test_kb_list_show_remove(tmp_path, capsys):
    kb_path = tmp_path / "kb.jsonl"
    kb, _ = forge_kb(concepts=["Aurora Vale"], samples=["A sealed folio crossed the frontier."])
    kb.save(kb_path)

    assert run_cli("kb", "list", "--kb", str(kb_path)) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["aurora-vale\tconcept\t5", "a-sealed-folio-crossed-the-frontier\tsample\t1"]

    assert run_cli("kb", "show", "--kb", str(kb_path), "--id", "aurora-vale") == 0
    record = json.loads(capsys.readouterr().out)
    assert record["kind"] == "unlearned"
    assert record["target_kind"] == "concept"

    assert run_cli("kb", "remove", "--kb", str(kb_path), "--id", "aurora-vale") == 0
    assert "removed aurora-vale" in capsys.readouterr().out
    assert [item.id for item in KnowledgeBase.load(kb_path).unlearned] == ["a-sealed-folio-crossed-the-frontier"]


def test_kb_show_unknown_id_exits_1(tmp_path, capsys):
    kb_path = tmp_path / "kb.jsonl"
    KnowledgeBase().save(kb_path)
    assert run_cli("kb", "show", "--kb", str(kb_path), "--id", "ghost") == 1
    assert "UnknownIdError" in capsys.readouterr().err


def test_kb_add_benign(tmp_path, capsys):
    kb_path = tmp_path / "kb.jsonl"
    assert run_cli("kb", "add-benign", "--kb", str(kb_path), "--id", "tea", "--text", "Tea steeps in minutes.") == 0
    assert "added tea" in capsys.readouterr().out
    assert KnowledgeBase.load(kb_path).benign[0].id == "tea"


def test_kb_list_missing_file_exits_1(tmp_path, capsys):
    assert run_cli("kb", "list", "--kb", str(tmp_path / "absent.jsonl")) == 1
    assert "InvalidItemError" in capsys.readouterr().err


def _write_eval_inputs(tmp_path):
    kb_path = tmp_path / "kb.jsonl"
    kb, _ = forge_kb(concepts=["Aurora Vale", "Thornfield Abbey"])
    kb.save(kb_path)
    set_path = tmp_path / "set.jsonl"
    entries = [
        ForgottenSetEntry(TargetKind.Concept, name, tuple(generate_questions(name, 2)))
        for name in ("Aurora Vale", "Thornfield Abbey")
    ]
    save_forgotten_set(set_path, entries)
    return kb_path, set_path


def test_eval_prints_table(tmp_path, capsys):
    kb_path, set_path = _write_eval_inputs(tmp_path)
    assert run_cli("eval", "--kb", str(kb_path), "--set", str(set_path), "--offline") == 0
    out = capsys.readouterr().out
    assert "hit_rate" in out and "1.0000" in out
    assert "usr" in out


def test_eval_with_attack_and_out_dir(tmp_path, capsys):
    kb_path, set_path = _write_eval_inputs(tmp_path)
    out_dir = tmp_path / "report"
    code = run_cli(
        "eval", "--kb", str(kb_path), "--set", str(set_path), "--attack", "injection", "--out", str(out_dir)
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "attack" in out and "injection" in out
    for name in ("report.json", "records.csv", "summary.txt", "metrics.png", "rouge_hist.png"):
        assert (out_dir / name).exists()
        assert f"wrote {out_dir / name}" in out


def test_eval_rephrase_flag(tmp_path, capsys):
    kb_path, set_path = _write_eval_inputs(tmp_path)
    assert run_cli("eval", "--kb", str(kb_path), "--set", str(set_path), "--rephrase") == 0
    rows = dict(line.split(None, 1) for line in capsys.readouterr().out.splitlines() if line.strip())
    assert rows["rephrased"] == "yes"
    assert rows["hit_rate"] == "1.0000"


def test_eval_missing_kb_exits_1(tmp_path, capsys):
    _, set_path = _write_eval_inputs(tmp_path)
    assert run_cli("eval", "--kb", str(tmp_path / "nope.jsonl"), "--set", str(set_path)) == 1
    assert "InvalidItemError" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as err:
        run_cli()
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        run_cli("eval")
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        run_cli("forget", "--kind", "novel-kind", "--text", "x")
    assert err.value.code == 2


def test_serve_wires_settings(tmp_path, monkeypatch):
    called = {}

    def fake_run_server(gateway, host, port):
        called["host"] = host
        called["port"] = port
        called["kb"] = gateway.kb_path

    monkeypatch.setattr("oblivion.cli.run_server", fake_run_server)
    kb_path = tmp_path / "kb.jsonl"
    assert run_cli("serve", "--kb", str(kb_path), "--host", "0.0.0.0", "--port", "9999") == 0
    assert called == {"host": "0.0.0.0", "port": 9999, "kb": kb_path}


def test_config_file_sets_forge_options(tmp_path, capsys):
    config = tmp_path / "oblivion.ini"
    config.write_text("[forge]\naspects = 2\n")
    kb_path = tmp_path / "kb.jsonl"
    assert run_cli("forget", "--kind", "concept", "--text", "Cedar Mirage", "--kb", str(kb_path), "--config", str(config)) == 0
    assert json.loads(capsys.readouterr().out)["entries"] == 2


def test_env_backend_rejected_without_api_base(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("OBLIVION_BACKEND", "wire")
    kb_path = tmp_path / "kb.jsonl"
    assert run_cli("forget", "--kind", "concept", "--text", "Opal Bastion", "--kb", str(kb_path)) == 1
    assert "BackendUnavailableError" in capsys.readouterr().err
    monkeypatch.setenv("OBLIVION_BACKEND", "mock")
    assert run_cli("forget", "--kind", "concept", "--text", "Opal Bastion", "--kb", str(kb_path)) == 0


def test_console_script_help():
    result = subprocess.run([sys.executable, "-m", "oblivion.cli", "--help"], capture_output=True, text=True)
    assert result.returncode == 0
    assert "forget" in result.stdout and "serve" in result.stdout and "eval" in result.stdout
