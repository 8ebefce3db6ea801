import json

import pytest

from oblivion import (
    BenignItem,
    ConstraintComponent,
    DuplicateIdError,
    InvalidItemError,
    KnowledgeBase,
    KnowledgeBaseParseError,
    RetrievalComponent,
    Target,
    TargetKind,
    UnknownIdError,
    UnlearnedKnowledgeItem,
)


def make_item(name="Harry Potter", kind=TargetKind.Concept, items=("fact one", "fact two")):
    return UnlearnedKnowledgeItem(
        target=Target.from_text(kind, name),
        constraint=ConstraintComponent(text="Never discuss the target.", word_limit=100, attempts_used=1, accepted=True),
        retrieval=RetrievalComponent(items=tuple(items), word_limit=80),
    )


def test_target_from_text_derives_slug_id():
    target = Target.from_text(TargetKind.Concept, "Harry Potter")
    assert target.id == "harry-potter"
    assert target.kind is TargetKind.Concept


def test_component_validation():
    with pytest.raises(InvalidItemError):
        Target(id="", kind=TargetKind.Concept, text="x")
    with pytest.raises(InvalidItemError):
        Target(id="x", kind=TargetKind.Concept, text="   ")
    with pytest.raises(InvalidItemError):
        ConstraintComponent(text=" ", word_limit=100, attempts_used=1, accepted=True)
    with pytest.raises(InvalidItemError):
        ConstraintComponent(text="x", word_limit=0, attempts_used=1, accepted=True)
    with pytest.raises(InvalidItemError):
        ConstraintComponent(text="x", word_limit=10, attempts_used=0, accepted=True)
    with pytest.raises(InvalidItemError):
        RetrievalComponent(items=(), word_limit=80)
    with pytest.raises(InvalidItemError):
        RetrievalComponent(items=("ok", "  "), word_limit=80)


def test_entries_append_constraint_on_new_line():
    item = make_item()
    assert item.entries == (
        "fact one\nCONSTRAINT: Never discuss the target.",
        "fact two\nCONSTRAINT: Never discuss the target.",
    )
    assert item.id == "harry-potter"


def test_add_and_remove_bump_revision():
    kb = KnowledgeBase()
    assert kb.revision == 0
    kb.add_benign(BenignItem(id="b1", text="benign fact"))
    assert kb.revision == 1
    kb.add_unlearned(make_item())
    assert kb.revision == 2
    kb.remove("b1")
    assert kb.revision == 3
    kb.remove("harry-potter")
    assert kb.revision == 4
    assert kb.ids() == set()


def test_duplicate_ids_rejected_across_kinds():
    kb = KnowledgeBase()
    kb.add_unlearned(make_item())
    with pytest.raises(DuplicateIdError):
        kb.add_unlearned(make_item())
    with pytest.raises(DuplicateIdError):
        kb.add_benign(BenignItem(id="harry-potter", text="x"))


def test_remove_unknown_id():
    kb = KnowledgeBase()
    with pytest.raises(UnknownIdError):
        kb.remove("ghost")
    with pytest.raises(UnknownIdError):
        kb.get_unlearned("ghost")


def test_save_load_round_trip(tmp_path):
    kb = KnowledgeBase()
    kb.add_benign(BenignItem(id="b1", text="A benign fact about tea."))
    kb.add_unlearned(make_item("Harry Potter"))
    kb.add_unlearned(
        make_item("The annals of Karst record a crossing.", kind=TargetKind.Sample, items=("The annals of Karst record a crossing.",))
    )
    path = tmp_path / "kb.jsonl"
    kb.save(path)

    loaded = KnowledgeBase.load(path)
    assert loaded == kb
    assert loaded.revision == kb.revision
    assert loaded.unlearned[0].entries == kb.unlearned[0].entries


def test_save_writes_meta_first_and_one_record_per_line(tmp_path):
    kb = KnowledgeBase()
    kb.add_unlearned(make_item())
    path = tmp_path / "kb.jsonl"
    kb.save(path)
    lines = path.read_text().splitlines()
    meta = json.loads(lines[0])
    assert meta == {"kind": "meta", "format_version": 1, "revision": 1}
    record = json.loads(lines[1])
    assert record["kind"] == "unlearned"
    assert record["id"] == "harry-potter"
    assert record["constraint"]["accepted"] is True
    assert record["entries"] == list(kb.unlearned[0].entries)


def test_load_reports_line_number_for_bad_json(tmp_path):
    path = tmp_path / "kb.jsonl"
    path.write_text('{"kind":"meta","format_version":1,"revision":0}\nnot json\n')
    with pytest.raises(KnowledgeBaseParseError) as err:
        KnowledgeBase.load(path)
    assert err.value.line == 2


def test_load_rejects_unknown_kind_and_version(tmp_path):
    path = tmp_path / "kb.jsonl"
    path.write_text('{"kind":"mystery"}\n')
    with pytest.raises(KnowledgeBaseParseError):
        KnowledgeBase.load(path)
    path.write_text('{"kind":"meta","format_version":99,"revision":0}\n')
    with pytest.raises(KnowledgeBaseParseError):
        KnowledgeBase.load(path)


def test_load_rejects_duplicate_ids(tmp_path):
    kb = KnowledgeBase()
    kb.add_benign(BenignItem(id="b1", text="x"))
    path = tmp_path / "kb.jsonl"
    kb.save(path)
    line = json.dumps({"kind": "benign", "id": "b1", "text": "y"})
    path.write_text(path.read_text() + line + "\n")
    with pytest.raises(KnowledgeBaseParseError) as err:
        KnowledgeBase.load(path)
    assert "duplicate" in str(err.value)


def test_load_rejects_tampered_entries(tmp_path):
    kb = KnowledgeBase()
    kb.add_unlearned(make_item())
    path = tmp_path / "kb.jsonl"
    kb.save(path)
    lines = path.read_text().splitlines()
    record = json.loads(lines[1])
    record["entries"][0] = "tampered entry"
    path.write_text(lines[0] + "\n" + json.dumps(record) + "\n")
    with pytest.raises(KnowledgeBaseParseError) as err:
        KnowledgeBase.load(path)
    assert "entries" in str(err.value)


def test_load_skips_blank_lines(tmp_path):
    kb = KnowledgeBase()
    kb.add_unlearned(make_item())
    path = tmp_path / "kb.jsonl"
    kb.save(path)
    path.write_text(path.read_text() + "\n\n")
    assert KnowledgeBase.load(path) == kb
