"""Command-line interface.

Subcommands: ``forget`` crafts unlearned knowledge for a target and
stores it, ``serve`` exposes the gateway over HTTP, ``eval`` runs the
verification loop over a forgotten set, and ``kb`` inspects or edits
the knowledge base. Exit codes: 0 on success, 1 on any operational
error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import Settings, build_service, load_settings
from .errors import InvalidItemError, OblivionError
from .evalkit import AttackKind, JudgeTemplate, evaluate, load_forgotten_set
from .gateway import UnlearningGateway, run_server
from .kb import BenignItem, KnowledgeBase, TargetKind, benign_record, unlearned_record

log = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to an INI config file")
    parser.add_argument("--kb", help="path to the knowledge-base JSONL file")
    parser.add_argument("--backend", choices=["mock", "wire"], help="chat backend kind")
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oblivion", description="RAG-based unlearning gateway for black-box chat models")
    sub = parser.add_subparsers(dest="command", required=True)

    forget = sub.add_parser("forget", help="forge unlearned knowledge for a target and store it")
    _add_common(forget)
    forget.add_argument("--kind", choices=[k.value for k in TargetKind], required=True)
    forget.add_argument("--text", required=True, help="the sample text or concept name to forget")
    forget.add_argument("--aspects", type=int, help="aspect count for concept targets")
    forget.add_argument("--constraint-words", type=int, dest="constraint_words", help="constraint word limit")
    forget.add_argument("--aspect-words", type=int, dest="aspect_words", help="aspect word limit")
    forget.add_argument("--attempts", type=int, help="constraint retry budget")
    forget.set_defaults(handler=cmd_forget)

    serve = sub.add_parser("serve", help="serve the gateway over HTTP")
    _add_common(serve)
    serve.add_argument("--host", help="bind address")
    serve.add_argument("--port", type=int, help="bind port")
    serve.set_defaults(handler=cmd_serve)

    evalp = sub.add_parser("eval", help="run forgetting verification over a forgotten set")
    _add_common(evalp)
    evalp.add_argument("--set", dest="set_path", required=True, help="forgotten-set JSONL file")
    evalp.add_argument("--attack", choices=[a.value for a in AttackKind], help="wrap prompts in an attack")
    evalp.add_argument("--rephrase", action="store_true", help="rephrase prompts before sending")
    mode = evalp.add_mutually_exclusive_group()
    mode.add_argument("--offline", action="store_true", help="force the mock backend")
    mode.add_argument("--wire", action="store_true", help="force the wire backend")
    evalp.add_argument("--judge-template", choices=[t.value for t in JudgeTemplate], default=JudgeTemplate.Instruction.value)
    evalp.add_argument("--out", help="directory for report files and figures")
    evalp.add_argument("--workers", type=int, default=8)
    evalp.set_defaults(handler=cmd_eval)

    kb = sub.add_parser("kb", help="inspect or edit the knowledge base")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)

    kb_list = kb_sub.add_parser("list", help="list item ids")
    _add_common(kb_list)
    kb_list.set_defaults(handler=cmd_kb_list)

    kb_show = kb_sub.add_parser("show", help="print one item as JSON")
    _add_common(kb_show)
    kb_show.add_argument("--id", required=True)
    kb_show.set_defaults(handler=cmd_kb_show)

    kb_remove = kb_sub.add_parser("remove", help="remove one item")
    _add_common(kb_remove)
    kb_remove.add_argument("--id", required=True)
    kb_remove.set_defaults(handler=cmd_kb_remove)

    kb_add = kb_sub.add_parser("add-benign", help="add a benign knowledge item")
    _add_common(kb_add)
    kb_add.add_argument("--id", required=True)
    kb_add.add_argument("--text", required=True)
    kb_add.set_defaults(handler=cmd_kb_add_benign)

    return parser


def _settings(args: argparse.Namespace, extra: dict | None = None) -> Settings:
    overrides: dict[str, object] = {"backend": args.backend, "kb_path": args.kb}
    overrides.update(extra or {})
    return load_settings(config_path=args.config, overrides=overrides)


def _load_kb(path: str, must_exist: bool = False) -> KnowledgeBase:
    kb_path = Path(path)
    if kb_path.exists():
        return KnowledgeBase.load(kb_path)
    if must_exist:
        raise InvalidItemError(f"knowledge base not found: {kb_path}")
    return KnowledgeBase()


def cmd_forget(args: argparse.Namespace) -> int:
    settings = _settings(
        args,
        {
            "aspects": args.aspects,
            "constraint_word_limit": args.constraint_words,
            "aspect_word_limit": args.aspect_words,
            "max_attempts": args.attempts,
        },
    )
    kb = _load_kb(settings.kb_path)
    gateway = UnlearningGateway(
        kb,
        build_service(settings),
        retrieval_config=settings.retrieval,
        forge_config=settings.forge,
        kb_path=settings.kb_path,
    )
    item = gateway.forget(TargetKind(args.kind), args.text)
    print(
        json.dumps(
            {
                "id": item.id,
                "kind": item.target.kind.value,
                "entries": len(item.entries),
                "attempts_used": item.constraint.attempts_used,
                "accepted": item.constraint.accepted,
            }
        )
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    settings = _settings(args, {"host": args.host, "port": args.port})
    kb = _load_kb(settings.kb_path)
    gateway = UnlearningGateway(
        kb,
        build_service(settings),
        retrieval_config=settings.retrieval,
        forge_config=settings.forge,
        kb_path=settings.kb_path,
    )
    log.info("serving on %s:%d with %d unlearned targets", settings.host, settings.port, len(kb.unlearned))
    run_server(gateway, settings.host, settings.port)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    extra: dict[str, object] = {}
    if args.offline:
        extra["backend"] = "mock"
    if args.wire:
        extra["backend"] = "wire"
    settings = _settings(args, extra)
    kb = _load_kb(settings.kb_path, must_exist=True)
    gateway = UnlearningGateway(kb, build_service(settings), retrieval_config=settings.retrieval)
    entries = load_forgotten_set(args.set_path)
    report = evaluate(
        gateway,
        entries,
        attack=AttackKind(args.attack) if args.attack else None,
        rephrase=args.rephrase,
        judge_template=JudgeTemplate(args.judge_template),
        workers=args.workers,
    )
    print(report.to_text_table())
    if args.out:
        from .report import write_report

        for path in write_report(report, args.out):
            print(f"wrote {path}")
    return 0


def cmd_kb_list(args: argparse.Namespace) -> int:
    settings = _settings(args)
    kb = _load_kb(settings.kb_path, must_exist=True)
    for benign in kb.benign:
        print(f"{benign.id}\tbenign\t1")
    for item in kb.unlearned:
        print(f"{item.id}\t{item.target.kind.value}\t{len(item.entries)}")
    return 0


def cmd_kb_show(args: argparse.Namespace) -> int:
    settings = _settings(args)
    kb = _load_kb(settings.kb_path, must_exist=True)
    for benign in kb.benign:
        if benign.id == args.id:
            print(json.dumps(benign_record(benign), indent=2))
            return 0
    print(json.dumps(unlearned_record(kb.get_unlearned(args.id)), indent=2))
    return 0


def cmd_kb_remove(args: argparse.Namespace) -> int:
    settings = _settings(args)
    kb = _load_kb(settings.kb_path, must_exist=True)
    kb.remove(args.id)
    kb.save(settings.kb_path)
    print(f"removed {args.id}")
    return 0


def cmd_kb_add_benign(args: argparse.Namespace) -> int:
    settings = _settings(args)
    kb = _load_kb(settings.kb_path)
    kb.add_benign(BenignItem(id=args.id, text=args.text))
    kb.save(settings.kb_path)
    print(f"added {args.id}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (OblivionError, TimeoutError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
