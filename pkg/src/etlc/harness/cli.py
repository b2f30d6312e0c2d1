"""Command-line entry point: ``etlc run|check|sweep|explain``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from etlc.errors import InvalidScenario, MalformedTranscript, ParseError
from etlc.harness.claims import ALL_CHECKS, check_claims, transcript_paths
from etlc.harness.explain import explain, find_session
from etlc.harness.scenario import Transcript, bundled_scenarios, run_scenario
from etlc.harness.sweep import sweep

OUT_ENV = "ETLC_OUT_DIR"
EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_BAD_TRANSCRIPT = 0, 1, 2, 3


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "etlc-out"))


def _csv(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [x for x in (v.strip() for v in value.split(",")) if x]


def _checks(value: Optional[str]) -> List[str]:
    checks = _csv(value) or list(ALL_CHECKS)
    unknown = [c for c in checks if c not in ALL_CHECKS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown checks {unknown}")
    return checks


def _report(report) -> int:
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_run(args) -> int:
    out = Path(args.out) if args.out else default_out()
    t = run_scenario(args.scenario, seed=args.seed, defer_proof_check=args.defer_proof_check or None)
    path = t.write(out / f"{t.name}.jsonl")
    for s in t.final["sessions"]:
        print(f"{s['session_id']} {s['object_key']}@{s['version']} {s['state']}"
              + (f" ({s['reason']})" if s["reason"] else ""))
    print(f"transcript {path} sha256={t.content_hash}")
    if args.check:
        return _report(check_claims(t, args.checks))
    return EXIT_OK


def cmd_check(args) -> int:
    return _report(check_claims(args.paths or [str(default_out())], args.checks))


def cmd_sweep(args) -> int:
    out = Path(args.out) if args.out else default_out() / "corpus"
    corpus = sweep(args.scenario, notifiers=_csv(args.notifiers), receivers=_csv(args.receivers),
                   seed=args.seed, defer_proof_check=args.defer_proof_check or None, out=out, jobs=args.jobs)
    print(f"{len(corpus)} transcripts in {out} corpus_sha256={corpus.content_hash}")
    if args.check and len(corpus):
        return _report(check_claims(list(corpus.transcripts.values()), args.checks))
    return EXIT_OK


def cmd_explain(args) -> int:
    sources = [args.transcript] if args.transcript else [str(Path(args.out) if args.out else default_out())]
    for path in transcript_paths(sources):
        t = Transcript.load(path)
        if find_session(t, args.session_id) is not None:
            print("\n".join(explain(t, args.session_id)))
            return EXIT_OK
    print(f"session {args.session_id} not found in {', '.join(sources)}", file=sys.stderr)
    return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etlc", description="Trusted notification protocol simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./etlc-out)")
        if seed:
            p.add_argument("--seed", type=int, help="override the scenario seed")
            p.add_argument("--defer-proof-check", action="store_true",
                           help="verify the well-formedness proof at settlement instead of at generation")

    p = sub.add_parser("run", help="execute one scenario and write its transcript")
    p.add_argument("scenario", help=f"scenario file or bundled name ({', '.join(bundled_scenarios())})")
    common(p)
    p.add_argument("--check", action="store_true", help="also check the claims on the transcript")
    p.add_argument("--checks", type=_checks, default=list(ALL_CHECKS), help="comma-separated check names")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="evaluate claim properties over transcripts or corpus directories")
    p.add_argument("paths", nargs="*", help="transcript files or directories")
    p.add_argument("--checks", type=_checks, default=list(ALL_CHECKS), help="comma-separated check names")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="run the strategy product against a base scenario")
    p.add_argument("scenario", nargs="?", default="honest", help="base scenario (default: honest)")
    common(p)
    p.add_argument("--notifiers", help="comma-separated notifier strategies (default: all)")
    p.add_argument("--receivers", help="comma-separated receiver strategies (default: all)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--check", action="store_true", help="check the claims over the new corpus")
    p.add_argument("--checks", type=_checks, default=list(ALL_CHECKS), help="comma-separated check names")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("explain", help="narrate one session stage by stage")
    p.add_argument("session_id", help="session id or unique prefix")
    p.add_argument("--transcript", help="transcript file or directory to search")
    common(p, seed=False)
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, InvalidScenario) as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MalformedTranscript as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_BAD_TRANSCRIPT
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
