"""Cartesian-product sweeps of strategies over a base scenario."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from etlc.actors import NOTIFIER_STRATEGIES, RECEIVER_STRATEGIES
from etlc.harness.scenario import Scenario, Transcript, load_scenario, run_scenario


@dataclass
class Corpus:
    transcripts: Dict[str, Transcript] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.transcripts)

    @property
    def content_hash(self) -> str:
        lines = "".join(f"{name} {t.content_hash}\n" for name, t in sorted(self.transcripts.items()))
        return hashlib.sha256(lines.encode()).hexdigest()

    def write(self, directory: Union[str, os.PathLike]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, t in self.transcripts.items():
            t.write(directory / f"{name}.jsonl")
        index = {"schema": "etlc-corpus/1", "corpus_hash": self.content_hash,
                 "transcripts": {n: t.content_hash for n, t in sorted(self.transcripts.items())}}
        (directory / "corpus.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
        return directory


def _run(data: dict) -> str:
    return run_scenario(Scenario(data)).to_jsonl()


def sweep(
    base: Union[str, os.PathLike, dict, Scenario] = "honest",
    notifiers: Optional[Sequence[str]] = None,
    receivers: Optional[Sequence[str]] = None,
    seed: Optional[int] = None,
    defer_proof_check: Optional[bool] = None,
    out: Optional[Union[str, os.PathLike]] = None,
    jobs: int = 1,
) -> Corpus:
    """Run every (notifier, receiver) strategy pair against ``base``.

    ``None`` means the whole catalog for that role; an empty list yields an
    empty corpus.
    """
    scenario = base if isinstance(base, Scenario) else load_scenario(base)
    scenario = scenario.with_changes(seed=seed, defer_proof_check=defer_proof_check)
    notifiers = list(NOTIFIER_STRATEGIES) if notifiers is None else list(notifiers)
    receivers = list(RECEIVER_STRATEGIES) if receivers is None else list(receivers)
    runs: List[Scenario] = [scenario.with_strategies(n, r) for n in notifiers for r in receivers]
    if jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            texts = list(pool.map(_run, [s.data for s in runs]))
        transcripts = [Transcript.from_jsonl(text) for text in texts]
    else:
        transcripts = [run_scenario(s) for s in runs]
    corpus = Corpus({s.name: t for s, t in zip(runs, transcripts)})
    if out is not None:
        corpus.write(out)
    return corpus
