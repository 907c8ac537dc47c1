"""Training backends: a deterministic desk-scale mock and a subprocess adapter."""

from __future__ import annotations

import hashlib
import json
import math
import re
import subprocess
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from slmadapt.data_core import QAPair, nfc
from slmadapt.errors import BackendError, ValidationError
from slmadapt.metrics.tokenize import hindi_words
from slmadapt.trainer.config import TrainerConfig


class UnknownArtifact(ValidationError, LookupError):
    pass


@dataclass(frozen=True)
class ModelArtifact:
    artifact_id: str
    parent_id: str | None
    plan_id: str
    stage_index: int
    metrics_log: tuple[tuple[int, float], ...]
    digest: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "artifact_id": self.artifact_id,
            "parent_id": self.parent_id,
            "plan_id": self.plan_id,
            "stage_index": self.stage_index,
            "digest": self.digest,
            "metrics_log": [list(x) for x in self.metrics_log],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelArtifact:
        return cls(
            artifact_id=data["artifact_id"],
            parent_id=data.get("parent_id"),
            plan_id=data["plan_id"],
            stage_index=int(data["stage_index"]),
            metrics_log=tuple((int(s), float(v)) for s, v in data.get("metrics_log", [])),
            digest=data["digest"],
        )


@dataclass(frozen=True)
class StageJob:
    plan_id: str
    stage_index: int
    examples: Sequence[tuple[str, QAPair]]
    epochs: int
    steps_per_epoch: int
    config: TrainerConfig
    seed: int
    parent: ModelArtifact | None = None

    @property
    def total_steps(self) -> int:
        return self.epochs * self.steps_per_epoch

    def data_digest(self) -> str:
        h = hashlib.sha256()
        for context, pair in self.examples:
            h.update(json.dumps([context, pair.question, pair.answer], ensure_ascii=False).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


class TrainingBackend(Protocol):
    name: str

    def train(self, job: StageJob) -> ModelArtifact: ...

    def load_artifact(self, artifact_id: str) -> ModelArtifact: ...

    def predict(self, artifact_id: str, inputs: Sequence[tuple[str, str]]) -> list[str]: ...


def _canonical(obj: Any) -> bytes:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _norm(text: str) -> str:
    return " ".join(nfc(text).split())


def memory_key(context: str, question: str) -> str:
    return hashlib.sha256(f"{_norm(context)}\x1f{_norm(question)}".encode("utf-8")).hexdigest()


_SENTENCE_END = re.compile(r"(?<=[।?!.])\s+")


class MockTrainingBackend:
    """Desk-scale stand-in for a finetuning stack.

    The "weights" are a JSON blob holding a lookup table of every trained
    (context, question) -> answer plus an answer-token frequency table, both
    inherited from the parent artifact. Prediction answers memorized
    questions verbatim and otherwise extracts the context sentence that best
    matches the question. Every output is a pure function of the job.
    """

    name = "mock"

    def __init__(self, store_dir: str | Path | None = None):
        self.store_dir = None if store_dir is None else Path(store_dir)
        self._blobs: dict[str, dict[str, Any]] = {}
        self._artifacts: dict[str, ModelArtifact] = {}

    # -- storage
    def _save(self, artifact: ModelArtifact, blob: dict[str, Any]) -> None:
        self._blobs[artifact.artifact_id] = blob
        self._artifacts[artifact.artifact_id] = artifact
        if self.store_dir is not None:
            self.store_dir.mkdir(parents=True, exist_ok=True)
            doc = {"artifact": artifact.to_dict(), "weights": blob}
            (self.store_dir / f"{artifact.artifact_id}.json").write_text(
                json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8"
            )

    def _load(self, artifact_id: str) -> tuple[ModelArtifact, dict[str, Any]]:
        if artifact_id not in self._blobs and self.store_dir is not None:
            path = self.store_dir / f"{artifact_id}.json"
            if path.is_file():
                doc = json.loads(path.read_text(encoding="utf-8"))
                self._artifacts[artifact_id] = ModelArtifact.from_dict(doc["artifact"])
                self._blobs[artifact_id] = doc["weights"]
        if artifact_id not in self._blobs:
            raise UnknownArtifact(f"unknown artifact {artifact_id!r} for backend {self.name!r}")
        return self._artifacts[artifact_id], self._blobs[artifact_id]

    def load_artifact(self, artifact_id: str) -> ModelArtifact:
        return self._load(artifact_id)[0]

    # -- training
    def train(self, job: StageJob) -> ModelArtifact:
        memory: dict[str, str] = {}
        by_question: dict[str, str] = {}
        freq: Counter = Counter()
        parent_digest = None
        if job.parent is not None:
            _, parent_blob = self._load(job.parent.artifact_id)
            memory.update(parent_blob["memory"])
            by_question.update(parent_blob["by_question"])
            freq.update(parent_blob["token_freq"])
            parent_digest = job.parent.digest
        for context, pair in job.examples:
            memory[memory_key(context, pair.question)] = pair.answer
            by_question[_norm(pair.question)] = pair.answer
            freq.update(hindi_words(pair.answer))
        data_digest = job.data_digest()
        blob = {
            "base_model": job.config.model_id,
            "parent_digest": parent_digest,
            "data_digest": data_digest,
            "epochs": job.epochs,
            "seed": job.seed,
            "config": job.config.to_dict(),
            "memory": dict(sorted(memory.items())),
            "by_question": dict(sorted(by_question.items())),
            "token_freq": dict(sorted(freq.items())),
        }
        digest = hashlib.sha256(_canonical(blob)).hexdigest()
        artifact = ModelArtifact(
            artifact_id=f"mock-{digest[:16]}",
            parent_id=None if job.parent is None else job.parent.artifact_id,
            plan_id=job.plan_id,
            stage_index=job.stage_index,
            metrics_log=self._loss_curve(job, digest, parent=job.parent),
            digest=digest,
        )
        self._save(artifact, blob)
        return artifact

    @staticmethod
    def _loss_curve(job: StageJob, digest: str, parent: ModelArtifact | None) -> tuple[tuple[int, float], ...]:
        start = parent.metrics_log[-1][1] if parent is not None and parent.metrics_log else 2.5
        floor = 0.2 + (int(digest[:4], 16) / 0xFFFF) * 0.1
        start = max(start, floor)
        rate = 3.0 + (int(digest[4:8], 16) / 0xFFFF)
        total = max(1, job.total_steps)
        return tuple(
            (step, round(floor + (start - floor) * math.exp(-rate * step / total), 6))
            for step in range(1, job.total_steps + 1)
        )

    # -- inference
    def predict(self, artifact_id: str, inputs: Sequence[tuple[str, str]]) -> list[str]:
        _, blob = self._load(artifact_id)
        memory, by_question, freq = blob["memory"], blob["by_question"], blob["token_freq"]
        out = []
        for context, question in inputs:
            answer = memory.get(memory_key(context, question)) or by_question.get(_norm(question))
            out.append(answer if answer is not None else self._extract(context, question, freq))
        return out

    @staticmethod
    def _extract(context: str, question: str, freq: dict[str, int]) -> str:
        sentences = [s.strip() for s in _SENTENCE_END.split(nfc(context)) if s.strip()] or [context.strip()]
        q_tokens = set(hindi_words(question))

        def score(sentence: str) -> tuple[int, float]:
            tokens = hindi_words(sentence)
            return len(q_tokens.intersection(tokens)), sum(freq.get(t, 0) for t in tokens) / (1 + len(tokens))

        best = max(range(len(sentences)), key=lambda i: (score(sentences[i]), -i))
        return sentences[best]


@dataclass
class AdapterTrainingBackend:
    """Drive an external finetuning stack through a JSON-over-stdio command.

    Train job on stdin::

        {"task": "train", "plan_id", "stage_index", "epochs", "steps_per_epoch",
         "seed", "config": {...}, "parent_artifact_id": str | null,
         "reuse_optimizer_state": bool, "restart_schedule": bool,
         "examples": [{"pair_id", "context", "question", "answer"}, ...]}

    expects ``{"weights_digest": str, "loss_log": [[step, loss], ...]}`` on
    stdout. Predict jobs send ``{"task": "predict", "artifact_id", "inputs":
    [{"context", "question"}]}`` and expect ``{"predictions": [str, ...]}``.
    """

    command: Sequence[str]
    name: str = "adapter"
    timeout: float | None = None
    _artifacts: dict[str, ModelArtifact] = field(default_factory=dict, repr=False)

    def _call(self, job: dict[str, Any]) -> dict[str, Any]:
        try:
            proc = subprocess.run(
                list(self.command),
                input=json.dumps(job, ensure_ascii=False),
                capture_output=True,
                text=True,
                encoding="utf-8",
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise BackendError(f"{self.name}: adapter command timed out") from exc
        except OSError as exc:
            raise BackendError(f"{self.name}: cannot start adapter command: {exc}") from exc
        if proc.returncode != 0:
            raise BackendError(f"{self.name}: adapter exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
        try:
            return json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            raise BackendError(f"{self.name}: adapter output is not JSON") from exc

    def train(self, job: StageJob) -> ModelArtifact:
        reply = self._call(
            {
                "task": "train",
                "plan_id": job.plan_id,
                "stage_index": job.stage_index,
                "epochs": job.epochs,
                "steps_per_epoch": job.steps_per_epoch,
                "seed": job.seed,
                "config": job.config.to_dict(),
                "parent_artifact_id": None if job.parent is None else job.parent.artifact_id,
                "reuse_optimizer_state": job.config.reuse_optimizer_state,
                "restart_schedule": job.config.restart_schedule,
                "examples": [
                    {"pair_id": p.pair_id, "context": c, "question": p.question, "answer": p.answer}
                    for c, p in job.examples
                ],
            }
        )
        try:
            digest = str(reply["weights_digest"])
            log = tuple((int(s), float(v)) for s, v in reply.get("loss_log", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"{self.name}: malformed train reply: {exc}") from exc
        artifact = ModelArtifact(
            artifact_id=f"{self.name}-{digest[:16]}",
            parent_id=None if job.parent is None else job.parent.artifact_id,
            plan_id=job.plan_id,
            stage_index=job.stage_index,
            metrics_log=log,
            digest=digest,
        )
        self._artifacts[artifact.artifact_id] = artifact
        return artifact

    def load_artifact(self, artifact_id: str) -> ModelArtifact:
        try:
            return self._artifacts[artifact_id]
        except KeyError:
            raise UnknownArtifact(f"unknown artifact {artifact_id!r} for backend {self.name!r}") from None

    def predict(self, artifact_id: str, inputs: Sequence[tuple[str, str]]) -> list[str]:
        artifact = self.load_artifact(artifact_id)
        reply = self._call(
            {
                "task": "predict",
                "artifact_id": artifact.artifact_id,
                "weights_digest": artifact.digest,
                "inputs": [{"context": c, "question": q} for c, q in inputs],
            }
        )
        preds = reply.get("predictions")
        if not isinstance(preds, list) or len(preds) != len(inputs) or not all(isinstance(p, str) for p in preds):
            raise BackendError(f"{self.name}: expected {len(inputs)} string predictions")
        return preds
