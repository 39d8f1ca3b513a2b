"""Campaign state machine: phase gating, session assembly, the vote ledger.

Every mutation flows through a command method that emits event records and
then applies them; replaying the emitted events onto a fresh instance
reconstructs the exact same state. Commands draw randomness from a
generator derived from (campaign seed, event count), so identical command
sequences reproduce identical sessions, and state restored from a ledger
continues the same stream.

Writers must be serialized by the caller (the service wraps commands in a
single lock); reads are safe against a quiescent snapshot.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .clips import Clip, ClipRole
from .errors import (
    ConfigurationError,
    ConflictError,
    ExcludedWorkerError,
    IncompleteSubmissionError,
    InvalidArgumentError,
    NoWorkError,
    NotFoundError,
)
from .eventlog import EventRecord
from .localization import StringCatalog, validate_catalog

MIN_RATINGS_PER_CLIP = 8  # P.808 floor


class Phase(str, Enum):
    QUALIFICATION = "qualification"
    SETUP = "setup"
    TRAINING = "training"
    RATING = "rating"


class SessionStatus(str, Enum):
    OPEN = "open"
    SUBMITTED = "submitted"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class VoteStatus(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


@dataclass
class CampaignConfig:
    language: str
    ratings_per_clip: int = 8
    block_size: int = 10
    training_interval: int = 5
    setup_interval: int = 5
    gold_per_session: int = 1
    trapping_per_session: int = 1
    rejection_threshold: float = 0.5
    rejection_min_sessions: int = 3
    seed: int = 0

    def __post_init__(self):
        if not self.language:
            raise ConfigurationError("campaign language must be set")
        if self.ratings_per_clip < MIN_RATINGS_PER_CLIP:
            raise ConfigurationError(
                f"ratings_per_clip must be at least {MIN_RATINGS_PER_CLIP}, "
                f"got {self.ratings_per_clip}"
            )
        if self.block_size < 1:
            raise ConfigurationError("block_size must be at least 1")
        if self.training_interval < 1 or self.setup_interval < 1:
            raise ConfigurationError("phase intervals must be at least 1")
        if self.gold_per_session < 1 or self.trapping_per_session < 1:
            raise ConfigurationError("each session needs at least one gold and one trap")
        if not (0.0 < self.rejection_threshold <= 1.0):
            raise ConfigurationError("rejection_threshold must be in (0, 1]")
        if self.rejection_min_sessions < 1:
            raise ConfigurationError("rejection_min_sessions must be at least 1")

    def to_dict(self) -> dict:
        return {
            "language": self.language,
            "ratings_per_clip": self.ratings_per_clip,
            "block_size": self.block_size,
            "training_interval": self.training_interval,
            "setup_interval": self.setup_interval,
            "gold_per_session": self.gold_per_session,
            "trapping_per_session": self.trapping_per_session,
            "rejection_threshold": self.rejection_threshold,
            "rejection_min_sessions": self.rejection_min_sessions,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CampaignConfig":
        return cls(**dict(d))


@dataclass
class WorkerState:
    worker_id: str
    qualification_passed: bool = False
    qualified_at: Optional[float] = None
    sessions_completed: int = 0  # submitted rating sessions
    sessions_accepted: int = 0
    sessions_rejected: int = 0
    last_setup_index: Optional[int] = None
    last_training_index: Optional[int] = None
    excluded: bool = False

    @property
    def sessions_decided(self) -> int:
        return self.sessions_accepted + self.sessions_rejected


@dataclass
class SessionItem:
    position: int
    kind: str  # acr | hearing | attestation | comprehension | bw | level | binaural | comparison
    clip_ids: Tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {"position": self.position, "kind": self.kind, "clips": list(self.clip_ids)}

    @classmethod
    def from_record(cls, rec: dict) -> "SessionItem":
        return cls(rec["position"], rec["kind"], tuple(rec["clips"]))


@dataclass
class Session:
    id: str
    worker_id: str
    phase: Phase
    items: List[SessionItem]
    created_at: float
    status: SessionStatus = SessionStatus.OPEN
    answers: Optional[Dict[int, object]] = None
    playback: Optional[Dict[int, float]] = None
    decision_reasons: Tuple[str, ...] = ()
    decision_round: Optional[int] = None

    def item(self, position: int) -> SessionItem:
        return self.items[position]


@dataclass
class Vote:
    worker_id: str
    clip_id: str
    score: int
    session_id: str
    status: VoteStatus = VoteStatus.PENDING


@dataclass
class PhaseAssets:
    """Content of the qualification and setup screens, by clip id."""

    comprehension_clip: str
    comprehension_keywords: Tuple[str, ...]
    bw_clips: Tuple[str, str, str]  # ordered noisiest first (lowest cutoff first)
    level_clip: str
    binaural_clip: str
    binaural_digits: str
    comparison_clips: Tuple[str, str]  # cleaner clip first

    def to_dict(self) -> dict:
        return {
            "comprehension_clip": self.comprehension_clip,
            "comprehension_keywords": list(self.comprehension_keywords),
            "bw_clips": list(self.bw_clips),
            "level_clip": self.level_clip,
            "binaural_clip": self.binaural_clip,
            "binaural_digits": self.binaural_digits,
            "comparison_clips": list(self.comparison_clips),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PhaseAssets":
        return cls(
            comprehension_clip=d["comprehension_clip"],
            comprehension_keywords=tuple(d["comprehension_keywords"]),
            bw_clips=tuple(d["bw_clips"]),
            level_clip=d["level_clip"],
            binaural_clip=d["binaural_clip"],
            binaural_digits=d["binaural_digits"],
            comparison_clips=tuple(d["comparison_clips"]),
        )


#: Fraction of comprehension keywords that must match exactly to pass.
COMPREHENSION_PASS_FRACTION = 0.8


class Campaign:
    """Single-campaign state plus the commands that advance it."""

    def __init__(self, sink: Optional[Callable[[EventRecord], None]] = None,
                 clock: Optional[Callable[[], float]] = None):
        self._sink = sink
        self._clock = clock or time.time
        self._seq = 0
        self._session_counter = 0
        self.campaign_id: str = ""
        self.config: Optional[CampaignConfig] = None
        self.catalog: Optional[StringCatalog] = None
        self.assets: Optional[PhaseAssets] = None
        self.clips: Dict[str, Clip] = {}
        self.rating_ids: List[str] = []
        self.gold_ids: List[str] = []
        self.trapping_ids: List[str] = []
        self.training_ids: List[str] = []
        self.setup_ids: List[str] = []
        self.workers: Dict[str, WorkerState] = {}
        self.sessions: Dict[str, Session] = {}
        self.votes: Dict[str, List[Vote]] = {}  # session id -> votes
        self.clip_accepted: Dict[str, int] = {}
        self.clip_rejected: Dict[str, int] = {}
        self.clip_pending_votes: Dict[str, int] = {}
        self.clip_outstanding: Dict[str, int] = {}  # assembled, not yet decided
        self.worker_active_clips: Dict[str, set] = {}
        self.analysis_round: int = 0

    # -- construction -----------------------------------------------------

    @classmethod
    def create(
        cls,
        config: CampaignConfig,
        catalog: StringCatalog,
        rating_clips: Sequence[Clip],
        gold_clips: Sequence[Clip],
        trapping_clips: Sequence[Clip],
        training_clips: Sequence[Clip],
        setup_clips: Sequence[Clip],
        assets: PhaseAssets,
        campaign_id: str = "campaign",
        sink: Optional[Callable[[EventRecord], None]] = None,
        clock: Optional[Callable[[], float]] = None,
    ) -> "Campaign":
        validate_catalog(catalog)
        if catalog.language != config.language:
            raise ConfigurationError(
                f"catalog language {catalog.language!r} does not match campaign "
                f"language {config.language!r}"
            )
        everything = (
            list(rating_clips) + list(gold_clips) + list(trapping_clips)
            + list(training_clips) + list(setup_clips)
        )
        seen = set()
        for clip in everything:
            if clip.id in seen:
                raise ConfigurationError(f"duplicate clip id {clip.id!r}")
            seen.add(clip.id)
            if clip.language != config.language:
                raise ConfigurationError(
                    f"clip {clip.id!r} is {clip.language!r}; campaign assets must "
                    f"all be {config.language!r}"
                )
        role_expect = [
            (rating_clips, ClipRole.RATING), (gold_clips, ClipRole.GOLD),
            (trapping_clips, ClipRole.TRAPPING), (training_clips, ClipRole.TRAINING),
            (setup_clips, ClipRole.SETUP),
        ]
        for group, role in role_expect:
            for clip in group:
                if clip.role is not role:
                    raise ConfigurationError(
                        f"clip {clip.id!r} has role {clip.role.value!r}, expected {role.value!r}"
                    )
        if not rating_clips:
            raise ConfigurationError("campaign needs rating clips")
        gold_answers = {c.expected_answer for c in gold_clips}
        if not {1, 5} <= gold_answers:
            raise ConfigurationError(
                "gold set must contain both extremes (expected answers 1 and 5), "
                f"got {sorted(gold_answers)}"
            )
        if not trapping_clips:
            raise ConfigurationError("campaign needs trapping clips")
        training_labels = {c.nominal_quality for c in training_clips}
        if not {1, 2, 3, 4, 5} <= training_labels:
            raise ConfigurationError(
                "training set must span all five labels, got "
                f"{sorted(l for l in training_labels if l)}"
            )
        setup_id_set = {c.id for c in setup_clips}
        referenced = (
            {assets.comprehension_clip, assets.level_clip, assets.binaural_clip}
            | set(assets.bw_clips) | set(assets.comparison_clips)
        )
        missing = referenced - setup_id_set
        if missing:
            raise ConfigurationError(
                f"phase assets reference unknown setup clips: {sorted(missing)}"
            )

        campaign = cls(sink=sink, clock=clock)
        payload = {
            "campaign_id": campaign_id,
            "config": config.to_dict(),
            "catalog": {
                "language": catalog.language,
                "version": catalog.version,
                "schema": catalog.schema,
                "entries": dict(catalog.entries),
                "terminology": dict(catalog.terminology),
            },
            "clips": [c.to_record() for c in everything],
            "assets": assets.to_dict(),
        }
        campaign._emit("campaign-created", payload)
        return campaign

    @classmethod
    def from_events(
        cls,
        events: Sequence[EventRecord],
        sink: Optional[Callable[[EventRecord], None]] = None,
        clock: Optional[Callable[[], float]] = None,
    ) -> "Campaign":
        campaign = cls(sink=sink, clock=clock)
        for record in events:
            campaign._seq = record.seq
            campaign._apply(record)
        return campaign

    # -- event plumbing ---------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> EventRecord:
        self._seq += 1
        record = EventRecord(seq=self._seq, ts=self._clock(), kind=kind, payload=payload)
        if self._sink is not None:
            self._sink(record)
        self._apply(record)
        return record

    def _command_rng(self) -> np.random.Generator:
        seed = self.config.seed if self.config else 0
        return np.random.default_rng(np.random.SeedSequence(entropy=[seed, self._seq]))

    def _apply(self, record: EventRecord) -> None:
        handler = getattr(self, f"_apply_{record.kind.replace('-', '_')}")
        handler(record.payload, record.ts)

    def _apply_campaign_created(self, p: dict, ts: float) -> None:
        self.campaign_id = p["campaign_id"]
        self.config = CampaignConfig.from_dict(p["config"])
        cat = p["catalog"]
        self.catalog = StringCatalog(
            language=cat["language"], version=cat["version"], schema=cat["schema"],
            entries=dict(cat["entries"]), terminology=dict(cat["terminology"]),
        )
        self.assets = PhaseAssets.from_dict(p["assets"])
        for rec in p["clips"]:
            clip = Clip.from_record(rec)
            self.clips[clip.id] = clip
            bucket = {
                ClipRole.RATING: self.rating_ids, ClipRole.GOLD: self.gold_ids,
                ClipRole.TRAPPING: self.trapping_ids, ClipRole.TRAINING: self.training_ids,
                ClipRole.SETUP: self.setup_ids,
            }[clip.role]
            bucket.append(clip.id)
        for cid in self.rating_ids:
            self.clip_accepted[cid] = 0
            self.clip_rejected[cid] = 0
            self.clip_pending_votes[cid] = 0
            self.clip_outstanding[cid] = 0

    def _apply_session_assembled(self, p: dict, ts: float) -> None:
        session = Session(
            id=p["session_id"],
            worker_id=p["worker"],
            phase=Phase(p["phase"]),
            items=[SessionItem.from_record(r) for r in p["items"]],
            created_at=ts,
        )
        self.sessions[session.id] = session
        self._worker(session.worker_id)
        if session.phase is Phase.RATING:
            for item in session.items:
                cid = item.clip_ids[0]
                if self.clips[cid].role is ClipRole.RATING:
                    self.clip_outstanding[cid] += 1
                    self.worker_active_clips.setdefault(session.worker_id, set()).add(cid)

    def _apply_answers_submitted(self, p: dict, ts: float) -> None:
        session = self.sessions[p["session_id"]]
        session.answers = {int(k): v for k, v in p["answers"].items()}
        playback = p.get("playback")
        session.playback = (
            {int(k): float(v) for k, v in playback.items()} if playback is not None else None
        )
        session.status = SessionStatus.SUBMITTED
        if session.phase is Phase.RATING:
            votes = []
            for item in session.items:
                cid = item.clip_ids[0]
                if self.clips[cid].role is ClipRole.RATING:
                    votes.append(Vote(
                        worker_id=session.worker_id, clip_id=cid,
                        score=int(session.answers[item.position]),
                        session_id=session.id,
                    ))
                    self.clip_pending_votes[cid] += 1
            self.votes[session.id] = votes
            self._worker(session.worker_id).sessions_completed += 1

    def _apply_session_decided(self, p: dict, ts: float) -> None:
        session = self.sessions[p["session_id"]]
        accepted = p["decision"] == "accepted"
        session.status = SessionStatus.ACCEPTED if accepted else SessionStatus.REJECTED
        session.decision_reasons = tuple(p.get("reasons", ()))
        session.decision_round = p.get("round")
        if p.get("round") is not None:
            self.analysis_round = max(self.analysis_round, int(p["round"]))
        if session.phase is not Phase.RATING:
            return
        worker = self._worker(session.worker_id)
        new_status = VoteStatus.ACCEPTED if accepted else VoteStatus.REJECTED
        for vote in self.votes.get(session.id, []):
            vote.status = new_status
            self.clip_pending_votes[vote.clip_id] -= 1
            if accepted:
                self.clip_accepted[vote.clip_id] += 1
            else:
                self.clip_rejected[vote.clip_id] += 1
        for item in session.items:
            cid = item.clip_ids[0]
            if self.clips[cid].role is ClipRole.RATING:
                self.clip_outstanding[cid] -= 1
        if accepted:
            worker.sessions_accepted += 1
        else:
            worker.sessions_rejected += 1
            # rejected votes freed the clips; the worker may rate them again
            active = self.worker_active_clips.get(session.worker_id, set())
            for vote in self.votes.get(session.id, []):
                active.discard(vote.clip_id)
        assert self.config is not None
        if (
            not worker.excluded
            and worker.sessions_decided >= self.config.rejection_min_sessions
            and worker.sessions_rejected / worker.sessions_decided
            > self.config.rejection_threshold
        ):
            worker.excluded = True

    def _apply_worker_updated(self, p: dict, ts: float) -> None:
        worker = self._worker(p["worker"])
        update = p["update"]
        if "qualification_passed" in update:
            worker.qualification_passed = bool(update["qualification_passed"])
            worker.qualified_at = ts
        if "last_setup_index" in update:
            worker.last_setup_index = update["last_setup_index"]
        if "last_training_index" in update:
            worker.last_training_index = update["last_training_index"]
        if "excluded" in update:
            worker.excluded = bool(update["excluded"])

    def _worker(self, worker_id: str) -> WorkerState:
        if worker_id not in self.workers:
            self.workers[worker_id] = WorkerState(worker_id=worker_id)
        return self.workers[worker_id]

    # -- queries ----------------------------------------------------------

    def next_phase(self, worker_id: str) -> Phase:
        """Which phase this worker must complete next."""
        assert self.config is not None, "campaign not created"
        worker = self.workers.get(worker_id) or WorkerState(worker_id=worker_id)
        if worker.excluded:
            raise ExcludedWorkerError(f"worker {worker_id!r} is excluded")
        if not worker.qualification_passed:
            return Phase.QUALIFICATION
        done = worker.sessions_completed
        if worker.last_setup_index is None or done - worker.last_setup_index >= self.config.setup_interval:
            return Phase.SETUP
        if worker.last_training_index is None or done - worker.last_training_index >= self.config.training_interval:
            return Phase.TRAINING
        return Phase.RATING

    def open_session(self, worker_id: str) -> Optional[Session]:
        for session in self.sessions.values():
            if session.worker_id == worker_id and session.status is SessionStatus.OPEN:
                return session
        return None

    def scheduling_pressure(self, clip_id: str) -> int:
        """Accepted votes plus presentations still in flight for a clip."""
        return self.clip_accepted[clip_id] + self.clip_outstanding[clip_id]

    def resubmission_pool(self) -> List[str]:
        """Rating clips still short of the required accepted votes."""
        assert self.config is not None
        need = self.config.ratings_per_clip
        return [cid for cid in self.rating_ids if self.clip_accepted[cid] < need]

    def accepted_votes(self, clip_id: str) -> List[Vote]:
        if clip_id not in self.clips:
            raise NotFoundError(f"unknown clip {clip_id!r}")
        out = []
        for votes in self.votes.values():
            out.extend(
                v for v in votes if v.clip_id == clip_id and v.status is VoteStatus.ACCEPTED
            )
        return out

    def all_votes(self) -> List[Vote]:
        out: List[Vote] = []
        for sid in sorted(self.votes):
            out.extend(self.votes[sid])
        return out

    def decided_rating_sessions(self) -> List[Session]:
        return [
            s for s in self.sessions.values()
            if s.phase is Phase.RATING
            and s.status in (SessionStatus.ACCEPTED, SessionStatus.REJECTED)
        ]

    def status(self) -> dict:
        """Progress snapshot; also the wire shape of the status endpoint."""
        assert self.config is not None
        need = self.config.ratings_per_clip
        complete = sum(1 for cid in self.rating_ids if self.clip_accepted[cid] >= need)
        decided = self.decided_rating_sessions()
        accepted = sum(1 for s in decided if s.status is SessionStatus.ACCEPTED)
        vote_counts = {"pending": 0, "accepted": 0, "rejected": 0}
        for votes in self.votes.values():
            for vote in votes:
                vote_counts[vote.status.value] += 1
        session_counts = {"open": 0, "submitted": 0, "accepted": 0, "rejected": 0}
        for session in self.sessions.values():
            if session.phase is Phase.RATING:
                session_counts[session.status.value] += 1
        return {
            "campaign_id": self.campaign_id,
            "language": self.config.language,
            "round": self.analysis_round,
            "clips_total": len(self.rating_ids),
            "clips_complete": complete,
            "ratings_per_clip": need,
            "acceptance_rate": (accepted / len(decided)) if decided else None,
            "sessions": session_counts,
            "votes": vote_counts,
            "workers": {
                "total": len(self.workers),
                "excluded": sum(1 for w in self.workers.values() if w.excluded),
            },
        }

    # -- commands ---------------------------------------------------------

    def _next_session_id(self) -> str:
        self._session_counter += 1
        return f"s{self._session_counter:06d}"

    def assemble_session(self, worker_id: str) -> Session:
        """Build a rating session: least-voted clips plus gold and trapping."""
        assert self.config is not None
        if self.next_phase(worker_id) is not Phase.RATING:
            raise InvalidArgumentError(
                f"worker {worker_id!r} is not in the rating phase"
            )
        if self.open_session(worker_id) is not None:
            raise ConflictError(f"worker {worker_id!r} already has an open session")
        cfg = self.config
        active = self.worker_active_clips.get(worker_id, set())
        candidates = [cid for cid in self.rating_ids if cid not in active]
        if len(candidates) < cfg.block_size:
            raise NoWorkError(
                f"worker {worker_id!r} has only {len(candidates)} unrated clips, "
                f"needs {cfg.block_size}"
            )
        rng = self._command_rng()
        tiebreak = rng.permutation(len(candidates))
        ranked = sorted(
            range(len(candidates)),
            key=lambda i: (self.scheduling_pressure(candidates[i]), tiebreak[i]),
        )
        chosen = [candidates[i] for i in ranked[: cfg.block_size]]

        gold = [self.gold_ids[int(rng.integers(len(self.gold_ids)))]
                for _ in range(cfg.gold_per_session)]
        traps = [self.trapping_ids[int(rng.integers(len(self.trapping_ids)))]
                 for _ in range(cfg.trapping_per_session)]
        total = cfg.block_size + len(gold) + len(traps)
        # Control items never land at position 0: a worker should hear at
        # least one real stimulus before meeting a trap.
        special_positions = rng.choice(
            np.arange(1, total), size=len(gold) + len(traps), replace=False
        )
        special = {int(pos): cid for pos, cid in zip(special_positions, gold + traps)}
        items = []
        rating_iter = iter(chosen)
        for position in range(total):
            cid = special.get(position) or next(rating_iter)
            items.append(SessionItem(position=position, kind="acr", clip_ids=(cid,)))

        payload = {
            "session_id": self._next_session_id(),
            "worker": worker_id,
            "phase": Phase.RATING.value,
            "items": [it.to_record() for it in items],
        }
        self._emit("session-assembled", payload)
        return self.sessions[payload["session_id"]]

    def assemble_phase_session(self, worker_id: str, phase: Phase) -> Session:
        """Build a qualification, setup, or training session document."""
        assert self.config is not None and self.assets is not None
        if phase is Phase.RATING:
            raise InvalidArgumentError("use assemble_session for rating sessions")
        if self.next_phase(worker_id) is not phase:
            raise InvalidArgumentError(
                f"worker {worker_id!r} is not due for {phase.value}"
            )
        if self.open_session(worker_id) is not None:
            raise ConflictError(f"worker {worker_id!r} already has an open session")
        rng = self._command_rng()
        items: List[SessionItem] = []
        if phase is Phase.QUALIFICATION:
            items.append(SessionItem(0, "attestation"))
            items.append(SessionItem(1, "hearing"))
            items.append(SessionItem(2, "comprehension", (self.assets.comprehension_clip,)))
            order = rng.permutation(3)
            bw = tuple(self.assets.bw_clips[i] for i in order)
            items.append(SessionItem(3, "bw", bw))
        elif phase is Phase.SETUP:
            items.append(SessionItem(0, "level", (self.assets.level_clip,)))
            items.append(SessionItem(1, "binaural", (self.assets.binaural_clip,)))
            pair = list(self.assets.comparison_clips)
            if rng.integers(2):
                pair.reverse()
            items.append(SessionItem(2, "comparison", tuple(pair)))
        else:  # training
            order = rng.permutation(len(self.training_ids))
            for position, idx in enumerate(order):
                items.append(SessionItem(position, "acr", (self.training_ids[int(idx)],)))
        payload = {
            "session_id": self._next_session_id(),
            "worker": worker_id,
            "phase": phase.value,
            "items": [it.to_record() for it in items],
        }
        self._emit("session-assembled", payload)
        return self.sessions[payload["session_id"]]

    def submit_answers(
        self,
        session_id: str,
        answers: Mapping[int, object],
        playback: Optional[Mapping[int, float]] = None,
    ) -> Session:
        """Record a worker's answers; rating answers become pending votes."""
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        if session.status is not SessionStatus.OPEN:
            raise ConflictError(f"session {session_id!r} was already submitted")
        answers = {int(k): v for k, v in dict(answers).items()}
        expected_positions = {item.position for item in session.items}
        if set(answers) != expected_positions:
            missing = sorted(expected_positions - set(answers))
            extra = sorted(set(answers) - expected_positions)
            raise IncompleteSubmissionError(
                f"answers do not cover the session: missing positions {missing}, "
                f"unexpected {extra}"
            )
        for item in session.items:
            self._check_answer(item, answers[item.position])
        if playback is not None:
            playback = {int(k): float(v) for k, v in dict(playback).items()}
            if not set(playback) <= expected_positions:
                raise InvalidArgumentError("playback telemetry for unknown positions")

        self._emit("answers-submitted", {
            "session_id": session_id,
            "answers": {str(k): answers[k] for k in sorted(answers)},
            "playback": (
                {str(k): playback[k] for k in sorted(playback)} if playback is not None else None
            ),
        })
        if session.phase is not Phase.RATING:
            self._decide_phase_session(session)
        return session

    @staticmethod
    def _check_answer(item: SessionItem, value: object) -> None:
        kind = item.kind
        if kind == "acr":
            if not isinstance(value, int) or value not in (1, 2, 3, 4, 5):
                raise InvalidArgumentError(
                    f"position {item.position}: ACR answer must be 1..5, got {value!r}"
                )
        elif kind in ("hearing", "attestation", "level"):
            if not isinstance(value, bool):
                raise InvalidArgumentError(
                    f"position {item.position}: {kind} answer must be a boolean"
                )
        elif kind in ("comprehension", "binaural"):
            if not isinstance(value, str):
                raise InvalidArgumentError(
                    f"position {item.position}: {kind} answer must be text"
                )
        elif kind == "bw":
            if (not isinstance(value, (list, tuple)) or sorted(value) != [0, 1, 2]):
                raise InvalidArgumentError(
                    f"position {item.position}: bandwidth answer must order the "
                    f"three clips, got {value!r}"
                )
        elif kind == "comparison":
            if value not in (0, 1):
                raise InvalidArgumentError(
                    f"position {item.position}: comparison answer must be 0 or 1"
                )
        else:  # pragma: no cover - item kinds are internal
            raise InvalidArgumentError(f"unknown item kind {kind!r}")

    def _decide_phase_session(self, session: Session) -> None:
        passed, reasons = self._evaluate_phase(session)
        self._emit("session-decided", {
            "session_id": session.id,
            "decision": "accepted" if passed else "rejected",
            "reasons": list(reasons),
            "round": None,
        })
        if not passed:
            return
        worker = self._worker(session.worker_id)
        if session.phase is Phase.QUALIFICATION:
            update = {"qualification_passed": True}
        elif session.phase is Phase.SETUP:
            update = {"last_setup_index": worker.sessions_completed}
        else:
            update = {"last_training_index": worker.sessions_completed}
        self._emit("worker-updated", {"worker": session.worker_id, "update": update})

    def _evaluate_phase(self, session: Session) -> Tuple[bool, List[str]]:
        assert self.assets is not None
        answers = session.answers or {}
        reasons: List[str] = []
        for item in session.items:
            value = answers[item.position]
            if item.kind in ("attestation", "hearing", "level"):
                if value is not True:
                    reasons.append(item.kind)
            elif item.kind == "comprehension":
                keywords = self.assets.comprehension_keywords
                heard = {w.casefold() for w in str(value).split()}
                hits = sum(1 for k in keywords if k.casefold() in heard)
                if hits < COMPREHENSION_PASS_FRACTION * len(keywords):
                    reasons.append("comprehension")
            elif item.kind == "bw":
                # Truth: served clips reordered to the configured noisiest-first order.
                truth = sorted(
                    range(3), key=lambda i: self.assets.bw_clips.index(item.clip_ids[i])
                )
                if list(value) != truth:
                    reasons.append("bandwidth")
            elif item.kind == "comparison":
                cleaner = item.clip_ids.index(self.assets.comparison_clips[0])
                if value != cleaner:
                    reasons.append("comparison")
            # training acr items calibrate the worker; they are not graded
        return (not reasons, reasons)

    def decide_session(
        self,
        session_id: str,
        accepted: bool,
        reasons: Sequence[str] = (),
        round_number: Optional[int] = None,
    ) -> None:
        """Apply an analysis decision to a submitted rating session."""
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        if session.status is not SessionStatus.SUBMITTED:
            raise ConflictError(
                f"session {session_id!r} is {session.status.value}, expected submitted"
            )
        self._emit("session-decided", {
            "session_id": session_id,
            "decision": "accepted" if accepted else "rejected",
            "reasons": list(reasons),
            "round": round_number,
        })


def export_sessions(campaign: Campaign, path) -> None:
    """Write every assembled session as self-contained columnar records."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("session_id\tworker\tphase\tstatus\tposition\tkind\tclip_ids\tclip_paths\n")
        for sid in sorted(campaign.sessions):
            session = campaign.sessions[sid]
            for item in session.items:
                paths = [campaign.clips[c].path or "" for c in item.clip_ids]
                fh.write(
                    f"{session.id}\t{session.worker_id}\t{session.phase.value}\t"
                    f"{session.status.value}\t{item.position}\t{item.kind}\t"
                    f"{','.join(item.clip_ids)}\t{','.join(paths)}\n"
                )
