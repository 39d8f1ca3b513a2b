"""Reliability analysis and MOS statistics over a campaign's vote ledger.

Submitted rating sessions are checked against trapping, gold and playback
criteria; the decision transitions every rating vote of the session at
once. MOS aggregation uses the normal-approximation 95% interval
(1.96 * s / sqrt(n)); swap :data:`CI95_FACTOR` for a t quantile if small
groups ever matter.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .campaign import Campaign, Phase, Session, SessionStatus
from .clips import Clip, ClipRole
from .errors import (
    InsufficientVotesError,
    InvalidArgumentError,
    UndefinedRateError,
)

CI95_FACTOR = 1.96


@dataclass(frozen=True)
class ReliabilityRules:
    trapping_must_match: bool = True
    gold_tolerance: int = 1
    #: Fraction of each clip that must have been played. Sessions submitted
    #: without playback telemetry fall back to gold/trapping checks only.
    min_listen_fraction: float = 1.0

    def __post_init__(self):
        if self.gold_tolerance not in (0, 1):
            raise InvalidArgumentError("gold tolerance must be 0 or 1")
        if not (0.0 < self.min_listen_fraction <= 1.0):
            raise InvalidArgumentError("min_listen_fraction must be in (0, 1]")


@dataclass(frozen=True)
class Decision:
    accepted: bool
    reasons: Tuple[str, ...] = ()


@dataclass(frozen=True)
class MosResult:
    key: str
    mean: float
    ci95_halfwidth: float
    n: int
    degenerate: bool = False  # n == 1, no spread estimate

    def __post_init__(self):
        if not (1.0 <= self.mean <= 5.0):
            raise InvalidArgumentError(f"MOS mean {self.mean} outside [1, 5]")
        if self.ci95_halfwidth < 0:
            raise InvalidArgumentError("CI halfwidth must be non-negative")
        if self.n < 1:
            raise InvalidArgumentError("MOS needs at least one score")


def check_session(
    session: Session,
    answers: Mapping[int, int],
    rules: ReliabilityRules,
    clips: Mapping[str, Clip],
    playback: Optional[Mapping[int, float]] = None,
) -> Decision:
    """Pure accept/reject decision for one submitted rating session."""
    reasons: List[str] = []
    for item in session.items:
        clip = clips[item.clip_ids[0]]
        if clip.role is ClipRole.TRAPPING and rules.trapping_must_match:
            if answers[item.position] != clip.expected_answer:
                reasons.append("trapping")
        elif clip.role is ClipRole.GOLD:
            tolerance = clip.gold_tolerance if clip.gold_tolerance is not None else rules.gold_tolerance
            if abs(answers[item.position] - clip.expected_answer) > tolerance:
                reasons.append("gold")
    if playback is not None:
        played = [playback.get(item.position, 0.0) for item in session.items]
        if any(fraction < rules.min_listen_fraction for fraction in played):
            reasons.append("playback")
    unique = tuple(dict.fromkeys(reasons))
    return Decision(accepted=not unique, reasons=unique)


def run_analysis(
    campaign: Campaign, rules: Optional[ReliabilityRules] = None
) -> List[Tuple[str, Decision]]:
    """Decide every submitted rating session; one analysis round per call."""
    rules = rules or ReliabilityRules()
    pending = sorted(
        s.id for s in campaign.sessions.values()
        if s.phase is Phase.RATING and s.status is SessionStatus.SUBMITTED
    )
    if not pending:
        return []
    round_number = campaign.analysis_round + 1
    decisions = []
    for sid in pending:
        session = campaign.sessions[sid]
        decision = check_session(
            session, session.answers or {}, rules, campaign.clips, session.playback
        )
        campaign.decide_session(sid, decision.accepted, decision.reasons, round_number)
        decisions.append((sid, decision))
    return decisions


def acceptance_rate(
    campaign: Campaign,
    round_number: Optional[int] = None,
    worker_id: Optional[str] = None,
) -> float:
    """Accepted over decided rating sessions, optionally filtered."""
    decided = campaign.decided_rating_sessions()
    if round_number is not None:
        decided = [s for s in decided if s.decision_round == round_number]
    if worker_id is not None:
        decided = [s for s in decided if s.worker_id == worker_id]
    if not decided:
        raise UndefinedRateError("no decided sessions match the filter")
    accepted = sum(1 for s in decided if s.status is SessionStatus.ACCEPTED)
    return accepted / len(decided)


def group_stats(scores: Sequence[float], key: str = "group") -> MosResult:
    """Mean and 95% CI halfwidth of a score group.

    A single score yields halfwidth 0 with the degenerate flag set.
    """
    scores = list(scores)
    if not scores:
        raise InvalidArgumentError("cannot aggregate an empty score list")
    for s in scores:
        if not (1.0 <= s <= 5.0):
            raise InvalidArgumentError(f"score {s} outside the 1..5 scale")
    mean = statistics.fmean(scores)
    if len(scores) == 1:
        return MosResult(key=key, mean=mean, ci95_halfwidth=0.0, n=1, degenerate=True)
    sd = statistics.stdev(scores)
    halfwidth = CI95_FACTOR * sd / math.sqrt(len(scores))
    return MosResult(key=key, mean=mean, ci95_halfwidth=halfwidth, n=len(scores))


def clip_mos(campaign: Campaign, clip_id: str) -> MosResult:
    """MOS of one clip from its accepted votes; enforces the ratings floor."""
    assert campaign.config is not None
    votes = campaign.accepted_votes(clip_id)
    need = campaign.config.ratings_per_clip
    if len(votes) < need:
        raise InsufficientVotesError(clip_id, have=len(votes), need=need)
    return group_stats([v.score for v in votes], key=clip_id)


def campaign_mos(campaign: Campaign) -> Dict[str, MosResult]:
    """Per-clip MOS for every rating clip that has enough accepted votes."""
    out = {}
    for cid in campaign.rating_ids:
        try:
            out[cid] = clip_mos(campaign, cid)
        except InsufficientVotesError:
            continue
    return out


def decision_log_lines(campaign: Campaign) -> List[str]:
    """One line per decided rating session: id, decision, reasons."""
    lines = []
    for session in sorted(campaign.decided_rating_sessions(), key=lambda s: s.id):
        reasons = ",".join(session.decision_reasons) or "-"
        lines.append(f"{session.id}\t{session.status.value}\t{reasons}")
    return lines
