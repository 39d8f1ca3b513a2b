"""Simulated rater populations driving campaigns end to end.

Validates the reliability analysis and MOS recovery without human
subjects. Votes are deterministic per (profile seed, clip id), the
campaign runs on a logical clock, and all randomness is seeded, so a
scenario reproduces its ledger byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .analysis import MosResult, ReliabilityRules, campaign_mos, run_analysis
from .campaign import Campaign, CampaignConfig, Phase, PhaseAssets, Session
from .clips import Clip, ClipRole
from .errors import (
    ExcludedWorkerError,
    IncompleteCampaignError,
    InvalidArgumentError,
    NoWorkError,
)
from .eventlog import EventRecord
from .localization import StringCatalog, reference_catalog

GroundTruth = Dict[str, float]  # clip id -> true quality in [1, 5]


@dataclass(frozen=True)
class RaterProfile:
    kind: str  # honest | spammer | biased
    seed: int
    noise_sd: float = 0.8
    bias: float = 0.0
    trap_fail_prob: float = 0.0

    def __post_init__(self):
        if self.kind not in ("honest", "spammer", "biased"):
            raise InvalidArgumentError(f"unknown rater kind {self.kind!r}")
        if not (0.0 <= self.trap_fail_prob <= 1.0):
            raise InvalidArgumentError("trap_fail_prob must be in [0, 1]")
        if self.noise_sd < 0:
            raise InvalidArgumentError("noise_sd must be non-negative")

    @classmethod
    def honest(cls, seed: int, noise_sd: float = 0.8) -> "RaterProfile":
        return cls(kind="honest", seed=seed, noise_sd=noise_sd)

    @classmethod
    def spammer(cls, seed: int, trap_fail_prob: float = 0.9) -> "RaterProfile":
        return cls(kind="spammer", seed=seed, trap_fail_prob=trap_fail_prob)

    @classmethod
    def biased(cls, seed: int, bias: float, noise_sd: float = 0.8) -> "RaterProfile":
        return cls(kind="biased", seed=seed, bias=bias, noise_sd=noise_sd)


def _clip_rng(profile: RaterProfile, clip_id: str) -> np.random.Generator:
    digest = hashlib.sha256(clip_id.encode("utf-8")).digest()
    clip_key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence(entropy=[profile.seed, clip_key]))


def simulate_vote(profile: RaterProfile, clip: Clip, truth: Optional[float] = None) -> int:
    """One ACR answer for a clip; deterministic per (profile seed, clip id)."""
    rng = _clip_rng(profile, clip.id)
    if clip.role in (ClipRole.GOLD, ClipRole.TRAPPING):
        expected = clip.expected_answer
        if profile.kind == "spammer" and clip.role is ClipRole.GOLD:
            # A spammer does not listen; gold looks like any other item.
            return int(rng.integers(1, 6))
        if rng.random() < profile.trap_fail_prob:
            wrong = [v for v in (1, 2, 3, 4, 5) if v != expected]
            return int(wrong[int(rng.integers(len(wrong)))])
        return int(expected)
    if clip.role is ClipRole.TRAINING and truth is None:
        truth = clip.nominal_quality
    if profile.kind == "spammer":
        return int(rng.integers(1, 6))
    if truth is None:
        raise InvalidArgumentError(f"no ground truth for rating clip {clip.id!r}")
    value = truth + profile.bias + rng.normal(0.0, profile.noise_sd)
    return int(round(min(5.0, max(1.0, value))))


@dataclass
class DecisionLogEntry:
    round: Optional[int]
    session_id: str
    worker_id: str
    phase: str
    decision: str
    reasons: Tuple[str, ...]


@dataclass
class CampaignOutcome:
    campaign: Campaign
    complete: bool
    rounds: int
    per_clip_mos: Dict[str, MosResult]
    acceptance_rate: Optional[float]
    decisions: List[DecisionLogEntry]
    worker_kinds: Dict[str, str]

    def status_report(self) -> dict:
        return self.campaign.status()


def build_simulation_campaign(
    config: CampaignConfig,
    truth: GroundTruth,
    catalog: Optional[StringCatalog] = None,
    sink: Optional[Callable[[EventRecord], None]] = None,
    clock: Optional[Callable[[], float]] = None,
    campaign_id: str = "sim",
) -> Campaign:
    """A campaign over synthetic clip records matching a truth map."""
    catalog = catalog or reference_catalog()
    lang = config.language
    rating = [Clip(id=cid, role=ClipRole.RATING, language=lang) for cid in truth]
    gold = [
        Clip(id="g-top", role=ClipRole.GOLD, language=lang, expected_answer=5),
        Clip(id="g-bottom", role=ClipRole.GOLD, language=lang, expected_answer=1),
    ]
    trapping = [
        Clip(id=f"t-{v}", role=ClipRole.TRAPPING, language=lang, expected_answer=v)
        for v in (1, 2, 3, 4, 5)
    ]
    training = [
        Clip(id=f"x-{v}", role=ClipRole.TRAINING, language=lang, nominal_quality=v)
        for v in (1, 2, 3, 4, 5)
    ]
    setup_ids = ["q-comp", "q-bw4", "q-bw9", "q-bw16", "s-level", "s-binaural",
                 "s-cmp-clean", "s-cmp-noisy"]
    setup = [Clip(id=cid, role=ClipRole.SETUP, language=lang) for cid in setup_ids]
    assets = PhaseAssets(
        comprehension_clip="q-comp",
        comprehension_keywords=("quick", "brown", "fox", "jumps", "over"),
        bw_clips=("q-bw4", "q-bw9", "q-bw16"),
        level_clip="s-level",
        binaural_clip="s-binaural",
        binaural_digits="3 7 1 4",
        comparison_clips=("s-cmp-clean", "s-cmp-noisy"),
    )
    return Campaign.create(
        config, catalog, rating, gold, trapping, training, setup, assets,
        campaign_id=campaign_id, sink=sink, clock=clock,
    )


def scripted_phase_answers(campaign: Campaign, session: Session) -> Dict[int, object]:
    """Correct answers for a qualification/setup/training session.

    The simulator models unreliable rating behaviour, not failed equipment,
    so every profile clears the entry checks.
    """
    assert campaign.assets is not None
    answers: Dict[int, object] = {}
    for item in session.items:
        if item.kind in ("attestation", "hearing", "level"):
            answers[item.position] = True
        elif item.kind == "comprehension":
            answers[item.position] = " ".join(campaign.assets.comprehension_keywords)
        elif item.kind == "binaural":
            answers[item.position] = campaign.assets.binaural_digits
        elif item.kind == "bw":
            answers[item.position] = sorted(
                range(3), key=lambda i: campaign.assets.bw_clips.index(item.clip_ids[i])
            )
        elif item.kind == "comparison":
            answers[item.position] = item.clip_ids.index(campaign.assets.comparison_clips[0])
        else:  # training acr item
            raise AssertionError("acr items are answered by simulate_vote")
    return answers


def _session_answers(
    campaign: Campaign, session: Session, profile: RaterProfile, truth: GroundTruth
) -> Dict[int, object]:
    if session.phase in (Phase.QUALIFICATION, Phase.SETUP):
        return scripted_phase_answers(campaign, session)
    answers: Dict[int, object] = {}
    for item in session.items:
        clip = campaign.clips[item.clip_ids[0]]
        answers[item.position] = simulate_vote(profile, clip, truth.get(clip.id))
    return answers


def run_campaign(
    config: CampaignConfig,
    truth: GroundTruth,
    population: Mapping[str, RaterProfile],
    max_rounds: int = 20,
    rules: Optional[ReliabilityRules] = None,
    catalog: Optional[StringCatalog] = None,
    sink: Optional[Callable[[EventRecord], None]] = None,
    campaign_id: str = "sim",
) -> CampaignOutcome:
    """Iterate assemble, submit, analyze, resubmit until the pool drains.

    Raises :class:`IncompleteCampaignError` if clips are still short of
    votes when rounds run out or no worker can contribute further.
    """
    for cid, value in truth.items():
        if not (1.0 <= value <= 5.0):
            raise InvalidArgumentError(f"truth for {cid!r} must be in [1, 5], got {value}")
    ticks = iter(range(1, 1_000_000_000))
    clock = lambda: float(next(ticks))  # noqa: E731 - logical time, byte-stable ledgers
    campaign = build_simulation_campaign(
        config, truth, catalog=catalog, sink=sink, clock=clock, campaign_id=campaign_id
    )
    rules = rules or ReliabilityRules()
    worker_order = sorted(population)
    rounds_used = 0
    complete = not campaign.resubmission_pool()
    for _ in range(max_rounds):
        rounds_used += 1
        progressed = False
        for worker_id in worker_order:
            profile = population[worker_id]
            try:
                session = _next_rating_session(campaign, worker_id, profile, truth)
            except (ExcludedWorkerError, NoWorkError):
                continue
            answers = _session_answers(campaign, session, profile, truth)
            playback = {item.position: 1.0 for item in session.items}
            campaign.submit_answers(session.id, answers, playback)
            progressed = True
        run_analysis(campaign, rules)
        if not campaign.resubmission_pool():
            complete = True
            break
        if not progressed:
            break  # nobody can contribute another vote; more rounds will not help

    outcome = CampaignOutcome(
        campaign=campaign,
        complete=complete,
        rounds=rounds_used,
        per_clip_mos=campaign_mos(campaign),
        acceptance_rate=_safe_acceptance(campaign),
        decisions=_decision_log(campaign),
        worker_kinds={wid: population[wid].kind for wid in worker_order},
    )
    if not complete:
        raise IncompleteCampaignError(
            f"campaign incomplete after {rounds_used} rounds; "
            f"{len(campaign.resubmission_pool())} clips still short",
            residual=campaign.resubmission_pool(),
            rounds=rounds_used,
        )
    return outcome


def _next_rating_session(
    campaign: Campaign, worker_id: str, profile: RaterProfile, truth: GroundTruth
) -> Session:
    """Walk the worker through any due phases, then assemble a rating session."""
    for _ in range(4):  # qualification, setup, training at most, then rating
        phase = campaign.next_phase(worker_id)
        if phase is Phase.RATING:
            return campaign.assemble_session(worker_id)
        session = campaign.assemble_phase_session(worker_id, phase)
        answers = _session_answers(campaign, session, profile, truth)
        playback = {item.position: 1.0 for item in session.items if item.clip_ids}
        campaign.submit_answers(session.id, answers, playback)
    raise AssertionError("phase gating did not reach the rating phase")


def _safe_acceptance(campaign: Campaign) -> Optional[float]:
    decided = campaign.decided_rating_sessions()
    if not decided:
        return None
    accepted = sum(1 for s in decided if s.status.value == "accepted")
    return accepted / len(decided)


def _decision_log(campaign: Campaign) -> List[DecisionLogEntry]:
    entries = []
    for sid in sorted(campaign.sessions):
        session = campaign.sessions[sid]
        if session.status.value not in ("accepted", "rejected"):
            continue
        entries.append(DecisionLogEntry(
            round=session.decision_round,
            session_id=session.id,
            worker_id=session.worker_id,
            phase=session.phase.value,
            decision=session.status.value,
            reasons=session.decision_reasons,
        ))
    return entries


def recovery_error(outcome: CampaignOutcome, truth: GroundTruth) -> Tuple[float, float]:
    """RMSE and max absolute error of per-clip MOS against ground truth."""
    if not outcome.complete:
        raise InvalidArgumentError("campaign did not complete; MOS is not final")
    missing = [cid for cid in outcome.campaign.rating_ids if cid not in truth]
    if missing:
        raise InvalidArgumentError(f"truth map missing clips: {missing}")
    errors = []
    for cid in outcome.campaign.rating_ids:
        errors.append(outcome.per_clip_mos[cid].mean - truth[cid])
    rmse = math.sqrt(statistics_mean(e * e for e in errors))
    return rmse, max(abs(e) for e in errors)


def statistics_mean(values) -> float:
    values = list(values)
    return sum(values) / len(values)


# --- scenario files ------------------------------------------------------


def expand_population(spec: Sequence[Mapping], seed: int = 0) -> Dict[str, RaterProfile]:
    """Turn ``[{"kind": "honest", "count": 30, ...}]`` into worker profiles."""
    population: Dict[str, RaterProfile] = {}
    counter = 0
    for group in spec:
        kind = group["kind"]
        count = int(group.get("count", 1))
        for _ in range(count):
            counter += 1
            worker_id = f"w{counter:03d}"
            worker_seed = int(np.random.SeedSequence(
                entropy=[seed, counter]).generate_state(1)[0])
            if kind == "honest":
                profile = RaterProfile.honest(
                    worker_seed, noise_sd=float(group.get("noise_sd", 0.8)))
            elif kind == "spammer":
                profile = RaterProfile.spammer(
                    worker_seed, trap_fail_prob=float(group.get("trap_fail_prob", 0.9)))
            elif kind == "biased":
                profile = RaterProfile.biased(
                    worker_seed, bias=float(group["bias"]),
                    noise_sd=float(group.get("noise_sd", 0.8)))
            else:
                raise InvalidArgumentError(f"unknown rater kind {kind!r}")
            population[worker_id] = profile
    if not population:
        raise InvalidArgumentError("population spec expands to zero workers")
    return population


def synthetic_truth(clips: int, seed: int = 0, low: float = 1.3, high: float = 4.7) -> GroundTruth:
    rng = np.random.default_rng(seed)
    return {f"c{i:03d}": float(rng.uniform(low, high)) for i in range(1, clips + 1)}


def load_scenario(path) -> dict:
    """Read a scenario file: config, truth (or generator), population, rounds."""
    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    seed = int(spec.get("seed", 0))
    config = CampaignConfig.from_dict(spec["config"])
    truth_spec = spec["truth"]
    if isinstance(truth_spec, Mapping) and "clips" in truth_spec:
        truth = synthetic_truth(
            int(truth_spec["clips"]),
            seed=int(truth_spec.get("seed", seed)),
            low=float(truth_spec.get("low", 1.3)),
            high=float(truth_spec.get("high", 4.7)),
        )
    else:
        truth = {str(k): float(v) for k, v in truth_spec.items()}
    population = expand_population(spec["population"], seed=seed)
    return {
        "config": config,
        "truth": truth,
        "population": population,
        "max_rounds": int(spec.get("max_rounds", 20)),
    }
