"""p808kit: localized crowdsourced ACR listening tests, end to end.

Stimulus preparation, string-catalog localization with TTS instructions,
campaign/session management with gold and trapping checks, reliability
analysis with resubmission, MOS aggregation with confidence intervals,
Levenshtein phone-similarity metrics, and a hallucination crossover
detector for generative enhancement systems.
"""

from .audio import AudioBuffer, BandSpec, bandlimit, generate_wgn, make_bw_test_clip, \
    make_comparison_pair, make_trapping_clip, mix_at_snr, rms_dbfs
from .analysis import MosResult, ReliabilityRules, acceptance_rate, check_session, \
    clip_mos, group_stats, run_analysis
from .campaign import Campaign, CampaignConfig, Phase, PhaseAssets, Session, WorkerState
from .clips import Clip, ClipRole
from .errors import P808Error
from .localization import CategoryLabel, StringCatalog, StubTtsClient, TtsRequest, \
    build_trapping_prompts, load_catalog, reference_catalog, render_instruction
from .metrics import MetricRow, MetricTable, PhoneSequence, QuartileRule, \
    hallucination_flags, levenshtein, lpd, lps
from .report import ReportSpec, ingest_results, render_table
from .simulator import RaterProfile, recovery_error, run_campaign, simulate_vote

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "BandSpec", "bandlimit", "generate_wgn", "make_bw_test_clip",
    "make_comparison_pair", "make_trapping_clip", "mix_at_snr", "rms_dbfs",
    "MosResult", "ReliabilityRules", "acceptance_rate", "check_session",
    "clip_mos", "group_stats", "run_analysis",
    "Campaign", "CampaignConfig", "Phase", "PhaseAssets", "Session", "WorkerState",
    "Clip", "ClipRole", "P808Error",
    "CategoryLabel", "StringCatalog", "StubTtsClient", "TtsRequest",
    "build_trapping_prompts", "load_catalog", "reference_catalog", "render_instruction",
    "MetricRow", "MetricTable", "PhoneSequence", "QuartileRule",
    "hallucination_flags", "levenshtein", "lpd", "lps",
    "ReportSpec", "ingest_results", "render_table",
    "RaterProfile", "recovery_error", "run_campaign", "simulate_vote",
]
