from __future__ import annotations

import numpy as np
import pytest

from p808kit.audio import AudioBuffer, CAMPAIGN_RATE
from p808kit.campaign import Campaign, CampaignConfig
from p808kit.localization import StringCatalog, dump_catalog, reference_catalog, validate_catalog
from p808kit.simulator import build_simulation_campaign, synthetic_truth


def make_speech(
    duration: float = 1.0, sample_rate: int = CAMPAIGN_RATE, seed: int = 0
) -> AudioBuffer:
    """Speech-like test signal: enveloped harmonics plus a little noise."""
    rng = np.random.default_rng(seed)
    n = int(duration * sample_rate)
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(110.0, 220.0)
    samples = np.zeros(n)
    for k in range(1, 6):
        samples += rng.uniform(0.2, 1.0) / k * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 6.28))
    samples *= 0.5 + 0.5 * np.sin(2 * np.pi * rng.uniform(2.0, 5.0) * t) ** 2
    samples += 0.02 * rng.standard_normal(n)
    samples *= 0.6 / np.max(np.abs(samples))
    return AudioBuffer(samples, sample_rate)


@pytest.fixture
def speech() -> AudioBuffer:
    return make_speech(seed=1)


@pytest.fixture
def en_catalog() -> StringCatalog:
    return reference_catalog()


def german_catalog() -> StringCatalog:
    """Test-authored de-DE catalog; the trapping prompt spells the label term."""
    catalog = reference_catalog()
    catalog = StringCatalog(
        language="de-DE",
        version="1",
        schema=catalog.schema,
        entries={
            **{k: f"[de] {v}" for k, v in catalog.entries.items()
               if "{" not in v},
            "training.intro": (
                "Die folgenden Clips dienen zur Übung und decken die Spanne von "
                "{term:label.1} bis {term:label.5} ab."
            ),
            "trapping.prompt": (
                "Dies ist eine Unterbrechung: Bitte wählen Sie die Antwort "
                "{label} ({term:label.{label}})"
            ),
        },
        terminology={
            "label.5": "Ausgezeichnet",
            "label.4": "Gut",
            "label.3": "Ordentlich",
            "label.2": "Dürftig",
            "label.1": "Schlecht",
        },
    )
    validate_catalog(catalog)
    return catalog


@pytest.fixture
def de_catalog() -> StringCatalog:
    return german_catalog()


@pytest.fixture
def catalog_file(tmp_path, en_catalog):
    path = tmp_path / "en-US.catalog"
    path.write_text(dump_catalog(en_catalog), encoding="utf-8")
    return path


def small_campaign(
    clips: int = 12, seed: int = 5, language: str = "en-US", **config_kwargs
) -> tuple[Campaign, dict]:
    truth = synthetic_truth(clips, seed=seed)
    config = CampaignConfig(language=language, seed=seed, **config_kwargs)
    return build_simulation_campaign(config, truth), truth


def qualify_worker(campaign: Campaign, worker_id: str) -> None:
    """Drive a worker through qualification, setup and training honestly."""
    from p808kit.campaign import Phase
    from p808kit.simulator import scripted_phase_answers

    for _ in range(4):
        phase = campaign.next_phase(worker_id)
        if phase is Phase.RATING:
            return
        session = campaign.assemble_phase_session(worker_id, phase)
        if phase is Phase.TRAINING:
            answers = {item.position: 3 for item in session.items}
        else:
            answers = scripted_phase_answers(campaign, session)
        campaign.submit_answers(
            session.id, answers, {item.position: 1.0 for item in session.items}
        )
