#!/usr/bin/env python3
"""Build a localized fixture campaign and serve it for the frontend e2e test.

Usage: serve_fixture.py <directory> <port>

Writes hints.json next to the ledger: the answers a human listener would
give (gold/trapping expectations, comprehension keywords, digit string,
bandwidth order). The test driver reads it; the client under test does not.
"""

import json
import sys
from pathlib import Path

import numpy as np
import uvicorn

from p808kit import audio
from p808kit.campaign import Campaign, CampaignConfig, PhaseAssets
from p808kit.clips import Clip, ClipRole
from p808kit.localization import StringCatalog, reference_catalog, validate_catalog
from p808kit.service import CampaignStore, create_app

LANGUAGE = "de-DE"
KEYWORDS = ("nordwind", "sonne", "wanderer", "mantel")
DIGITS = "3 7 1 4"


def german_catalog() -> StringCatalog:
    base = reference_catalog()
    catalog = StringCatalog(
        language=LANGUAGE,
        version="1",
        schema=base.schema,
        entries={
            "session.rules": (
                "Hören Sie jeden Clip vollständig über Kopfhörer an und bewerten "
                "Sie die Gesamtqualität. Beantworten Sie jede Frage vor dem Absenden."
            ),
            "session.submit": "Antworten absenden",
            "session.complete": (
                "Es gibt keine weiteren Clips für Sie. Vielen Dank für Ihre Teilnahme."
            ),
            "session.excluded": (
                "Sie können an dieser Studie nicht mehr teilnehmen. Danke für Ihre Zeit."
            ),
            "qualification.intro": (
                "Bevor Sie Audio bewerten, absolvieren Sie eine kurze Eignungsprüfung."
            ),
            "qualification.hearing.question": (
                "Hören Sie normal und verwenden Sie Kopfhörer in einer ruhigen Umgebung?"
            ),
            "qualification.fluency.attestation": (
                "Ich bestätige, dass ich die Sprache dieser Aufnahmen fließend spreche."
            ),
            "qualification.comprehension.instructions": (
                "Hören Sie die folgende Aufnahme an und tippen Sie den Satz ein."
            ),
            "qualification.bandwidth.instructions": (
                "Hören Sie die drei Clips an und ordnen Sie sie vom stärksten zum "
                "schwächsten Rauschen."
            ),
            "setup.intro": "Wir prüfen nun Ihre Wiedergabe und Umgebung.",
            "setup.level.instructions": (
                "Spielen Sie den Referenzclip ab und stellen Sie eine angenehme "
                "Lautstärke ein. Bestätigen Sie, dass Sie ihn deutlich hören."
            ),
            "setup.binaural.instructions": (
                "Spielen Sie den Clip ab und tippen Sie die gehörten Ziffern der "
                "Reihe nach ein, durch Leerzeichen getrennt."
            ),
            "setup.comparison.instructions": (
                "Spielen Sie beide Clips ab und wählen Sie den mit der besseren "
                "Tonqualität."
            ),
            "training.intro": (
                "Die folgenden Clips dienen zur Übung und decken die Spanne von "
                "{term:label.1} bis {term:label.5} ab."
            ),
            "rating.intro": "Bewerten Sie die Gesamtqualität jedes Clips.",
            "rating.question": "Wie bewerten Sie die Gesamtqualität dieses Clips?",
            "trapping.prompt": (
                "Dies ist eine Unterbrechung: Bitte wählen Sie die Antwort {label}"
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


def tone(seed: int, duration: float = 0.3) -> audio.AudioBuffer:
    rng = np.random.default_rng(seed)
    n = int(duration * audio.CAMPAIGN_RATE)
    t = np.arange(n) / audio.CAMPAIGN_RATE
    freq = rng.uniform(200, 1500)
    samples = 0.4 * np.sin(2 * np.pi * freq * t)
    return audio.AudioBuffer(samples, audio.CAMPAIGN_RATE)


def build(directory: Path) -> CampaignStore:
    clips_dir = directory / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)

    def wav_clip(cid, role, seed, expected=None, nominal=None):
        buf = tone(seed)
        path = f"clips/{cid}.wav"
        audio.write_wav(directory / path, buf)
        return Clip(id=cid, role=role, language=LANGUAGE, path=path,
                    expected_answer=expected, nominal_quality=nominal)

    rating = [wav_clip(f"c{i:03d}", ClipRole.RATING, 100 + i) for i in range(8)]
    gold = [
        wav_clip("gtop", ClipRole.GOLD, 201, expected=5),
        wav_clip("gbot", ClipRole.GOLD, 202, expected=1),
    ]
    trapping = [wav_clip(f"t{v}", ClipRole.TRAPPING, 300 + v, expected=v)
                for v in (1, 2, 3, 4, 5)]
    training = [wav_clip(f"x{v}", ClipRole.TRAINING, 400 + v, nominal=v)
                for v in (1, 2, 3, 4, 5)]
    setup_names = ["comp", "bw4", "bw9", "bw16", "level", "binaural", "cmpa", "cmpb"]
    setup = [wav_clip(name, ClipRole.SETUP, 500 + i)
             for i, name in enumerate(setup_names)]
    assets = PhaseAssets(
        comprehension_clip="comp",
        comprehension_keywords=KEYWORDS,
        bw_clips=("bw4", "bw9", "bw16"),
        level_clip="level",
        binaural_clip="binaural",
        binaural_digits=DIGITS,
        comparison_clips=("cmpa", "cmpb"),
    )
    config = CampaignConfig(language=LANGUAGE, block_size=4, seed=23)

    def create(sink, clock):
        return Campaign.create(
            config, german_catalog(), rating, gold, trapping, training, setup,
            assets, campaign_id="campaign", sink=sink, clock=clock,
        )

    store = CampaignStore.initialize(directory, create)
    hints = {
        "keywords": " ".join(KEYWORDS),
        "digits": DIGITS,
        "bwNoisiestFirst": ["bw4", "bw9", "bw16"],
        "comparisonCleaner": "cmpa",
        "expectedAnswers": {c.id: c.expected_answer for c in gold + trapping},
    }
    (directory / "hints.json").write_text(json.dumps(hints, indent=2))
    return store


def main() -> None:
    directory = Path(sys.argv[1])
    port = int(sys.argv[2])
    store = build(directory)
    app = create_app(store)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
