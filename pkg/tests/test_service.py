import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from p808kit import audio
from p808kit.campaign import Campaign, CampaignConfig, PhaseAssets
from p808kit.clips import Clip, ClipRole
from p808kit.errors import ParseError
from p808kit.eventlog import EventLog, read_events
from p808kit.localization import reference_catalog
from p808kit.service import CampaignStore, create_app
from p808kit.simulator import (
    RaterProfile,
    run_campaign,
    scripted_phase_answers,
    synthetic_truth,
)

from conftest import make_speech


def build_campaign_dir(tmp_path: Path, clips: int = 12, seed: int = 3) -> Path:
    """A small but real campaign directory: ledger plus WAV files."""
    directory = tmp_path / "campaign"
    clips_dir = directory / "clips"
    clips_dir.mkdir(parents=True)
    language = "en-US"

    def wav_clip(cid: str, role: ClipRole, seed: int, expected=None, nominal=None):
        buf = make_speech(duration=0.2, seed=seed)
        path = f"clips/{cid}.wav"
        audio.write_wav(directory / path, buf)
        return Clip(id=cid, role=role, language=language, path=path,
                    expected_answer=expected, nominal_quality=nominal)

    rating = [wav_clip(f"c{i:03d}", ClipRole.RATING, 100 + i) for i in range(clips)]
    gold = [
        wav_clip("gtop", ClipRole.GOLD, 201, expected=5),
        wav_clip("gbot", ClipRole.GOLD, 202, expected=1),
    ]
    trapping = [wav_clip(f"t{v}", ClipRole.TRAPPING, 300 + v, expected=v)
                for v in (1, 2, 3, 4, 5)]
    training = [wav_clip(f"x{v}", ClipRole.TRAINING, 400 + v, nominal=v)
                for v in (1, 2, 3, 4, 5)]
    setup_names = ["comp", "bw4", "bw9", "bw16", "level", "binaural", "cmpa", "cmpb"]
    setup = [wav_clip(name, ClipRole.SETUP, 500 + i) for i, name in enumerate(setup_names)]
    assets = PhaseAssets(
        comprehension_clip="comp",
        comprehension_keywords=("north", "wind", "stronger", "traveler"),
        bw_clips=("bw4", "bw9", "bw16"),
        level_clip="level",
        binaural_clip="binaural",
        binaural_digits="3 7 1 4",
        comparison_clips=("cmpa", "cmpb"),
    )
    config = CampaignConfig(language=language, block_size=4, seed=seed)

    def create(sink, clock):
        return Campaign.create(
            config, reference_catalog(), rating, gold, trapping, training, setup,
            assets, campaign_id="campaign", sink=sink, clock=clock,
        )

    store = CampaignStore.initialize(directory, create)
    store.close()
    return directory


def answer_session(doc, campaign_store, correct=True, trap_answer=None):
    """Build a valid answer body for a session document."""
    campaign = campaign_store.campaign
    session = campaign.sessions[doc["session_id"]]
    answers = []
    if doc["phase"] in ("qualification", "setup"):
        scripted = scripted_phase_answers(campaign, session)
        answers = [{"index": pos, "value": value} for pos, value in scripted.items()]
    else:
        for item in session.items:
            clip = campaign.clips[item.clip_ids[0]]
            if clip.role is ClipRole.TRAPPING:
                value = trap_answer if trap_answer else clip.expected_answer
            elif clip.role is ClipRole.GOLD:
                value = clip.expected_answer
            else:
                value = 3
            answers.append({"index": item.position, "value": value})
    playback = {str(item.position): 1.0 for item in session.items}
    return {"worker": session.worker_id, "answers": answers, "playback": playback}


@pytest.fixture
def store(tmp_path):
    directory = build_campaign_dir(tmp_path)
    store = CampaignStore(directory)
    yield store
    store.close()


@pytest.fixture
def client(store):
    return TestClient(create_app(store))


def walk_to_rating(client, store, worker):
    """Complete phases until a rating session is served; returns its document."""
    for _ in range(5):
        response = client.get(f"/api/campaign/campaign/next-session?worker={worker}")
        assert response.status_code == 200, response.text
        doc = response.json()
        if doc["phase"] == "rating":
            return doc
        body = answer_session(doc, store)
        assert client.post(doc["submit_url"], json=body).status_code == 200
    raise AssertionError("never reached the rating phase")


class TestNextSession:
    def test_new_worker_gets_localized_qualification(self, client):
        response = client.get("/api/campaign/campaign/next-session?worker=w1")
        assert response.status_code == 200
        doc = response.json()
        assert doc["phase"] == "qualification"
        assert doc["language"] == "en-US"
        assert "hearing" in doc["strings"]
        assert doc["scale"][0] == {"value": 5, "term": "Excellent"}
        kinds = [item["type"] for item in doc["items"]]
        assert kinds == ["attestation", "hearing", "comprehension", "bw"]

    def test_unknown_campaign_404(self, client):
        assert client.get("/api/campaign/nope/next-session?worker=w1").status_code == 404

    def test_idempotent_while_open(self, client):
        first = client.get("/api/campaign/campaign/next-session?worker=w1").json()
        second = client.get("/api/campaign/campaign/next-session?worker=w1").json()
        assert first["session_id"] == second["session_id"]

    def test_rating_session_has_block_plus_controls(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        assert len(doc["items"]) == 4 + 2
        assert all(item["type"] == "acr" for item in doc["items"])
        # roles must be indistinguishable in the document
        payload = json.dumps(doc)
        assert "gold" not in payload
        assert "trapping" not in payload

    def test_excluded_worker_409(self, client, store):
        worker = "w-bad"
        for _ in range(3):
            doc = walk_to_rating(client, store, worker)
            body = answer_session(doc, store, trap_answer=-1)
            # answer traps wrong: pick a valid but incorrect label
            campaign = store.campaign
            session = campaign.sessions[doc["session_id"]]
            for answer in body["answers"]:
                item = session.items[answer["index"]]
                clip = campaign.clips[item.clip_ids[0]]
                if clip.role is ClipRole.TRAPPING:
                    answer["value"] = 1 + (clip.expected_answer % 5)
            assert client.post(doc["submit_url"], json=body).status_code == 200
            client.post("/api/campaign/campaign/analyze")
        response = client.get("/api/campaign/campaign/next-session?worker=w-bad")
        assert response.status_code == 409

    def test_no_work_204(self, tmp_path):
        directory = build_campaign_dir(tmp_path, clips=4)
        store = CampaignStore(directory)
        client = TestClient(create_app(store))
        doc = walk_to_rating(client, store, "w1")
        body = answer_session(doc, store)
        client.post(doc["submit_url"], json=body)
        client.post("/api/campaign/campaign/analyze")
        # all four clips rated by this worker; nothing left for them
        response = client.get("/api/campaign/campaign/next-session?worker=w1")
        assert response.status_code == 204
        store.close()


class TestSubmitEndpoint:
    def test_submit_and_duplicate(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        body = answer_session(doc, store)
        first = client.post(doc["submit_url"], json=body)
        assert first.status_code == 200
        assert first.json()["telemetry"] == "present"
        assert client.post(doc["submit_url"], json=body).status_code == 409

    def test_incomplete_body_422(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        body = answer_session(doc, store)
        body["answers"] = body["answers"][:-1]
        assert client.post(doc["submit_url"], json=body).status_code == 422

    def test_missing_telemetry_accepted_with_marker(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        body = answer_session(doc, store)
        body.pop("playback")
        response = client.post(doc["submit_url"], json=body)
        assert response.status_code == 200
        assert response.json()["telemetry"] == "absent"

    def test_wrong_worker_403(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        body = answer_session(doc, store)
        body["worker"] = "someone-else"
        assert client.post(doc["submit_url"], json=body).status_code == 403

    def test_unknown_session_404(self, client):
        body = {"worker": "w1", "answers": []}
        assert client.post("/api/session/s999999/answers", json=body).status_code == 404

    def test_ledger_grows_by_submission(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        before = store.campaign._seq
        body = answer_session(doc, store)
        client.post(doc["submit_url"], json=body)
        events = read_events(store.events_path)
        assert events[-1].kind == "answers-submitted"
        assert events[-1].seq == before + 1


class TestDiscovery:
    def test_campaign_document(self, client):
        doc = client.get("/api/campaign").json()
        assert doc["campaign_id"] == "campaign"
        assert doc["language"] == "en-US"
        assert doc["strings"]["complete"]
        assert doc["strings"]["excluded"]

    def test_excluded_response_carries_localized_message(self, client, store):
        worker = "w-gone"
        for _ in range(3):
            doc = walk_to_rating(client, store, worker)
            body = answer_session(doc, store)
            campaign = store.campaign
            session = campaign.sessions[doc["session_id"]]
            for answer in body["answers"]:
                item = session.items[answer["index"]]
                clip = campaign.clips[item.clip_ids[0]]
                if clip.role is ClipRole.TRAPPING:
                    answer["value"] = 1 + (clip.expected_answer % 5)
            client.post(doc["submit_url"], json=body)
            client.post("/api/campaign/campaign/analyze")
        response = client.get(f"/api/campaign/campaign/next-session?worker={worker}")
        assert response.status_code == 409
        assert response.json()["message"].startswith("You can no longer")


class TestStatus:
    def test_fresh_campaign(self, client):
        doc = client.get("/api/campaign/campaign/status").json()
        assert doc["clips_complete"] == 0
        assert doc["acceptance_rate"] is None
        assert doc["round"] == 0

    def test_unknown_campaign(self, client):
        assert client.get("/api/campaign/nope/status").status_code == 404


class TestAudio:
    def test_authorized_fetch(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        url = doc["items"][0]["audio"][0]
        response = client.get(f"{url}?worker=w1")
        assert response.status_code == 200
        assert response.headers["content-type"] == "audio/wav"
        assert response.content[:4] == b"RIFF"

    def test_other_worker_403(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        url = doc["items"][0]["audio"][0]
        assert client.get(f"{url}?worker=w2").status_code == 403
        assert client.get(url).status_code == 403

    def test_unknown_clip_404(self, client):
        assert client.get("/audio/zzz?worker=w1").status_code == 404

    def test_head_gives_length_only(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        url = doc["items"][0]["audio"][0]
        response = client.request("HEAD", f"{url}?worker=w1")
        assert response.status_code == 200
        assert int(response.headers["content-length"]) > 0
        assert response.content == b""

    def test_range_request(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        url = doc["items"][0]["audio"][0]
        full = client.get(f"{url}?worker=w1").content
        response = client.get(f"{url}?worker=w1", headers={"Range": "bytes=0-99"})
        assert response.status_code == 206
        assert response.content == full[:100]
        assert response.headers["content-range"] == f"bytes 0-99/{len(full)}"
        tail = client.get(f"{url}?worker=w1", headers={"Range": f"bytes={len(full)-10}-"})
        assert tail.status_code == 206
        assert tail.content == full[-10:]
        bad = client.get(f"{url}?worker=w1", headers={"Range": f"bytes={len(full)}-"})
        assert bad.status_code == 416


class TestAnalyzeEndpoint:
    def test_analyze_decides_submissions(self, client, store):
        doc = walk_to_rating(client, store, "w1")
        client.post(doc["submit_url"], json=answer_session(doc, store))
        response = client.post("/api/campaign/campaign/analyze")
        assert response.status_code == 200
        payload = response.json()
        assert payload["decided"] == 1
        assert payload["decisions"][0]["decision"] == "accepted"


class TestPersistence:
    def run_recorded_campaign(self, tmp_path):
        events = []
        truth = synthetic_truth(10, seed=7)
        config = CampaignConfig(language="en-US", block_size=4, seed=7)
        population = {f"h{i:02d}": RaterProfile.honest(600 + i) for i in range(10)}
        population["s00"] = RaterProfile.spammer(990)
        run_campaign(config, truth, population, max_rounds=20, sink=events.append,
                     campaign_id="campaign")
        return events

    def test_crash_replay_every_prefix(self, tmp_path):
        events = self.run_recorded_campaign(tmp_path)
        # incremental ground truth: status after each applied event
        shell = Campaign()
        statuses = []
        for record in events:
            shell._seq = record.seq
            shell._apply(record)
            statuses.append(shell.status())

        directory = tmp_path / "replay"
        directory.mkdir()
        ledger = directory / "events.jsonl"
        for k in range(1, len(events) + 1):
            ledger.write_text(
                "".join(e.to_json() + "\n" for e in events[:k]), encoding="utf-8")
            store = CampaignStore(directory)
            assert store.campaign.status() == statuses[k - 1], f"prefix {k}"
            store.close()

    def test_torn_tail_ignored(self, tmp_path):
        events = self.run_recorded_campaign(tmp_path)
        directory = tmp_path / "torn"
        directory.mkdir()
        ledger = directory / "events.jsonl"
        body = "".join(e.to_json() + "\n" for e in events[:25])
        ledger.write_text(body + events[25].to_json()[: 40], encoding="utf-8")
        store = CampaignStore(directory)
        assert store.campaign._seq == 25
        store.close()

    def test_corrupt_middle_raises(self, tmp_path):
        events = self.run_recorded_campaign(tmp_path)
        directory = tmp_path / "corrupt"
        directory.mkdir()
        ledger = directory / "events.jsonl"
        lines = [e.to_json() for e in events[:20]]
        lines[10] = "{garbage"
        ledger.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(ParseError):
            CampaignStore(directory)

    def test_status_monotonic_over_replay(self, tmp_path):
        events = self.run_recorded_campaign(tmp_path)
        shell = Campaign()
        complete = 0
        for record in events:
            shell._seq = record.seq
            shell._apply(record)
            now = shell.status()["clips_complete"]
            assert now >= complete
            complete = now

    def test_simulator_outcome_matches_served_status(self, tmp_path):
        truth = synthetic_truth(10, seed=7)
        config = CampaignConfig(language="en-US", block_size=4, seed=7)
        population = {f"h{i:02d}": RaterProfile.honest(600 + i) for i in range(10)}
        directory = tmp_path / "served"
        directory.mkdir()
        with EventLog(directory / "events.jsonl") as log:
            outcome = run_campaign(
                config, truth, population, max_rounds=20, sink=log.append,
                campaign_id="campaign")
        store = CampaignStore(directory)
        client = TestClient(create_app(store))
        served = client.get("/api/campaign/campaign/status").json()
        assert served == outcome.status_report()
        store.close()
