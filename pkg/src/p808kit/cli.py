"""Command-line interface: prepare stimuli, validate catalogs, run campaigns."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import analysis as analysis_mod
from . import audio as audio_mod
from . import metrics as metrics_mod
from . import report as report_mod
from . import simulator as simulator_mod
from .campaign import Campaign, CampaignConfig, PhaseAssets
from .clips import Clip, ClipRole
from .errors import P808Error
from .eventlog import EventLog
from .localization import (
    CachedTtsClient,
    HttpTtsClient,
    StubTtsClient,
    TtsRequest,
    build_trapping_prompts,
    load_catalog,
    synthesize,
)
from .manifest import read_manifest, write_manifest
from .service import CLIPS_DIR, EVENTS_FILE, CampaignStore


@click.group()
def main():
    """Localized crowdsourced ACR listening tests, end to end."""


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--speech", "speech_path", required=True, type=click.Path(exists=True),
              help="Clean 48 kHz mono speech used as carrier for the generated clips.")
@click.option("--transcript", default="", help="Transcript of the speech clip; its words "
              "become the comprehension keywords.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--bw-snr", default=audio_mod.BW_TEST_SNR_DB, show_default=True, type=float)
@click.option("--tts", type=click.Choice(["stub", "http"]), default="stub", show_default=True)
@click.option("--tts-cache", type=click.Path(), default=None)
def prepare(manifest_path, catalog_path, speech_path, transcript, out_dir, seed,
            bw_snr, tts, tts_cache):
    """Generate bandwidth, comparison, trapping and setup clips for a manifest."""
    try:
        catalog = load_catalog(catalog_path)
        clips = read_manifest(manifest_path)
        speech = audio_mod.read_wav(speech_path)
        if speech.sample_rate != audio_mod.CAMPAIGN_RATE:
            raise P808Error(
                f"speech must be {audio_mod.CAMPAIGN_RATE} Hz, got {speech.sample_rate}"
            )
        out = Path(out_dir)
        (out / CLIPS_DIR).mkdir(parents=True, exist_ok=True)
        client = StubTtsClient() if tts == "stub" else HttpTtsClient()
        if tts_cache:
            client = CachedTtsClient(client, tts_cache)
        language = catalog.language

        def add(buf, role, expected=None, salt=""):
            cid = audio_mod.content_id(buf, salt)
            path = f"{CLIPS_DIR}/{cid}.wav"
            audio_mod.write_wav(out / path, buf)
            clip = Clip(id=cid, role=role, language=language, path=path,
                        expected_answer=expected)
            clips.append(clip)
            return cid

        assets = {}
        bw_ids = []
        for i, cutoff in enumerate(audio_mod.BW_TEST_CUTOFFS):
            buf = audio_mod.make_bw_test_clip(speech, cutoff, bw_snr, seed + i)
            bw_ids.append(add(buf, ClipRole.SETUP, salt=f"bw{cutoff}"))
        assets["bw_clips"] = bw_ids
        clean, noisy = audio_mod.make_comparison_pair(speech, seed + 100)
        assets["comparison_clips"] = [
            add(clean, ClipRole.SETUP, salt="cmpA"),
            add(noisy, ClipRole.SETUP, salt="cmpB"),
        ]
        assets["level_clip"] = add(speech, ClipRole.SETUP, salt="level")

        comp_noise = audio_mod.generate_wgn(speech.duration, speech.sample_rate, seed + 200)
        comprehension = audio_mod.mix_at_snr(speech, comp_noise, 10.0)
        assets["comprehension_clip"] = add(comprehension, ClipRole.SETUP, salt="comp")
        words = tuple(w for w in transcript.split() if len(w) > 2)
        assets["comprehension_keywords"] = list(words)

        import numpy as np
        digit_rng = np.random.default_rng(seed + 300)
        digits = " ".join(str(int(d)) for d in digit_rng.integers(0, 10, size=4))
        spoken = synthesize(client, TtsRequest(text=digits, language=language))
        assets["binaural_clip"] = add(spoken, ClipRole.SETUP, salt="binaural")
        assets["binaural_digits"] = digits

        for i, (label, text) in enumerate(build_trapping_prompts(catalog)):
            instruction = synthesize(client, TtsRequest(text=text, language=language))
            noise = audio_mod.make_trap_noise(seed + 400 + i)
            trap = audio_mod.make_trapping_clip(noise, instruction, label, language)
            path = f"{CLIPS_DIR}/{trap.id}.wav"
            audio_mod.write_wav(out / path, trap.audio)
            trap.path = path
            clips.append(trap)

        write_manifest(clips, out / "manifest.tsv")
        (out / "assets.json").write_text(json.dumps(assets, indent=2), encoding="utf-8")
        click.echo(f"wrote {out / 'manifest.tsv'} and {out / 'assets.json'}")
    except P808Error as exc:
        _fail(exc)


@main.group()
def localize():
    """Catalog tooling."""


@localize.command("validate")
@click.argument("catalog_path", type=click.Path(exists=True))
def localize_validate(catalog_path):
    """Validate a string catalog against the reference schema."""
    try:
        catalog = load_catalog(catalog_path)
    except P808Error as exc:
        _fail(exc)
    click.echo(
        f"OK {catalog.language} (version {catalog.version}, "
        f"{len(catalog.entries)} entries, {len(catalog.terminology)} terms)"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--assets", "assets_path", required=True, type=click.Path(exists=True))
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def init(config_path, manifest_path, assets_path, catalog_path, out_dir):
    """Create a campaign directory from a manifest, assets file and catalog."""
    try:
        config = CampaignConfig.from_dict(json.loads(Path(config_path).read_text()))
        catalog = load_catalog(catalog_path)
        clips = read_manifest(manifest_path)
        assets = PhaseAssets.from_dict(json.loads(Path(assets_path).read_text()))
        by_role = {role: [] for role in ClipRole}
        for clip in clips:
            by_role[clip.role].append(clip)

        def create(sink, clock):
            return Campaign.create(
                config, catalog,
                by_role[ClipRole.RATING], by_role[ClipRole.GOLD],
                by_role[ClipRole.TRAPPING], by_role[ClipRole.TRAINING],
                by_role[ClipRole.SETUP], assets,
                campaign_id=Path(out_dir).name, sink=sink, clock=clock,
            )

        CampaignStore.initialize(out_dir, create)
        click.echo(f"campaign initialized in {out_dir}")
    except P808Error as exc:
        _fail(exc)


@main.command()
@click.argument("campaign_dir", type=click.Path(exists=True))
def analyze(campaign_dir):
    """Run one analysis pass: decide submitted sessions, print MOS table."""
    try:
        store = CampaignStore(campaign_dir)
        campaign = store.campaign
        with store.lock:
            decisions = analysis_mod.run_analysis(campaign)
        click.echo(f"decided {len(decisions)} sessions (round {campaign.analysis_round})")
        for line in analysis_mod.decision_log_lines(campaign):
            click.echo(line)
        click.echo("clip\tmos\tci95\tn")
        for cid, result in sorted(analysis_mod.campaign_mos(campaign).items()):
            click.echo(f"{cid}\t{result.mean:.3f}\t{result.ci95_halfwidth:.3f}\t{result.n}")
        store.close()
    except P808Error as exc:
        _fail(exc)


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--campaign-dir", type=click.Path(), default=None,
              help="Also write the event ledger to this campaign directory.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def simulate(scenario_path, campaign_dir, out_path):
    """Run a simulated campaign from a scenario file and report the outcome."""
    try:
        scenario = simulator_mod.load_scenario(scenario_path)
        sink = None
        log = None
        if campaign_dir:
            directory = Path(campaign_dir)
            directory.mkdir(parents=True, exist_ok=True)
            events = directory / EVENTS_FILE
            if events.exists():
                raise P808Error(f"campaign already exists at {events}")
            log = EventLog(events)
            sink = log.append
        outcome = simulator_mod.run_campaign(
            scenario["config"], scenario["truth"], scenario["population"],
            max_rounds=scenario["max_rounds"], sink=sink,
            campaign_id=Path(campaign_dir).name if campaign_dir else "sim",
        )
        if log:
            log.close()
        status = outcome.status_report()
        report = {
            "complete": outcome.complete,
            "rounds": outcome.rounds,
            "status": status,
            "per_clip_mos": {
                cid: {"mean": r.mean, "ci95": r.ci95_halfwidth, "n": r.n}
                for cid, r in sorted(outcome.per_clip_mos.items())
            },
        }
        text = json.dumps(report, indent=2)
        if out_path:
            Path(out_path).write_text(text, encoding="utf-8")
            click.echo(f"wrote {out_path}")
        else:
            click.echo(text)
    except P808Error as exc:
        _fail(exc)


@main.group("metrics")
def metrics_group():
    """Phone-fidelity metrics and hallucination flags."""


@metrics_group.command("lps")
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True))
@click.option("--hyp", "hyp_path", required=True, type=click.Path(exists=True))
@click.option("--per-utterance", is_flag=True, default=False)
def metrics_lps(ref_path, hyp_path, per_utterance):
    """Mean Levenshtein phone similarity between two phone files."""
    try:
        ref = metrics_mod.read_phone_file(ref_path)
        hyp = metrics_mod.read_phone_file(hyp_path)
        mean, per_utt = metrics_mod.lps_corpus(ref, hyp)
    except P808Error as exc:
        _fail(exc)
    if per_utterance:
        for utt, value in per_utt.items():
            click.echo(f"{utt}\t{value:.6f}")
    click.echo(f"lps\t{mean:.6f}\t({len(per_utt)} utterances)")


@metrics_group.command("flags")
@click.option("--table", "table_path", required=True, type=click.Path(exists=True))
@click.option("--quartile", default=0.25, show_default=True, type=float)
def metrics_flags(table_path, quartile):
    """Flag models whose reference-free scores contradict phone fidelity."""
    try:
        table = metrics_mod.read_metric_csv(table_path)
        rule = metrics_mod.QuartileRule(quartile=quartile)
        flags = report_mod.report_flags(table, rule)
    except P808Error as exc:
        _fail(exc)
    if flags:
        click.echo("hallucination-suspect models: " + ", ".join(flags))
    else:
        click.echo("no hallucination-suspect models")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--table", "table_path", type=click.Path(exists=True), default=None,
              help="Pre-aggregated metric table CSV.")
@click.option("--mos", "mos_path", type=click.Path(exists=True), default=None)
@click.option("--objective", "objective_path", type=click.Path(exists=True), default=None)
def report(spec_path, out_dir, table_path, mos_path, objective_path):
    """Render grouped metric tables (text and CSV) per a report spec."""
    try:
        spec = report_mod.ReportSpec.from_dict(json.loads(Path(spec_path).read_text()))
        if table_path:
            table = metrics_mod.read_metric_csv(table_path)
        elif mos_path and objective_path:
            table = report_mod.ingest_results(
                report_mod.read_mos_csv(mos_path),
                report_mod.read_objective_csv(objective_path),
            )
        else:
            raise P808Error("give either --table or both --mos and --objective")
        rendered = report_mod.render_table(table, spec)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"report-{spec.grouping}.txt").write_text(rendered.text, encoding="utf-8")
        (out / f"report-{spec.grouping}.csv").write_text(rendered.csv, encoding="utf-8")
        click.echo(rendered.text)
        if spec.flag_rule is not None:
            flags = report_mod.report_flags(table, spec.flag_rule)
            line = ("hallucination-suspect models: " + ", ".join(flags)) if flags \
                else "no hallucination-suspect models"
            (out / "flags.txt").write_text(line + "\n", encoding="utf-8")
            click.echo(line)
    except P808Error as exc:
        _fail(exc)


@main.command()
@click.argument("campaign_dir", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def export(campaign_dir, out_path):
    """Write assembled sessions as self-contained records for offline platforms."""
    from .campaign import export_sessions

    try:
        store = CampaignStore(campaign_dir)
        export_sessions(store.campaign, out_path)
        store.close()
        click.echo(f"wrote {out_path}")
    except P808Error as exc:
        _fail(exc)


@main.command()
@click.option("--campaign-dir", required=True, type=click.Path(exists=True))
@click.option("--listen", default="127.0.0.1:8808", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Static rating-client build to host at /.")
def serve(campaign_dir, listen, ui_dir):
    """Serve listening sessions over HTTP."""
    from .service import serve as serve_fn

    host, _, port = listen.rpartition(":")
    try:
        serve_fn(campaign_dir, host=host or "127.0.0.1", port=int(port), ui_dir=ui_dir)
    except P808Error as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
