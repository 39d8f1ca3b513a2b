"""Per-language resource bundles and synthetic spoken instructions.

A catalog is a flat UTF-8 key/value file. Header keys start with ``@``
(language, version, schema); ``term.``-prefixed keys form the terminology
map that pins important keywords (the five quality labels) to one canonical
translation; everything else is an instruction entry. Entries reference
parameters as ``{name}`` and terminology as ``{term:key}``; parameter
substitution runs first, so ``{term:label.{label}}`` resolves through the
terminology for whatever label was passed in.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Protocol

import numpy as np

from . import audio
from .audio import AudioBuffer
from .errors import (
    ConfigurationError,
    ConsistencyError,
    InvalidArgumentError,
    ParseError,
    RenderError,
    SchemaError,
    TransportError,
)

REFERENCE_SCHEMA_ID = "acr-v1"

TERM_PREFIX = "term."
LABEL_TERM_KEYS = tuple(f"label.{v}" for v in (1, 2, 3, 4, 5))

#: Instruction keys every catalog must provide, reconstructed from the
#: screens of a full ACR campaign (qualification, setup, training, rating,
#: trapping). Extend here if the session flow grows new screens.
REQUIRED_ENTRY_KEYS = (
    "session.rules",
    "session.submit",
    "session.complete",
    "session.excluded",
    "qualification.intro",
    "qualification.hearing.question",
    "qualification.fluency.attestation",
    "qualification.comprehension.instructions",
    "qualification.bandwidth.instructions",
    "setup.intro",
    "setup.level.instructions",
    "setup.binaural.instructions",
    "setup.comparison.instructions",
    "training.intro",
    "rating.intro",
    "rating.question",
    "trapping.prompt",
)

_PARAM_RE = re.compile(r"\{(?!term:)([A-Za-z_][A-Za-z0-9_.]*)\}")
_TERM_RE = re.compile(r"\{term:([^{}]+)\}")
_LEFTOVER_RE = re.compile(r"\{[^{}]*\}")
_LANGUAGE_RE = re.compile(r"^[a-z]{2,3}(-[A-Za-z0-9]{2,8})*$")


def schema_fingerprint() -> str:
    """Hash of the required-key inventory; catalogs may pin it after ``@``."""
    blob = "\n".join(sorted(REQUIRED_ENTRY_KEYS + LABEL_TERM_KEYS))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class CategoryLabel:
    """One point of the five-point ACR scale, with its localized term."""

    value: int
    term: str

    def __post_init__(self):
        if self.value not in (1, 2, 3, 4, 5):
            raise InvalidArgumentError(f"label value must be 1..5, got {self.value!r}")
        if not self.term:
            raise InvalidArgumentError("label term must be non-empty")


@dataclass
class StringCatalog:
    language: str
    version: str
    schema: str
    entries: Dict[str, str] = field(default_factory=dict)
    terminology: Dict[str, str] = field(default_factory=dict)

    def labels(self) -> list[CategoryLabel]:
        """The five scale labels, best (5) first."""
        out = []
        for value in (5, 4, 3, 2, 1):
            term = self.terminology.get(f"label.{value}")
            if term is None:
                raise ConsistencyError(
                    f"terminology lacks label.{value}", keys=(f"label.{value}",)
                )
            out.append(CategoryLabel(value, term))
        return out


def parse_catalog(text: str, source: str = "<string>") -> StringCatalog:
    """Parse without validating; :func:`load_catalog` is the checked entry."""
    header: Dict[str, str] = {}
    entries: Dict[str, str] = {}
    terminology: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ParseError(f"{source}:{lineno}: expected 'key: value', got {raw!r}")
        key, value = line.split(":", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ParseError(f"{source}:{lineno}: empty key")
        if key.startswith("@"):
            header[key[1:]] = value
        elif key.startswith(TERM_PREFIX):
            terminology[key[len(TERM_PREFIX):]] = value
        else:
            entries[key] = value
    missing_header = [h for h in ("language", "version", "schema") if h not in header]
    if missing_header:
        raise SchemaError(
            f"{source}: missing header keys: {', '.join('@' + k for k in missing_header)}",
            keys=missing_header,
        )
    return StringCatalog(
        language=header["language"],
        version=header["version"],
        schema=header["schema"],
        entries=entries,
        terminology=terminology,
    )


def validate_catalog(catalog: StringCatalog) -> None:
    """Check completeness and terminology rules; names every violation."""
    schema = catalog.schema
    if "@" in schema:
        schema, fp = schema.split("@", 1)
        if fp != schema_fingerprint():
            raise SchemaError(
                f"schema fingerprint {fp!r} does not match {schema_fingerprint()!r}",
                keys=("schema",),
            )
    if schema != REFERENCE_SCHEMA_ID:
        raise SchemaError(f"unknown schema {catalog.schema!r}", keys=("schema",))
    if not _LANGUAGE_RE.match(catalog.language):
        raise SchemaError(
            f"language {catalog.language!r} is not a BCP-47 tag", keys=("language",)
        )

    missing = [k for k in REQUIRED_ENTRY_KEYS if k not in catalog.entries]
    missing += [
        TERM_PREFIX + k for k in LABEL_TERM_KEYS if k not in catalog.terminology
    ]
    empty = [k for k, v in catalog.entries.items() if not v]
    empty += [TERM_PREFIX + k for k, v in catalog.terminology.items() if not v]
    if missing or empty:
        parts = []
        if missing:
            parts.append(f"missing keys: {', '.join(sorted(missing))}")
        if empty:
            parts.append(f"empty values: {', '.join(sorted(empty))}")
        raise SchemaError("; ".join(parts), keys=tuple(sorted(missing + empty)))

    violations = []
    # No two concepts may share a term, or answers become ambiguous.
    seen: Dict[str, str] = {}
    for key, term in sorted(catalog.terminology.items()):
        if term in seen:
            violations.append(f"term {term!r} used by both {seen[term]!r} and {key!r}")
        seen[term] = key
    # Entry text must reach label terms through placeholders, never literally.
    for key, text in sorted(catalog.entries.items()):
        stripped = _TERM_RE.sub(" ", text)
        for concept, term in catalog.terminology.items():
            if re.search(rf"(?<![\w]){re.escape(term)}(?![\w])", stripped):
                violations.append(
                    f"entry {key!r} spells out the {concept!r} term {term!r}; "
                    f"use {{term:{concept}}}"
                )
    # Static terminology references must resolve.
    for key, text in sorted(catalog.entries.items()):
        for ref in _TERM_RE.findall(text):
            if "{" in ref or "}" in ref:
                continue  # parameterized, resolved at render time
            if ref not in catalog.terminology:
                violations.append(f"entry {key!r} references unknown term {ref!r}")
    if violations:
        raise ConsistencyError("; ".join(violations), keys=tuple(violations))


def load_catalog(path) -> StringCatalog:
    """Read, parse and fully validate a catalog file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read catalog {path}: {exc}") from exc
    catalog = parse_catalog(text, source=str(path))
    validate_catalog(catalog)
    return catalog


def dump_catalog(catalog: StringCatalog) -> str:
    lines = [
        f"@language: {catalog.language}",
        f"@version: {catalog.version}",
        f"@schema: {catalog.schema}",
        "",
    ]
    for key in sorted(catalog.terminology):
        lines.append(f"{TERM_PREFIX}{key}: {catalog.terminology[key]}")
    lines.append("")
    for key in sorted(catalog.entries):
        lines.append(f"{key}: {catalog.entries[key]}")
    return "\n".join(lines) + "\n"


def render_instruction(
    catalog: StringCatalog, key: str, params: Optional[Mapping[str, object]] = None
) -> str:
    """Substitute ``{param}`` then ``{term:...}`` placeholders in an entry."""
    if key not in catalog.entries:
        raise RenderError(f"catalog has no entry {key!r}")
    params = dict(params or {})
    text = catalog.entries[key]

    def sub_param(match: re.Match) -> str:
        name = match.group(1)
        if name not in params:
            return match.group(0)  # reported below if it survives
        return str(params[name])

    text = _PARAM_RE.sub(sub_param, text)

    def sub_term(match: re.Match) -> str:
        concept = match.group(1)
        if concept not in catalog.terminology:
            raise ConsistencyError(
                f"entry {key!r} needs unknown term {concept!r}", keys=(concept,)
            )
        return catalog.terminology[concept]

    text = _TERM_RE.sub(sub_term, text)
    leftovers = _LEFTOVER_RE.findall(text)
    if leftovers:
        raise RenderError(f"unbound placeholders in {key!r}: {', '.join(leftovers)}")
    return text


def build_trapping_prompts(catalog: StringCatalog) -> list[tuple[CategoryLabel, str]]:
    """One rendered trapping prompt per scale label, worst to best."""
    prompts = []
    for label in sorted(catalog.labels(), key=lambda l: l.value):
        text = render_instruction(catalog, "trapping.prompt", {"label": label.value})
        prompts.append((label, text))
    texts = [t for _, t in prompts]
    if len(set(texts)) != len(texts):
        raise ConsistencyError("trapping prompts are not pairwise distinct")
    return prompts


def reference_catalog() -> StringCatalog:
    """The shipped source-language (en-US) catalog; doubles as the schema."""
    catalog = StringCatalog(
        language="en-US",
        version="1",
        schema=REFERENCE_SCHEMA_ID,
        entries={
            "session.rules": (
                "Listen to each clip in full over headphones and rate the overall "
                "quality of what you hear. Answer every item before submitting."
            ),
            "session.submit": "Submit answers",
            "session.complete": (
                "There are no more clips for you to rate. Thank you for participating."
            ),
            "session.excluded": (
                "You can no longer take part in this study. Thank you for your time."
            ),
            "qualification.intro": (
                "Before rating any audio you will complete a short qualification: "
                "a hearing self-report, a listening comprehension check, and a "
                "bandwidth discrimination check."
            ),
            "qualification.hearing.question": (
                "Do you have normal hearing, and are you listening over headphones "
                "in a quiet room?"
            ),
            "qualification.fluency.attestation": (
                "I confirm that I am fluent in the language spoken in these recordings."
            ),
            "qualification.comprehension.instructions": (
                "Listen to the following recording and type the sentence you hear."
            ),
            "qualification.bandwidth.instructions": (
                "Listen to the three clips. Order them from the one with the most "
                "audible noise to the one with the least."
            ),
            "setup.intro": "We will now check your playback setup and environment.",
            "setup.level.instructions": (
                "Play the reference clip and adjust your volume to a comfortable "
                "level. Confirm that you can hear it clearly."
            ),
            "setup.binaural.instructions": (
                "Play the clip and type the digits you hear, in order, separated "
                "by spaces."
            ),
            "setup.comparison.instructions": (
                "Play both clips. Select the one with the better audio quality."
            ),
            "training.intro": (
                "The next clips are for practice and cover the full range from "
                "{term:label.1} to {term:label.5}. Rate each one; these answers "
                "calibrate your scale."
            ),
            "rating.intro": "Rate the overall quality of each clip.",
            "rating.question": "How do you rate the overall quality of this clip?",
            "trapping.prompt": (
                "This is an interruption: Please select the answer {label}"
            ),
        },
        terminology={
            "label.5": "Excellent",
            "label.4": "Good",
            "label.3": "Fair",
            "label.2": "Poor",
            "label.1": "Bad",
        },
    )
    validate_catalog(catalog)
    return catalog


# --- Text-to-speech clients ---

ENDPOINT_ENV = "P808KIT_TTS_ENDPOINT"
TOKEN_ENV = "P808KIT_TTS_TOKEN"


@dataclass(frozen=True)
class TtsRequest:
    text: str
    language: str
    voice: Optional[str] = None

    def __post_init__(self):
        if not self.text:
            raise InvalidArgumentError("TTS text must be non-empty")
        if not self.language:
            raise InvalidArgumentError("TTS language must be non-empty")


class TtsClient(Protocol):
    backend_id: str

    def synthesize(self, request: TtsRequest) -> AudioBuffer: ...


class StubTtsClient:
    """Offline backend: a deterministic tone sequence keyed on (text, language).

    Useful wherever a pipeline needs spoken-instruction placeholders without
    network access; distinct texts map to distinct audio with overwhelming
    probability.
    """

    backend_id = "stub"

    def __init__(self, languages: Optional[Iterable[str]] = None,
                 sample_rate: int = audio.CAMPAIGN_RATE):
        self.languages = frozenset(languages) if languages is not None else None
        self.sample_rate = sample_rate

    def synthesize(self, request: TtsRequest) -> AudioBuffer:
        if self.languages is not None and request.language not in self.languages:
            raise ConfigurationError(f"no stub voice for language {request.language!r}")
        digest = hashlib.sha256(
            f"{request.language}\x00{request.text}".encode("utf-8")
        ).digest()
        rate = self.sample_rate
        tone_len = int(0.12 * rate)
        gap = np.zeros(int(0.03 * rate))
        pieces = []
        t = np.arange(tone_len) / rate
        ramp = np.minimum(1.0, np.minimum(t, t[::-1]) / 0.005)  # click-free edges
        for byte in digest[:8]:
            freq = 200.0 + (byte / 255.0) * 1800.0
            pieces.append(0.4 * np.sin(2 * np.pi * freq * t) * ramp)
            pieces.append(gap)
        return AudioBuffer(np.concatenate(pieces), rate)


class HttpTtsClient:
    """Speaks to a TTS endpoint: POST {text, language, voice}, WAV bytes back."""

    def __init__(
        self,
        endpoint: Optional[str] = None,
        voices: Optional[Mapping[str, str]] = None,
        token: Optional[str] = None,
        timeout: float = 30.0,
    ):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not self.endpoint:
            raise ConfigurationError(
                f"no TTS endpoint configured (set {ENDPOINT_ENV} or pass endpoint=)"
            )
        self.voices = dict(voices or {})
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.timeout = timeout
        self.backend_id = f"http:{self.endpoint}"

    def synthesize(self, request: TtsRequest) -> AudioBuffer:
        import httpx

        voice = request.voice or self.voices.get(request.language)
        if voice is None:
            raise ConfigurationError(
                f"no voice configured for language {request.language!r}"
            )
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            response = httpx.post(
                self.endpoint,
                json={"text": request.text, "language": request.language, "voice": voice},
                headers=headers,
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"TTS backend unreachable: {exc}") from exc
        if response.status_code >= 500:
            raise TransportError(f"TTS backend error {response.status_code}")
        if response.status_code != 200:
            raise ConfigurationError(
                f"TTS backend rejected request: {response.status_code} {response.text[:200]}"
            )
        return audio.read_wav_bytes(response.content)


class CachedTtsClient:
    """Disk cache keyed by (backend, voice, text hash).

    Writes go to a temp file then an atomic rename, so concurrent campaign
    builders never observe a partial WAV.
    """

    def __init__(self, inner: TtsClient, cache_dir):
        self.inner = inner
        self.cache_dir = str(cache_dir)
        self.backend_id = f"cached:{inner.backend_id}"
        os.makedirs(self.cache_dir, exist_ok=True)

    def _key(self, request: TtsRequest) -> str:
        voice = request.voice or ""
        blob = f"{self.inner.backend_id}\x00{voice}\x00{request.language}\x00{request.text}"
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def synthesize(self, request: TtsRequest) -> AudioBuffer:
        path = os.path.join(self.cache_dir, self._key(request) + ".wav")
        if os.path.exists(path):
            return audio.read_wav(path)
        buf = self.inner.synthesize(request)
        tmp = path + f".tmp.{os.getpid()}"
        audio.write_wav(tmp, buf)
        os.replace(tmp, path)
        return buf


def synthesize(client: TtsClient, request: TtsRequest) -> AudioBuffer:
    """Run one TTS request through a client, normalizing the result rate check."""
    buf = client.synthesize(request)
    if buf.sample_rate != audio.CAMPAIGN_RATE:
        raise ConfigurationError(
            f"TTS backend returned {buf.sample_rate} Hz audio; campaigns are "
            f"{audio.CAMPAIGN_RATE} Hz and resampling is out of scope"
        )
    return buf
