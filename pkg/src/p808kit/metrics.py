"""Phone-fidelity metrics and the hallucination crossover detector.

LPD normalizes the phone edit distance by the reference length and clamps
at 1, so LPS = 1 - LPD always lands in [0, 1]. The detector flags systems
whose reference-free scores (MOS, DNSMOS, NISQA) rank in the top quartile
while their phone fidelity (LPS) ranks in the bottom quartile: natural
sounding output that says the wrong thing.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .errors import InvalidArgumentError, JoinError, ParseError, SchemaError

MODEL_TYPES = ("D", "G", "H", "U")
#: Language value marking a row that holds metrics pooled over all languages.
ALL_LANGUAGES = "all"
#: Model-type marker for the unprocessed (noisy input) reference row.
UNPROCESSED_TYPE = "-"

UNIT_INTERVAL_METRICS = ("lps", "estoi")
CANONICAL_METRICS = ("mos", "pesq", "dnsmos", "nisqa", "estoi", "lps")


@dataclass(frozen=True)
class PhoneSequence:
    tokens: Tuple[str, ...]
    language: str = ""

    def __post_init__(self):
        if any(not t for t in self.tokens):
            raise InvalidArgumentError("phone symbols must be non-empty strings")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @classmethod
    def from_text(cls, text: str, language: str = "") -> "PhoneSequence":
        return cls(tuple(text.split()), language)

    def __len__(self) -> int:
        return len(self.tokens)


def _tokens(seq: Union[PhoneSequence, Sequence[str]]) -> Tuple[str, ...]:
    if isinstance(seq, PhoneSequence):
        return seq.tokens
    return tuple(seq)


def levenshtein(a: Union[PhoneSequence, Sequence[str]],
                b: Union[PhoneSequence, Sequence[str]]) -> int:
    """Minimal insertions, deletions and substitutions turning ``a`` into ``b``."""
    r, h = _tokens(a), _tokens(b)
    previous = list(range(len(h) + 1))
    current = [0] * (len(h) + 1)
    for i in range(1, len(r) + 1):
        current[0] = i
        for j in range(1, len(h) + 1):
            if r[i - 1] == h[j - 1]:
                current[j] = previous[j - 1]
            else:
                current[j] = 1 + min(previous[j - 1], previous[j], current[j - 1])
        previous, current = current, previous
    return previous[-1]


def lpd(ref: Union[PhoneSequence, Sequence[str]],
        hyp: Union[PhoneSequence, Sequence[str]]) -> float:
    """Levenshtein phone distance, normalized by reference length, clamped to 1."""
    r = _tokens(ref)
    if not r:
        raise InvalidArgumentError("reference phone sequence must be non-empty")
    return min(1.0, levenshtein(r, hyp) / len(r))


def lps(ref: Union[PhoneSequence, Sequence[str]],
        hyp: Union[PhoneSequence, Sequence[str]]) -> float:
    """Levenshtein phone similarity: 1 - LPD, in [0, 1]."""
    return 1.0 - lpd(ref, hyp)


def lps_corpus(
    ref: Mapping[str, PhoneSequence], hyp: Mapping[str, PhoneSequence]
) -> Tuple[float, Dict[str, float]]:
    """Per-utterance LPS plus its mean over the corpus.

    Reference and hypothesis files must cover the same utterance ids.
    """
    orphans = sorted(set(ref) ^ set(hyp))
    if orphans:
        raise JoinError(
            f"{len(orphans)} utterances present on only one side", orphans=orphans
        )
    if not ref:
        raise InvalidArgumentError("empty phone corpora")
    per_utt = {utt: lps(ref[utt], hyp[utt]) for utt in sorted(ref)}
    return statistics.fmean(per_utt.values()), per_utt


def read_phone_file(path, language: str = "") -> Dict[str, PhoneSequence]:
    """Read ``utterance-id<TAB>space-separated-phones`` lines."""
    out: Dict[str, PhoneSequence] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ParseError(f"{path}:{lineno}: expected 'utt<TAB>phones'")
            utt, phones = line.split("\t", 1)
            if utt in out:
                raise ParseError(f"{path}:{lineno}: duplicate utterance {utt!r}")
            out[utt] = PhoneSequence.from_text(phones, language)
    return out


def write_phone_file(path, sequences: Mapping[str, PhoneSequence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt in sorted(sequences):
            fh.write(f"{utt}\t{' '.join(sequences[utt].tokens)}\n")


# --- metric tables -----------------------------------------------------


@dataclass
class MetricRow:
    """Mean metric values for one (model, language) cell.

    ``n`` is the number of utterances behind the means; ``m2`` holds the sum
    of squared deviations per metric (Welford form) so groups can be merged
    without the raw scores.
    """

    model: str
    model_type: str
    language: str
    values: Dict[str, float]
    n: int = 1
    m2: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.model_type not in MODEL_TYPES + (UNPROCESSED_TYPE,):
            raise InvalidArgumentError(
                f"model type must be one of {MODEL_TYPES} or {UNPROCESSED_TYPE!r}, "
                f"got {self.model_type!r}"
            )
        if self.n < 1:
            raise InvalidArgumentError("row must aggregate at least one utterance")
        for metric in UNIT_INTERVAL_METRICS:
            v = self.values.get(metric)
            if v is not None and not (0.0 <= v <= 1.0):
                raise InvalidArgumentError(f"{metric} value {v} outside [0, 1]")
        v = self.values.get("mos")
        if v is not None and not (1.0 <= v <= 5.0):
            raise InvalidArgumentError(f"mos value {v} outside [1, 5]")


@dataclass
class MetricTable:
    rows: List[MetricRow]

    def models(self) -> List[str]:
        seen: Dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.model, None)
        return list(seen)

    def languages(self) -> List[str]:
        seen: Dict[str, None] = {}
        for row in self.rows:
            if row.language != ALL_LANGUAGES:
                seen.setdefault(row.language, None)
        return list(seen)

    def model_type(self, model: str) -> str:
        for row in self.rows:
            if row.model == model:
                return row.model_type
        raise InvalidArgumentError(f"unknown model {model!r}")

    def model_rows(self, model: str) -> List[MetricRow]:
        return [row for row in self.rows if row.model == model]

    def overall(self, model: str, metric: str) -> Optional[float]:
        """Pooled value of a metric for a model.

        A pre-aggregated ``all``-language row wins; otherwise the mean of the
        per-language rows, weighted by utterance count.
        """
        rows = self.model_rows(model)
        for row in rows:
            if row.language == ALL_LANGUAGES and metric in row.values:
                return row.values[metric]
        cells = [(row.values[metric], row.n) for row in rows
                 if row.language != ALL_LANGUAGES and metric in row.values]
        if not cells:
            return None
        weights = [n for _, n in cells]
        if len(set(weights)) == 1:
            return statistics.fmean(v for v, _ in cells)
        return sum(v * n for v, n in cells) / sum(weights)


@dataclass(frozen=True)
class QuartileRule:
    """Crossover rule: high reference-free rank, low phone-fidelity rank.

    Membership uses competition ranks (ties share the best rank), so border
    ties fall inside the quartile: ambiguous cases get flagged for review
    rather than waved through.
    """

    quartile: float = 0.25
    high_metrics: Tuple[str, ...] = ("mos", "dnsmos", "nisqa")
    low_metric: str = "lps"

    def __post_init__(self):
        if not (0.0 < self.quartile < 0.5):
            raise InvalidArgumentError("quartile fraction must be in (0, 0.5)")


def hallucination_flags(table: MetricTable, rule: QuartileRule = QuartileRule()) -> Set[str]:
    """Model ids whose reference-free scores contradict their phone fidelity."""
    models = [m for m in table.models() if table.model_type(m) != UNPROCESSED_TYPE]
    if len(models) < 4:
        raise SchemaError(
            f"quartile ranking needs at least 4 models, got {len(models)}"
        )
    needed = list(rule.high_metrics) + [rule.low_metric]
    values: Dict[str, Dict[str, float]] = {}
    for metric in needed:
        column = {}
        for model in models:
            v = table.overall(model, metric)
            if v is None:
                raise SchemaError(f"model {model!r} has no {metric!r} value", keys=(metric,))
            column[model] = v
        values[metric] = column

    cutoff = len(models) * rule.quartile

    def in_top(metric: str, model: str) -> bool:
        v = values[metric][model]
        rank = 1 + sum(1 for other in models if values[metric][other] > v)
        return rank <= cutoff

    def in_bottom(metric: str, model: str) -> bool:
        v = values[metric][model]
        rank = 1 + sum(1 for other in models if values[metric][other] < v)
        return rank <= cutoff

    flagged = set()
    for model in models:
        if not in_bottom(rule.low_metric, model):
            continue
        if any(in_top(metric, model) for metric in rule.high_metrics):
            flagged.add(model)
    return flagged


# --- CSV interchange ---------------------------------------------------

_FIXED_COLUMNS = ("model", "type", "language", "n")


def write_metric_csv(table: MetricTable, path) -> None:
    metrics: Dict[str, None] = {}
    for row in table.rows:
        for metric in row.values:
            metrics.setdefault(metric, None)
    columns = list(_FIXED_COLUMNS) + list(metrics)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in table.rows:
            record = [row.model, row.model_type, row.language, row.n]
            for metric in metrics:
                v = row.values.get(metric)
                record.append("" if v is None else repr(v))
            writer.writerow(record)


def read_metric_csv(path) -> MetricTable:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty metric table") from None
        if tuple(header[: len(_FIXED_COLUMNS)]) != _FIXED_COLUMNS:
            raise SchemaError(
                f"{path}: header must start with {','.join(_FIXED_COLUMNS)}",
                keys=_FIXED_COLUMNS,
            )
        metric_names = header[len(_FIXED_COLUMNS):]
        rows = []
        for record in reader:
            if not record:
                continue
            model, model_type, language, n = record[: len(_FIXED_COLUMNS)]
            values = {}
            for metric, cell in zip(metric_names, record[len(_FIXED_COLUMNS):]):
                if cell != "":
                    values[metric] = float(cell)
            rows.append(MetricRow(model, model_type, language, values, n=int(n)))
    return MetricTable(rows)
