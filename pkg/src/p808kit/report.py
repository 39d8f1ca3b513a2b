"""Evaluation views over ingested per-utterance results.

Joins subjective MOS with objective metric columns (and optionally
recomputed phone-fidelity scores), then renders grouped tables: per
language, per model type (hybrid and generative merged), or per model
with per-language columns. Text output rounds to two decimals and bolds
the best value per column; the CSV side keeps full precision in the
metric-table interchange format, so re-ingesting it reproduces the
grouped table exactly.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import InvalidArgumentError, JoinError, SchemaError
from .metrics import (
    ALL_LANGUAGES,
    CANONICAL_METRICS,
    MetricRow,
    MetricTable,
    QuartileRule,
    UNPROCESSED_TYPE,
    hallucination_flags,
    lps,
)

CI95_FACTOR = 1.96

GROUPINGS = ("model", "model-type", "language")


@dataclass(frozen=True)
class ReportSpec:
    grouping: str
    columns: Tuple[str, ...] = CANONICAL_METRICS
    ci: bool = False
    per_language: Tuple[str, ...] = ()
    languages: Tuple[str, ...] = ()  # column order; defaults to sorted
    flag_rule: Optional[QuartileRule] = None

    def __post_init__(self):
        if self.grouping not in GROUPINGS:
            raise InvalidArgumentError(
                f"grouping must be one of {GROUPINGS}, got {self.grouping!r}"
            )
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "per_language", tuple(self.per_language))
        object.__setattr__(self, "languages", tuple(self.languages))

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReportSpec":
        rule = d.get("flag_rule")
        return cls(
            grouping=d["grouping"],
            columns=tuple(d.get("columns", CANONICAL_METRICS)),
            ci=bool(d.get("ci", False)),
            per_language=tuple(d.get("per_language", ())),
            languages=tuple(d.get("languages", ())),
            flag_rule=QuartileRule(quartile=float(rule.get("quartile", 0.25)))
            if rule is not None else None,
        )


# --- ingestion -----------------------------------------------------------


def read_mos_csv(path) -> List[dict]:
    """Per-utterance MOS rows: model,language,utterance,mos."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"model", "language", "utterance", "mos"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise SchemaError(
                f"{path}: MOS CSV needs columns {sorted(required)}", keys=sorted(required)
            )
        return [dict(row) for row in reader]


def read_objective_csv(path) -> List[dict]:
    """Per-utterance objective rows: model,type,language,utterance,<metrics...>."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"model", "type", "language", "utterance"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise SchemaError(
                f"{path}: objective CSV needs columns {sorted(required)}",
                keys=sorted(required),
            )
        return [dict(row) for row in reader]


def ingest_results(
    mos_rows: Sequence[Mapping],
    objective_rows: Sequence[Mapping],
    phone_sets: Optional[Mapping[Tuple[str, str], Tuple[Mapping, Mapping]]] = None,
) -> MetricTable:
    """Join per-utterance MOS and objective metrics into a MetricTable.

    Rows join on (model, language, utterance); any key present on only one
    side is reported. ``phone_sets`` maps (model, language) to (reference,
    hypothesis) phone dictionaries; when present, LPS is recomputed from
    them instead of trusting an ingested column.
    """
    mos_map: Dict[Tuple[str, str, str], float] = {}
    for row in mos_rows:
        key = (str(row["model"]), str(row["language"]), str(row["utterance"]))
        mos_map[key] = float(row["mos"])
    obj_map: Dict[Tuple[str, str, str], Dict[str, float]] = {}
    model_types: Dict[str, str] = {}
    for row in objective_rows:
        key = (str(row["model"]), str(row["language"]), str(row["utterance"]))
        model = key[0]
        mtype = str(row["type"])
        if model in model_types and model_types[model] != mtype:
            raise SchemaError(
                f"model {model!r} declared as both {model_types[model]!r} and {mtype!r}"
            )
        model_types[model] = mtype
        skip = {"model", "type", "language", "utterance"}
        obj_map[key] = {
            k: float(v) for k, v in row.items() if k not in skip and v not in (None, "")
        }

    orphans = sorted("/".join(k) for k in set(mos_map) ^ set(obj_map))
    if orphans:
        raise JoinError(
            f"{len(orphans)} utterances present on only one side of the join",
            orphans=orphans,
        )

    per_utt: Dict[Tuple[str, str], Dict[str, Dict[str, float]]] = {}
    for key in sorted(mos_map):
        model, language, utterance = key
        values = dict(obj_map[key])
        values["mos"] = mos_map[key]
        per_utt.setdefault((model, language), {})[utterance] = values

    if phone_sets:
        for (model, language), (ref, hyp) in phone_sets.items():
            if (model, language) not in per_utt:
                raise JoinError(
                    f"phone files given for unknown cell {model}/{language}",
                    orphans=(f"{model}/{language}",),
                )
            cell = per_utt[(model, language)]
            missing = sorted(set(cell) - (set(ref) & set(hyp)))
            if missing:
                raise JoinError(
                    f"phone files for {model}/{language} miss {len(missing)} utterances",
                    orphans=missing,
                )
            for utt in cell:
                cell[utt]["lps"] = lps(ref[utt], hyp[utt])

    rows: List[MetricRow] = []
    for (model, language) in sorted(per_utt):
        cell = per_utt[(model, language)]
        metrics: Dict[str, List[float]] = {}
        for utt in sorted(cell):
            for metric, value in cell[utt].items():
                metrics.setdefault(metric, []).append(value)
        values, m2 = {}, {}
        n = len(cell)
        for metric, scores in metrics.items():
            if len(scores) != n:
                raise JoinError(
                    f"{model}/{language}: metric {metric!r} covers {len(scores)} of "
                    f"{n} utterances"
                )
            mean = statistics.fmean(scores)
            values[metric] = mean
            m2[metric] = sum((s - mean) ** 2 for s in scores)
        rows.append(MetricRow(
            model=model, model_type=model_types[model], language=language,
            values=values, n=n, m2=m2,
        ))
    return MetricTable(rows)


# --- aggregation ---------------------------------------------------------


@dataclass(frozen=True)
class _Cell:
    mean: float
    n: int
    m2: Optional[float]  # None when spread is unknown


def _row_cell(row: MetricRow, metric: str) -> Optional[_Cell]:
    if metric not in row.values:
        return None
    return _Cell(row.values[metric], row.n, row.m2.get(metric))


def _merge_cells(cells: Sequence[_Cell]) -> Optional[_Cell]:
    cells = [c for c in cells if c is not None]
    if not cells:
        return None
    counts = [c.n for c in cells]
    if len(set(counts)) == 1:
        mean = statistics.fmean(c.mean for c in cells)
    else:
        mean = sum(c.mean * c.n for c in cells) / sum(counts)
    n = sum(counts)
    if any(c.m2 is None for c in cells):
        m2 = None
    else:
        # total SS = within-group SS + between-group SS
        m2 = sum(c.m2 + c.n * (c.mean - mean) ** 2 for c in cells)
    return _Cell(mean, n, m2)


def _ci_halfwidth(cell: Optional[_Cell]) -> Optional[float]:
    if cell is None or cell.m2 is None or cell.n < 2:
        return None
    sd = math.sqrt(cell.m2 / (cell.n - 1))
    return CI95_FACTOR * sd / math.sqrt(cell.n)


def _canonical_rows(table: MetricTable) -> List[MetricRow]:
    return sorted(table.rows, key=lambda r: (_model_key(r.model), r.language))


def _model_key(model: str):
    try:
        return (1, int(model), "")
    except ValueError:
        return (0, 0, model)  # non-numeric ids (e.g. the noisy baseline) first


@dataclass
class RenderedTable:
    columns: List[str]
    rows: List[dict]  # group label -> cell values, full precision
    text: str
    csv: str


def render_table(table: MetricTable, spec: ReportSpec) -> RenderedTable:
    """Render grouped means (plus CI columns on request) as text and CSV."""
    present = set()
    for row in table.rows:
        present.update(row.values)
    missing = [c for c in spec.columns if c not in present]
    if missing:
        raise InvalidArgumentError(f"table has no data for columns: {missing}")
    languages = list(spec.languages) if spec.languages else sorted(table.languages())
    rows = _canonical_rows(table)

    if spec.grouping == "model":
        groups = _group_by_model(rows)
    elif spec.grouping == "model-type":
        groups = _group_by_type(rows)
    else:
        groups = _group_by_language(rows, languages)

    header, lines_rows, csv_rows = _layout(groups, spec, languages)
    text = _format_text(header, lines_rows)
    return RenderedTable(columns=header, rows=lines_rows, text=text, csv=csv_rows)


def _group_by_model(rows: Sequence[MetricRow]) -> List[dict]:
    order: Dict[str, None] = {}
    for row in rows:
        order.setdefault(row.model, None)
    groups = []
    for model in order:
        model_rows = [r for r in rows if r.model == model]
        groups.append({
            "label": model,
            "type": model_rows[0].model_type,
            "lang_rows": {r.language: r for r in model_rows if r.language != ALL_LANGUAGES},
            "all_rows": [r for r in model_rows if r.language == ALL_LANGUAGES],
        })
    return groups


def _group_by_type(rows: Sequence[MetricRow]) -> List[dict]:
    def type_label(t: str) -> Optional[str]:
        if t == UNPROCESSED_TYPE:
            return None  # the unprocessed baseline is not a model
        return "H/G" if t in ("H", "G") else t

    buckets: Dict[str, List[MetricRow]] = {}
    for row in rows:
        label = type_label(row.model_type)
        if label is None:
            continue
        buckets.setdefault(label, []).append(row)
    ordered = [lbl for lbl in ("D", "H/G", "U") if lbl in buckets]
    ordered += sorted(set(buckets) - set(ordered))
    groups = []
    for label in ordered:
        groups.append({
            "label": label,
            "type": label,
            "lang_rows": _bucket_by_language(buckets[label]),
            "all_rows": [r for r in buckets[label] if r.language == ALL_LANGUAGES],
        })
    union = [r for rs in buckets.values() for r in rs]
    groups.append({
        "label": "all",
        "type": "all",
        "lang_rows": _bucket_by_language(union),
        "all_rows": [r for r in union if r.language == ALL_LANGUAGES],
    })
    return groups


def _group_by_language(rows: Sequence[MetricRow], languages: Sequence[str]) -> List[dict]:
    models = [r for r in rows if r.model_type != UNPROCESSED_TYPE]
    groups = []
    for language in languages:
        member = [r for r in models if r.language == language]
        groups.append({
            "label": language, "type": "",
            "lang_rows": {language: member}, "all_rows": [],
        })
    groups.append({
        "label": "mean", "type": "",
        "lang_rows": _bucket_by_language(models), "all_rows": [],
    })
    return groups


def _bucket_by_language(rows: Sequence[MetricRow]) -> Dict[str, List[MetricRow]]:
    out: Dict[str, List[MetricRow]] = {}
    for row in rows:
        if row.language != ALL_LANGUAGES:
            out.setdefault(row.language, []).append(row)
    return out


def _cell_for(group: dict, metric: str, language: Optional[str]) -> Optional[_Cell]:
    if language is not None:
        member = group["lang_rows"].get(language)
        if member is None:
            return None
        rows = member if isinstance(member, list) else [member]
        return _merge_cells([_row_cell(r, metric) for r in rows])
    # pooled over languages: pre-aggregated rows win, else merge languages
    pooled = [_row_cell(r, metric) for r in group["all_rows"] if metric in r.values]
    if pooled:
        return _merge_cells(pooled)
    cells = []
    for member in group["lang_rows"].values():
        rows = member if isinstance(member, list) else [member]
        cells.append(_merge_cells([_row_cell(r, metric) for r in rows]))
    return _merge_cells([c for c in cells if c is not None])


def _layout(groups: List[dict], spec: ReportSpec, languages: Sequence[str]):
    header = ["group", "type"]
    columns: List[Tuple[str, str, Optional[str]]] = []  # (label, metric, language)
    for metric in spec.columns:
        if metric in spec.per_language:
            for language in languages:
                columns.append((f"{metric}:{language}", metric, language))
        columns.append((metric, metric, None))
    header += [label for label, _, _ in columns]
    if spec.ci:
        header += [f"ci95:{label}" for label, _, _ in columns]

    rendered_rows = []
    for group in groups:
        row: Dict[str, object] = {"group": group["label"], "type": group["type"]}
        for label, metric, language in columns:
            cell = _cell_for(group, metric, language)
            row[label] = None if cell is None else cell.mean
            if spec.ci:
                row[f"ci95:{label}"] = _ci_halfwidth(cell)
        rendered_rows.append(row)

    csv_text = _interchange_csv(groups, spec, languages)
    return header, rendered_rows, csv_text


def _interchange_csv(groups: List[dict], spec: ReportSpec, languages: Sequence[str]) -> str:
    """Grouped values in metric-table interchange form (lossless floats)."""
    import io

    from .metrics import MODEL_TYPES

    metrics = list(spec.columns)
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["model", "type", "language", "n"] + metrics)

    def emit(model: str, mtype: str, language: str, cells: Dict[str, Optional[_Cell]]):
        live = {m: c for m, c in cells.items() if c is not None}
        if not live:
            return
        n = max(c.n for c in live.values())
        record = [model, mtype, language, n]
        for metric in metrics:
            cell = live.get(metric)
            record.append("" if cell is None else repr(cell.mean))
        writer.writerow(record)

    for group in groups:
        mtype = group["type"] if group["type"] in MODEL_TYPES + (UNPROCESSED_TYPE,) else UNPROCESSED_TYPE
        for language in languages:
            cells = {m: _cell_for(group, m, language) for m in metrics
                     if m in spec.per_language}
            emit(group["label"], mtype, language, cells)
        cells = {m: _cell_for(group, m, None) for m in metrics}
        emit(group["label"], mtype, ALL_LANGUAGES, cells)
    return out.getvalue()


def _format_text(header: List[str], rows: List[dict]) -> str:
    # Bold the best value per metric column; the unprocessed row competes in
    # no column. Two decimals, full precision stays in the CSV.
    display: List[List[str]] = [list(header)]
    best: Dict[str, float] = {}
    for column in header[2:]:
        if column.startswith("ci95:"):
            continue
        candidates = [
            r[column] for r in rows
            if r.get(column) is not None and r["type"] != UNPROCESSED_TYPE and r["group"] not in ("all", "mean")
        ]
        if candidates:
            best[column] = max(candidates)
    for row in rows:
        cells = [str(row["group"]), str(row["type"])]
        for column in header[2:]:
            value = row.get(column)
            if value is None:
                cells.append("-")
            elif column.startswith("ci95:"):
                cells.append(f"±{value:.2f}")
            else:
                text = f"{value:.2f}"
                if (
                    column in best
                    and row["type"] != UNPROCESSED_TYPE
                    and row["group"] not in ("all", "mean")
                    and value == best[column]
                ):
                    text = f"**{text}**"
                cells.append(text)
        display.append(cells)
    widths = [max(len(r[i]) for r in display) for i in range(len(header))]
    lines = []
    for i, cells in enumerate(display):
        lines.append("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_flags(table: MetricTable, rule: Optional[QuartileRule] = None) -> List[str]:
    """Hallucination-suspect model ids, sorted for stable output."""
    flags = hallucination_flags(table, rule or QuartileRule())
    return sorted(flags, key=_model_key)
