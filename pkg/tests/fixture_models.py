"""Multilingual speech-enhancement benchmark fixture.

Thirteen submitted systems plus the unprocessed noisy input, with
subjective MOS and phone similarity per language and the pooled objective
metrics. ``MOS_OVERALL_PUBLISHED`` holds the rounded two-decimal pooled
MOS values the fixture's per-language columns must reproduce within 0.01.
"""

from __future__ import annotations

from p808kit.metrics import ALL_LANGUAGES, MetricRow, MetricTable

LANGUAGES = ("EN", "DE", "ZH", "JP")

# model: (type, MOS per language, objective overall {pesq, dnsmos, nisqa, estoi}, LPS per language)
MODELS = {
    "Noisy": ("-", (2.13, 1.92, 1.84, 1.73), (1.31, 1.90, 1.58, 0.58), (0.55, 0.47, 0.59, 0.36)),
    "1": ("D", (3.24, 3.06, 3.16, 3.00), (2.61, 2.90, 3.23, 0.82), (0.81, 0.71, 0.78, 0.60)),
    "2": ("H", (3.32, 3.36, 3.31, 3.26), (2.44, 2.92, 3.24, 0.78), (0.78, 0.65, 0.76, 0.59)),
    "3": ("H", (3.44, 3.33, 3.39, 3.39), (2.41, 2.95, 3.24, 0.78), (0.78, 0.68, 0.74, 0.58)),
    "4": ("H", (3.28, 3.02, 3.20, 2.96), (2.44, 2.81, 3.03, 0.79), (0.78, 0.67, 0.76, 0.59)),
    "5": ("H", (3.04, 2.79, 2.84, 2.71), (2.44, 2.84, 2.92, 0.80), (0.79, 0.68, 0.76, 0.59)),
    "6": ("H", (3.21, 3.13, 3.21, 3.14), (2.23, 2.92, 3.29, 0.77), (0.78, 0.64, 0.75, 0.59)),
    "7": ("H", (3.19, 2.95, 3.07, 3.01), (2.43, 2.87, 3.08, 0.78), (0.75, 0.64, 0.73, 0.57)),
    "8": ("D", (3.17, 3.08, 3.04, 3.03), (2.23, 2.93, 3.14, 0.76), (0.74, 0.60, 0.73, 0.55)),
    "9": ("H", (3.17, 3.14, 3.17, 3.08), (1.95, 3.08, 3.70, 0.73), (0.72, 0.60, 0.72, 0.54)),
    "10": ("D", (2.96, 2.80, 2.89, 2.88), (2.21, 2.86, 2.76, 0.76), (0.74, 0.61, 0.73, 0.56)),
    "11": ("U", (2.94, 2.83, 2.77, 2.86), (2.01, 2.87, 3.04, 0.74), (0.73, 0.59, 0.70, 0.48)),
    "12": ("D", (2.82, 2.78, 2.78, 2.75), (2.37, 2.80, 2.76, 0.74), (0.70, 0.60, 0.71, 0.53)),
    "13": ("G", (3.69, 3.23, 3.33, 3.11), (1.33, 3.13, 3.79, 0.53), (0.71, 0.61, 0.56, 0.44)),
}

#: Published pooled MOS per model (two decimals).
MOS_OVERALL_PUBLISHED = {
    "Noisy": 1.91, "1": 3.12, "2": 3.31, "3": 3.39, "4": 3.12, "5": 2.85,
    "6": 3.17, "7": 3.06, "8": 3.08, "9": 3.14, "10": 2.88, "11": 2.85,
    "12": 2.78, "13": 3.34,
}

#: Published pooled LPS per model (two decimals), for cross-checks.
LPS_OVERALL_PUBLISHED = {
    "Noisy": 0.49, "1": 0.73, "2": 0.70, "3": 0.70, "4": 0.70, "5": 0.71,
    "6": 0.69, "7": 0.67, "8": 0.66, "9": 0.65, "10": 0.66, "11": 0.63,
    "12": 0.64, "13": 0.58,
}

UTTERANCES_PER_LANGUAGE = 150


def benchmark_table() -> MetricTable:
    rows = []
    for model, (mtype, mos, objective, lps_by_lang) in MODELS.items():
        for language, mos_value, lps_value in zip(LANGUAGES, mos, lps_by_lang):
            rows.append(MetricRow(
                model=model, model_type=mtype, language=language,
                values={"mos": mos_value, "lps": lps_value},
                n=UTTERANCES_PER_LANGUAGE,
            ))
        pesq, dnsmos, nisqa, estoi = objective
        rows.append(MetricRow(
            model=model, model_type=mtype, language=ALL_LANGUAGES,
            values={"pesq": pesq, "dnsmos": dnsmos, "nisqa": nisqa, "estoi": estoi},
            n=UTTERANCES_PER_LANGUAGE * len(LANGUAGES),
        ))
    return MetricTable(rows)
