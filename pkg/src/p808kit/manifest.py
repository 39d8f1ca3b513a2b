"""Clip manifest files: one tab-separated record per clip.

Columns: ``id  role  path  language  expected``. The ``expected`` column
holds the expected answer for gold and trapping clips and the nominal
quality label for training clips; it is empty otherwise.
"""

from __future__ import annotations

from typing import Iterable, List

from .clips import ANSWERED_ROLES, Clip, ClipRole
from .errors import InvalidArgumentError, ParseError

COLUMNS = ("id", "role", "path", "language", "expected")


def read_manifest(path) -> List[Clip]:
    clips: List[Clip] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty manifest")
    header = tuple(lines[0].split("\t"))
    if header != COLUMNS:
        raise ParseError(
            f"{path}: header must be {'	'.join(COLUMNS)!r}, got {lines[0]!r}"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(COLUMNS):
            raise ParseError(
                f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(fields)}"
            )
        clip_id, role_text, clip_path, language, expected_text = fields
        try:
            role = ClipRole(role_text)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: unknown role {role_text!r}") from None
        expected = int(expected_text) if expected_text else None
        try:
            clips.append(Clip(
                id=clip_id,
                role=role,
                language=language,
                path=clip_path or None,
                expected_answer=expected if role in ANSWERED_ROLES else None,
                nominal_quality=expected if role is ClipRole.TRAINING else None,
            ))
        except InvalidArgumentError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return clips


def write_manifest(clips: Iterable[Clip], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(COLUMNS) + "\n")
        for clip in clips:
            if clip.role in ANSWERED_ROLES:
                expected = clip.expected_answer
            elif clip.role is ClipRole.TRAINING:
                expected = clip.nominal_quality
            else:
                expected = None
            fh.write("\t".join([
                clip.id,
                clip.role.value,
                clip.path or "",
                clip.language,
                "" if expected is None else str(expected),
            ]) + "\n")
