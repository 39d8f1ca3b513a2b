"""Clip records shared by stimulus generation and campaign assembly."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from .errors import InvalidArgumentError


class ClipRole(str, Enum):
    RATING = "rating"
    GOLD = "gold"
    TRAPPING = "trapping"
    TRAINING = "training"
    SETUP = "setup"


#: Roles whose clips carry an expected ACR answer.
ANSWERED_ROLES = frozenset({ClipRole.GOLD, ClipRole.TRAPPING})


@dataclass
class Clip:
    """One audio stimulus.

    ``expected_answer`` is present exactly for gold and trapping clips.
    ``nominal_quality`` tags training clips with the scale point they are
    meant to demonstrate (used to check that a training set spans all five
    labels, and by the simulator as ground truth for training items).
    """

    id: str
    role: ClipRole
    language: str
    path: Optional[str] = None
    audio: Any = None  # AudioBuffer for freshly generated clips
    expected_answer: Optional[int] = None
    gold_tolerance: Optional[int] = None  # None: defer to the reliability rules
    nominal_quality: Optional[int] = None

    def __post_init__(self):
        self.role = ClipRole(self.role)
        if not self.id:
            raise InvalidArgumentError("clip id must be non-empty")
        if self.role in ANSWERED_ROLES:
            if self.expected_answer is None:
                raise InvalidArgumentError(
                    f"{self.role.value} clip {self.id!r} needs an expected answer"
                )
            if self.expected_answer not in (1, 2, 3, 4, 5):
                raise InvalidArgumentError(
                    f"expected answer must be 1..5, got {self.expected_answer!r}"
                )
        elif self.expected_answer is not None:
            raise InvalidArgumentError(
                f"{self.role.value} clip {self.id!r} must not carry an expected answer"
            )
        if self.nominal_quality is not None:
            if self.role is not ClipRole.TRAINING:
                raise InvalidArgumentError("nominal quality is only valid on training clips")
            if self.nominal_quality not in (1, 2, 3, 4, 5):
                raise InvalidArgumentError(
                    f"nominal quality must be 1..5, got {self.nominal_quality!r}"
                )
        if self.gold_tolerance is not None and self.gold_tolerance not in (0, 1):
            raise InvalidArgumentError("gold tolerance must be 0 or 1")

    def to_record(self) -> dict:
        """Plain-dict form used in manifests and event payloads."""
        return {
            "id": self.id,
            "role": self.role.value,
            "language": self.language,
            "path": self.path,
            "expected_answer": self.expected_answer,
            "gold_tolerance": self.gold_tolerance,
            "nominal_quality": self.nominal_quality,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Clip":
        return cls(
            id=rec["id"],
            role=ClipRole(rec["role"]),
            language=rec["language"],
            path=rec.get("path"),
            expected_answer=rec.get("expected_answer"),
            gold_tolerance=rec.get("gold_tolerance"),
            nominal_quality=rec.get("nominal_quality"),
        )
