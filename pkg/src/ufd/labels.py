"""Binary real/fake labels.

REAL is 0 and FAKE is 1 everywhere: in bank files, score files, and metric
truths. Fake is the positive class.
"""

from __future__ import annotations

import enum


class Label(enum.IntEnum):
    REAL = 0
    FAKE = 1


def as_label(value) -> Label:
    """Coerce 0/1, "real"/"fake" (any case), or a Label to a Label."""
    if isinstance(value, Label):
        return value
    if isinstance(value, str):
        name = value.strip().lower()
        if name == "real":
            return Label.REAL
        if name == "fake":
            return Label.FAKE
        raise ValueError(f"not a label: {value!r}")
    if value in (0, 1):
        return Label(int(value))
    raise ValueError(f"not a label: {value!r}")
