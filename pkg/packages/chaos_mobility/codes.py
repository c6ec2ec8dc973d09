from __future__ import annotations

from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class CodeDef:
    code: str
    severity: str  # info/warn/error
    default_msg: str = ""


def mk_note(
    c: CodeDef, msg: str | None = None, data: dict[str, Any] | None = None
) -> dict[str, Any]:
    """Build a diagnostics note attached to results and logs.

    Carries both msg/message and data/meta keys so CSV/JSON consumers can use either.
    """
    item: dict[str, Any] = {
        "code": c.code,
        "severity": c.severity,
        "msg": (msg or c.default_msg),
        "message": (msg or c.default_msg),
    }
    if data is not None:
        item["data"] = data
        item["meta"] = data
    return item


class Codes:
    # --- dynsys ---
    COMPLEX_ROOTS = CodeDef(
        "W_COMPLEX_ROOTS", "warn", "Equilibrium polynomial has complex roots; none returned."
    )

    # --- section ---
    OUT_OF_CALIBRATION = CodeDef(
        "W_OUT_OF_CALIBRATION",
        "warn",
        "Value outside the calibrated range of component {component}; clamped.",
    )
    TANGENCY_DROP = CodeDef(
        "W_TANGENCY_DROP",
        "warn",
        "Two crossings of one plane closer than the tangency guard; later one dropped.",
    )
    ORIENTATION_RESOLVED = CodeDef(
        "ORIENTATION_RESOLVED", "info", "Orientation of {component} resolved to {orientation}."
    )

    # --- returnmap ---
    SEGMENT_TRUNCATED = CodeDef(
        "W_SEGMENT_TRUNCATED",
        "warn",
        "Segment never reached a final component within the crossing budget.",
    )
    NO_TEARING = CodeDef("NO_TEARING", "info", "All pairs target a single component.")

    # --- mobility ---
    AGENT_TRUNCATED = CodeDef(
        "W_AGENT_TRUNCATED", "warn", "Agent exceeded the step budget before reaching exit."
    )
    GRAMMAR_VIOLATION = CodeDef(
        "W_GRAMMAR", "warn", "Event sequence does not match entry stay* to_room2 exit."
    )
    START_REDRAWN = CodeDef(
        "W_START_REDRAWN", "warn", "Perturbed start left the attractor basin; redrawn."
    )

    # --- cli ---
    SUPPORT_MISMATCH = CodeDef(
        "W_SUPPORT_MISMATCH", "warn", "Transition support differs from expected_support."
    )


__all__ = ["CodeDef", "mk_note", "Codes"]
