"""Per-run Prometheus counters for pipeline diagnostics."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from prometheus_client import CollectorRegistry
from prometheus_client import Counter
from prometheus_client import generate_latest

from .exports import write_text

try:
    from prometheus_client import disable_created_metrics

    disable_created_metrics()
except ImportError:  # pragma: no cover - older prometheus_client
    pass

_LOG = logging.getLogger(__name__)

# name -> (doc, label names)
_COUNTERS: dict[str, tuple[str, tuple[str, ...]]] = {
    "crossings_detected": ("Poincare section crossings detected", ("component",)),
    "tangency_drops": ("Crossings dropped by the tangency guard", ("component",)),
    "out_of_calibration": ("Crossing values clamped into the calibrated range", ("component",)),
    "segments_truncated": ("Partial-map segments without a final crossing", ()),
    "agents_truncated": ("Scenario agents that ran out of step budget", ()),
    "agents_generated": ("Traces generated", ("kind",)),
    "start_redraws": ("Perturbed starts redrawn after an unbounded trial run", ()),
}


class RunTelemetry:
    """Counters for one CLI run, held in a private registry.

    Library code receives this object as ``metrics`` and only calls :meth:`increment`.
    """

    def __init__(self) -> None:
        self.registry = CollectorRegistry(auto_describe=True)
        self._counters: dict[str, Counter] = {}
        for name, (doc, labels) in _COUNTERS.items():
            self._counters[name] = Counter(
                f"chaosmob_{name}", doc, list(labels), registry=self.registry
            )

    def increment(self, name: str, amount: float = 1.0, **labels: Any) -> None:
        counter = self._counters.get(name)
        if counter is None:
            _LOG.debug("metrics_unknown_counter name=%s", name)
            return
        if labels:
            counter.labels(**{k: str(v) for k, v in labels.items()}).inc(amount)
        else:
            counter.inc(amount)

    def value(self, name: str, **labels: Any) -> float:
        sample = self.registry.get_sample_value(
            f"chaosmob_{name}_total", {k: str(v) for k, v in labels.items()}
        )
        return float(sample or 0.0)

    def write(self, path: Path) -> None:
        """Text exposition with samples sorted inside each metric family.

        Label children are created in first-increment order, which varies across worker threads.
        """
        lines: list[str] = []
        block: list[str] = []
        for line in generate_latest(self.registry).decode("utf-8").splitlines():
            if line.startswith("#"):
                lines.extend(sorted(block))
                block = []
                lines.append(line)
            else:
                block.append(line)
        lines.extend(sorted(block))
        write_text(path, lines)


def emit(metrics: Any | None, name: str, amount: float = 1.0, **labels: Any) -> None:
    """Forward a counter increment to a duck-typed metrics sink, ignoring sink failures."""
    if metrics is None or amount == 0:
        return
    inc = getattr(metrics, "increment", None)
    if callable(inc):
        try:
            inc(name, amount, **labels)
        except Exception:  # pragma: no cover
            _LOG.debug("metrics_emit_failed", exc_info=True)


__all__ = ["RunTelemetry", "emit"]
