"""Labels for the four radial-set components at the null boundary caps.

A component is named by whether the rescaled Hamilton flow is attracted to it
(sink) or repelled from it (source), and by the boundary cap (future or past
light cone at infinity) it sits over.
"""

from __future__ import annotations

from enum import Enum


class RadialSet(Enum):
    SINK_FUTURE = "sink-future"
    SOURCE_FUTURE = "source-future"
    SINK_PAST = "sink-past"
    SOURCE_PAST = "source-past"

    @property
    def is_sink(self) -> bool:
        return self in (RadialSet.SINK_FUTURE, RadialSet.SINK_PAST)

    @property
    def is_future(self) -> bool:
        return self in (RadialSet.SINK_FUTURE, RadialSet.SOURCE_FUTURE)


SINKS = (RadialSet.SINK_FUTURE, RadialSet.SINK_PAST)
SOURCES = (RadialSet.SOURCE_FUTURE, RadialSet.SOURCE_PAST)
