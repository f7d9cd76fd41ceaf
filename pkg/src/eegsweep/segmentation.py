"""Temporal segmentation: split recordings into j equal parts.

With divisors {1, 2, 3, 4, 5, 20} each recording yields 35 segments
(1+2+3+4+5+20). Remainder samples (T mod j) are discarded from the tail
so all segments of one divisor have equal length.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

DIVISORS = (1, 2, 3, 4, 5, 20)

#: Total number of segments per recording across all divisors.
N_SEGMENTS = sum(DIVISORS)


@dataclass(frozen=True)
class SegmentSpec:
    """Chunk index/j (1-based index), rendered as e.g. "17/20"."""

    divisor: int
    index: int

    def __post_init__(self):
        if self.divisor not in DIVISORS:
            raise ValueError("divisor must be one of %s, got %r"
                             % (DIVISORS, self.divisor))
        if not 1 <= self.index <= self.divisor:
            raise ValueError("index %d out of range 1..%d"
                             % (self.index, self.divisor))

    @property
    def chunk_id(self):
        return "%d/%d" % (self.index, self.divisor)

    @classmethod
    def from_chunk_id(cls, chunk_id):
        idx, div = chunk_id.split("/")
        return cls(divisor=int(div), index=int(idx))


def segment(rec, spec):
    """Extract one equal-part segment of a recording.

    Segment i of divisor j covers samples [(i-1)*floor(T/j), i*floor(T/j)).
    Segments must be at least 2 s long, except j = 20 where >= 1 s is
    accepted with a warning.
    """
    seg_len = rec.n_samples // spec.divisor
    min_len = 2.0 * rec.sample_rate_hz
    if seg_len < min_len:
        if spec.divisor == 20 and seg_len >= rec.sample_rate_hz:
            warnings.warn(
                "segment 1/%d of %s is %.2f s, below the 2 s minimum"
                % (spec.divisor, rec.subject_id,
                   seg_len / rec.sample_rate_hz), stacklevel=2)
        else:
            raise ValueError(
                "segment length %d below minimum %d samples (j=%d)"
                % (seg_len, int(min_len), spec.divisor))
    start = (spec.index - 1) * seg_len
    return rec.with_samples(rec.samples[:, start:start + seg_len])


def all_segments(rec):
    """All 35 segments of a recording, keyed by (divisor, index)."""
    out = {}
    for j in DIVISORS:
        for i in range(1, j + 1):
            out[(j, i)] = segment(rec, SegmentSpec(divisor=j, index=i))
    return out
