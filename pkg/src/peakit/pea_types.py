"""The six perceivable-encoding-artifact categories and their fixed properties.

The integer ids double as the bit positions of pattern signatures, in the
fixed order blurring, blocking, ringing, color bleeding, flickering,
floating.
"""

import enum


class PeaType(enum.IntEnum):
    BLURRING = 0
    BLOCKING = 1
    RINGING = 2
    COLOR_BLEEDING = 3
    FLICKERING = 4
    FLOATING = 5

    @property
    def wire_name(self) -> str:
        """Lowercase name used in annotation files and manifests."""
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "PeaType":
        try:
            return cls[name.upper()]
        except KeyError:
            valid = ", ".join(t.wire_name for t in cls)
            raise ValueError(f"unknown pea_type {name!r}; expected one of: {valid}") from None

    @property
    def is_temporal(self) -> bool:
        return self in (PeaType.FLICKERING, PeaType.FLOATING)

    @property
    def window_size(self) -> int:
        """Sliding-window size assigned to this artifact type (32 or 72)."""
        return 32 if self in _SMALL_WINDOW else 72

    @property
    def n_frames(self) -> int:
        """Frames per labeled unit: 10-frame cuboid for temporal types."""
        return 10 if self.is_temporal else 1


_SMALL_WINDOW = frozenset({PeaType.RINGING, PeaType.COLOR_BLEEDING, PeaType.FLICKERING})

SPATIAL_TYPES = tuple(t for t in PeaType if not t.is_temporal)
TEMPORAL_TYPES = tuple(t for t in PeaType if t.is_temporal)

# Frames covered by one temporal mark / cuboid.
TEMPORAL_SPAN = 10
