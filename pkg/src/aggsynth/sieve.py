"""Sieve size classes: 8 intervals from 4 mm to 63 mm, each mapped to a scene layer.

Intervals follow DIN-style sieve analysis and are half-open [min_mm, max_mm),
except the final class whose upper bound is inclusive. Lower classes (smaller
particles) sit on lower layers.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["SizeClass", "SIZE_CLASSES", "NUM_CLASSES", "classify_size", "size_class"]


@dataclass(frozen=True)
class SizeClass:
    index: int
    min_mm: float
    max_mm: float
    layer: int


SIZE_CLASSES: tuple[SizeClass, ...] = (
    SizeClass(1, 4.0, 5.6, 0),
    SizeClass(2, 5.6, 8.0, 0),
    SizeClass(3, 8.0, 11.2, 0),
    SizeClass(4, 11.2, 16.0, 1),
    SizeClass(5, 16.0, 22.4, 1),
    SizeClass(6, 22.4, 35.0, 2),
    SizeClass(7, 35.0, 45.0, 3),
    SizeClass(8, 45.0, 63.0, 4),
)

NUM_CLASSES = len(SIZE_CLASSES)


def size_class(index: int) -> SizeClass:
    """Look up a class by its 1-based index."""
    if not 1 <= index <= NUM_CLASSES:
        raise ValueError(f"size class index must be in 1..{NUM_CLASSES}, got {index}")
    return SIZE_CLASSES[index - 1]


def classify_size(size_mm: float) -> SizeClass:
    """Map a physical size to its sieve class.

    Intervals are half-open [min_mm, max_mm); 63.0 maps to class 8. Sizes
    outside [4.0, 63.0] raise ValueError.
    """
    if not SIZE_CLASSES[0].min_mm <= size_mm <= SIZE_CLASSES[-1].max_mm:
        raise ValueError(f"out of sieve range: {size_mm!r} mm not in [4.0, 63.0]")
    for cls in SIZE_CLASSES:
        if size_mm < cls.max_mm:
            return cls
    return SIZE_CLASSES[-1]
