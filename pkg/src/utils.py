"""Utility functions for scale arithmetic, file discovery and worker counts."""
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np


# Project root directory
PROJECT_ROOT = Path(__file__).resolve().parent.parent

THREADS_ENV = "METASR_THREADS"
IMAGE_SUFFIXES = (".png",)


# =============================================================================
# Scale arithmetic
# =============================================================================

def scale_fraction(r: float, max_denominator: int = 10000) -> Optional[Fraction]:
    """
    Return r as an exact small fraction when it is one (1.5 -> 3/2, 2.9 -> 29/10).

    Decimal scales such as 2.9 have no exact binary form, so products like
    20 * 2.9 land just below 58. Working with p/q keeps floor() and
    fractional parts exact for every such scale.

    Args:
        r: Scale factor
        max_denominator: Largest denominator considered

    Returns:
        Fraction p/q, or None if r is not close to a small fraction
    """
    if not math.isfinite(r) or r <= 0:
        return None
    frac = Fraction(r).limit_denominator(max_denominator)
    if abs(float(frac) - r) > 1e-12 * max(1.0, r):
        return None
    return frac


def scaled_size(n: int, r: float) -> int:
    """floor(n * r), exact for scales with a small-fraction form."""
    frac = scale_fraction(r)
    if frac is not None:
        return (n * frac.numerator) // frac.denominator
    return int(math.floor(n * r))


def split_coordinate(i, r: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split output coordinate(s) i into (floor(i / r), i / r - floor(i / r)).

    Equivalent positions get bitwise-identical fractional parts: for p/q scales
    the remainder is an exact integer before the single final division.

    Args:
        i: Non-negative integer or integer array
        r: Scale factor (> 0)

    Returns:
        (integer part, fractional part in [0, 1))
    """
    i = np.asarray(i, dtype=np.int64)
    frac = scale_fraction(r)
    if frac is not None:
        p, q = frac.numerator, frac.denominator
        scaled = i * q
        return scaled // p, (scaled % p) / p
    x = i / r
    base = np.floor(x)
    return base.astype(np.int64), x - base


def format_scale(r: float) -> str:
    """Short scale label for filenames and tables ("2", "1.5", "3.3")."""
    return f"{r:g}"


# =============================================================================
# Files and workers
# =============================================================================

def find_images(directory: Path) -> List[Path]:
    """Sorted list of PNG files below directory (recursive)."""
    directory = Path(directory)
    return sorted(
        p for p in directory.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def resolve_thread_count(deterministic: bool = False, requested: Optional[int] = None) -> int:
    """
    Number of worker threads to use.

    METASR_THREADS caps the count; deterministic mode always uses one.

    Args:
        deterministic: Force single-threaded execution
        requested: Count asked for by configuration (None for CPU count)

    Returns:
        Worker count >= 1
    """
    if deterministic:
        return 1
    count = requested if requested else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            count = min(count, int(cap))
        except ValueError:
            pass
    return max(1, count)
