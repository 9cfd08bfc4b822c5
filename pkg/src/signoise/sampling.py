"""Deterministic observation grids.

A grid is the finite set of instants 0 = t_0 < t_1 < ... < t_n at which the
process is read off.  Delays d_i = t_i - t_{i-1} are stored explicitly and
are the authoritative interval lengths: for long horizons the subtraction
t_i - t_{i-1} loses relative precision, the stored delays do not.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError

__all__ = [
    "TimeGrid",
    "uniform_grid",
    "periodic_pattern_grid",
    "quantile_grid",
    "grid_from_instants",
    "grid_from_delays",
    "save_grid_csv",
    "load_grid_csv",
]


def _compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Running sums of ``values`` with a leading zero, Kahan-compensated."""
    out = np.empty(values.size + 1)
    out[0] = 0.0
    total = 0.0
    carry = 0.0
    for i, v in enumerate(values):
        y = v - carry
        t = total + y
        carry = (t - total) - y
        total = t
        out[i + 1] = total
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing observation instants starting at zero.

    Attributes
    ----------
    instants : ndarray, shape (n+1,)
        t_0 = 0 through t_n, strictly increasing.
    delays : ndarray, shape (n,)
        Positive interval lengths.  ``instants`` and ``delays`` are
        consistent up to accumulated rounding; delays are primary.
    """

    instants: np.ndarray
    delays: np.ndarray
    label: str = ""

    def __post_init__(self):
        inst = np.asarray(self.instants, dtype=float)
        dl = np.asarray(self.delays, dtype=float)
        if inst.ndim != 1 or dl.ndim != 1 or inst.size != dl.size + 1:
            raise GridError("need n+1 instants and n delays")
        if dl.size == 0:
            raise GridError("grid needs at least one interval")
        if inst[0] != 0.0:
            raise GridError(f"first instant must be 0.0, got {inst[0]!r}")
        if not np.all(np.isfinite(inst)) or not np.all(np.isfinite(dl)):
            raise GridError("non-finite instants or delays")
        if np.any(dl <= 0.0) or np.any(np.diff(inst) <= 0.0):
            raise GridError("instants must be strictly increasing")
        inst.flags.writeable = False
        dl.flags.writeable = False
        object.__setattr__(self, "instants", inst)
        object.__setattr__(self, "delays", dl)

    @property
    def n(self) -> int:
        return self.delays.size

    @property
    def total_time(self) -> float:
        return float(self.instants[-1])

    @property
    def max_delay(self) -> float:
        return float(self.delays.max())

    @property
    def starts(self) -> np.ndarray:
        return self.instants[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.instants[1:]

    def digest(self) -> str:
        """Hex digest of the instant bytes.

        Instants alone identify a grid; stored delays can differ from
        instant differences in their last bits (that is why they are
        stored), so hashing them would make serialization round-trips
        change the digest.
        """
        return hashlib.sha256(self.instants.tobytes()).hexdigest()


def uniform_grid(n: int, h: float) -> TimeGrid:
    """Equidistant grid t_i = i*h with n intervals."""
    if n < 1:
        raise GridError(f"n must be >= 1, got {n}")
    if not (h > 0.0 and np.isfinite(h)):
        raise GridError(f"step must be positive and finite, got {h!r}")
    instants = h * np.arange(n + 1, dtype=float)
    delays = np.full(n, float(h))
    return TimeGrid(instants, delays, label=f"uniform(n={n}, h={h})")


def periodic_pattern_grid(offsets, period: float, cycles: int) -> TimeGrid:
    """Grid repeating a within-period offset pattern over ``cycles`` periods.

    ``offsets`` are the instants inside one period, strictly increasing in
    (0, period] with the last offset equal to ``period`` so cycles abut
    exactly.  The delay sequence is exactly periodic by construction.
    """
    off = np.asarray(offsets, dtype=float)
    if off.ndim != 1 or off.size == 0:
        raise GridError("offsets must be a non-empty 1-d sequence")
    if not (period > 0.0 and np.isfinite(period)):
        raise GridError(f"period must be positive, got {period!r}")
    if cycles < 1:
        raise GridError(f"cycles must be >= 1, got {cycles}")
    if off[0] <= 0.0 or np.any(np.diff(off) <= 0.0):
        raise GridError("offsets must be strictly increasing and positive")
    if off[-1] != period:
        raise GridError(
            f"last offset must equal the period, got {off[-1]!r} vs {period!r}"
        )
    pattern_delays = np.diff(np.concatenate(([0.0], off)))
    delays = np.tile(pattern_delays, cycles)
    base = period * np.arange(cycles, dtype=float)
    instants = np.concatenate(([0.0], (base[:, None] + off[None, :]).ravel()))
    return TimeGrid(
        instants, delays, label=f"pattern(nu={off.size}, P={period}, cycles={cycles})"
    )


def quantile_grid(inverse_cdf, n: int, total_time: float) -> TimeGrid:
    """Grid t_i = total_time * Q(i/n) for an inverse distribution function Q.

    Q must map [0, 1] onto [0, 1] with Q(0) = 0, Q(1) = 1, strictly
    increasing on the probed lattice.
    """
    if n < 1:
        raise GridError(f"n must be >= 1, got {n}")
    if not (total_time > 0.0 and np.isfinite(total_time)):
        raise GridError(f"total_time must be positive, got {total_time!r}")
    u = np.arange(n + 1, dtype=float) / n
    q = np.asarray([float(inverse_cdf(x)) for x in u])
    if abs(q[0]) > 1e-15 or abs(q[-1] - 1.0) > 1e-12:
        raise GridError("inverse cdf must satisfy Q(0)=0 and Q(1)=1")
    q[0] = 0.0
    q[-1] = 1.0
    instants = total_time * q
    if np.any(np.diff(instants) <= 0.0):
        raise GridError("inverse cdf is not strictly increasing on the lattice")
    return TimeGrid(instants, np.diff(instants), label=f"quantile(n={n})")


def grid_from_instants(instants, label: str = "") -> TimeGrid:
    inst = np.asarray(instants, dtype=float)
    if inst.ndim != 1 or inst.size < 2:
        raise GridError("need at least two instants")
    return TimeGrid(inst, np.diff(inst), label=label)


def grid_from_delays(delays, label: str = "") -> TimeGrid:
    """Rebuild a grid from its delays via compensated summation."""
    dl = np.asarray(delays, dtype=float)
    if dl.ndim != 1 or dl.size == 0:
        raise GridError("need at least one delay")
    return TimeGrid(_compensated_cumsum(dl), dl, label=label)


def save_grid_csv(grid: TimeGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"])
        for t in grid.instants:
            w.writerow([repr(float(t))])


def load_grid_csv(path) -> TimeGrid:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t"]:
        raise GridError(f"{path}: expected a single-column CSV with header 't'")
    try:
        instants = np.array([float(r[0]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise GridError(f"{path}: malformed instant row") from exc
    return grid_from_instants(instants, label=str(path))
