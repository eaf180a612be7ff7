"""Savitzky-Golay smoothing of landmark trajectories.

Filter weights come from the normal equations of the local polynomial fit,
solved in exact rational arithmetic so that the moment identities hold to
rounding of the final float conversion even for high degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import EmptyTrajectoryError, GapError, InputError, InvalidSpecError


@dataclass(eq=False)
class LandmarkTrajectory:
    joint_id: int
    positions: np.ndarray
    valid: np.ndarray
    frame_rate: float = 25.0
    synthesized: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        self.valid = np.array(self.valid, dtype=bool).reshape(-1)
        n = len(self.positions)
        if self.synthesized is None:
            self.synthesized = np.zeros(n, dtype=bool)
        self.synthesized = np.array(self.synthesized, dtype=bool).reshape(-1)
        if len(self.valid) != n or len(self.synthesized) != n:
            raise InputError("positions, validity and synthesized flags must have equal length")
        if not np.all(np.isfinite(self.positions[self.valid])):
            raise InputError("valid positions must be finite")

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True, eq=False)
class SGFilterSpec:
    half_window: int
    degree: int
    coefficients: np.ndarray = field(repr=False)

    @property
    def window(self) -> int:
        return 2 * self.half_window + 1


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(A)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[pivot] = M[pivot], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[i][n] / M[i][i] for i in range(n)]


@lru_cache(maxsize=None)
def fit_weights(offsets: tuple[int, ...], degree: int, at: int = 0) -> tuple[float, ...]:
    """Weights ``c`` with ``sum(c_k * y_k) == p(at)`` for the degree-``degree``
    least-squares polynomial ``p`` through ``(offsets[k], y_k)``.

    Solves ``(V^T V) g = e(at)`` with ``V[k, n] = offsets[k]**n`` and returns
    ``c = V g``.
    """
    if degree >= len(offsets):
        raise InvalidSpecError("polynomial degree must be below the number of samples")
    powers = [[Fraction(j) ** n for n in range(degree + 1)] for j in offsets]
    gram = [
        [sum(row[a] * row[b] for row in powers) for b in range(degree + 1)]
        for a in range(degree + 1)
    ]
    target = [Fraction(at) ** n for n in range(degree + 1)]
    g = _solve_exact(gram, target)
    return tuple(float(sum(gn * pn for gn, pn in zip(g, row))) for row in powers)


def sg_coefficients(M: int, P: int) -> SGFilterSpec:
    """Centre-row Savitzky-Golay weights for half-window ``M`` and degree ``P``."""
    if M < 1 or P < 0:
        raise InvalidSpecError(f"need M >= 1 and P >= 0, got M={M}, P={P}")
    if P > 2 * M:
        raise InvalidSpecError(f"degree {P} exceeds 2M = {2 * M}; normal equations are singular")
    beta = np.array(fit_weights(tuple(range(-M, M + 1)), P))
    beta.setflags(write=False)
    return SGFilterSpec(M, P, beta)


def _row_weights(n: int, t: int, M: int, P: int) -> tuple[int, np.ndarray]:
    """Window start and weights producing the smoothed value at frame ``t``.

    Frames with a full centred window use the centre row.  Near the ends the
    ``2M+1`` frames closest to ``t`` are fitted and evaluated at ``t``; short
    sequences are fitted as a whole with the degree capped at ``n - 1``.
    """
    width = 2 * M + 1
    if n < width:
        deg = min(P, n - 1)
        return 0, np.array(fit_weights(tuple(range(-t, n - t)), deg))
    start = min(max(t - M, 0), n - width)
    offsets = tuple(range(start - t, start - t + width))
    return start, np.array(fit_weights(offsets, P))


def smoothing_matrix(n: int, spec: SGFilterSpec) -> np.ndarray:
    """Dense ``(n, n)`` linear operator applied by :func:`smooth_trajectory`."""
    S = np.zeros((n, n))
    M, P = spec.half_window, spec.degree
    for t in range(n):
        if M <= t < n - M:
            S[t, t - M : t + M + 1] = spec.coefficients
        else:
            start, w = _row_weights(n, t, M, P)
            S[t, start : start + len(w)] = w
    return S


def smooth_positions(positions, spec: SGFilterSpec) -> np.ndarray:
    """Filter an ``(n, ...)`` array along axis 0, each column independently."""
    x = np.asarray(positions, dtype=float)
    n = len(x)
    if n == 0:
        raise EmptyTrajectoryError("nothing to smooth")
    M = spec.half_window
    out = np.empty_like(x)
    if n > 2 * M:
        # interior: beta-weighted window sum
        windows = np.lib.stride_tricks.sliding_window_view(x, 2 * M + 1, axis=0)
        out[M : n - M] = np.einsum("t...k,k->t...", windows, spec.coefficients)
    for t in range(n):
        if M <= t < n - M:
            continue
        start, w = _row_weights(n, t, M, spec.degree)
        out[t] = np.tensordot(w, x[start : start + len(w)], axes=1)
    return out


def smooth_trajectory(traj: LandmarkTrajectory, spec: SGFilterSpec) -> LandmarkTrajectory:
    if not np.all(traj.valid):
        bad = np.flatnonzero(~traj.valid)
        raise GapError(
            f"joint {traj.joint_id} has {len(bad)} invalid frame(s) (first {bad[0]}); run fill_gaps first"
        )
    return replace(traj, positions=smooth_positions(traj.positions, spec))


def fill_gaps(traj: LandmarkTrajectory) -> LandmarkTrajectory:
    """Linearly interpolate interior gaps and replicate the nearest valid
    frame into leading and trailing gaps.  Filled frames are flagged in
    ``synthesized``."""
    valid = traj.valid
    if not np.any(valid):
        raise EmptyTrajectoryError(f"joint {traj.joint_id} has no valid frame")
    frames = np.arange(len(traj))
    known = np.flatnonzero(valid)
    pos = traj.positions.copy()
    for axis in range(3):
        # np.interp holds the end values constant outside the known range
        pos[:, axis] = np.interp(frames, known, traj.positions[known, axis])
    return replace(
        traj,
        positions=pos,
        valid=np.ones(len(traj), dtype=bool),
        synthesized=traj.synthesized | ~valid,
    )
