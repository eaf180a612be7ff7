"""Confidence-weighted multi-view ray triangulation.

Each landmark is the minimiser of

    sum_v (w_v * || P(d_v) (l - o_v) ||)^2,    P(d) = I - d d^T

over rays ``(o_v, d_v)`` with detector confidences ``w_v``.  The confidence
multiplies the distance before squaring, so the effective weight of a ray is
``w_v**2``.  :func:`triangulate_lm` solves this with damped Levenberg-Marquardt
started at the centroid of the camera centres; :func:`triangulate_closed_form`
solves the 3x3 normal equations directly and serves as its oracle.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateGeometryError, InputError, InsufficientViewsError
from .geometry import CameraView, Detection2D, Ray, back_project

DEGENERATE_RATIO = 1e-9
WARNING_RATIO = 1e-6


@dataclass(frozen=True)
class LMConfig:
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    max_iterations: int = 100
    step_tolerance: float = 1e-8
    weight_threshold: float = 0.1

    def __post_init__(self):
        if not (self.initial_damping > 0 and self.max_iterations > 0 and self.step_tolerance > 0):
            raise InputError("LM damping, iteration cap and tolerance must be positive")
        if not self.damping_up > 1 > self.damping_down > 0:
            raise InputError("need damping_up > 1 > damping_down > 0")
        if not self.weight_threshold > 0:
            raise InputError("weight threshold must be positive")


@dataclass(frozen=True, eq=False)
class TriangulationProblem:
    rays: Sequence[Ray]
    weights: Sequence[float]

    def __post_init__(self):
        if len(self.rays) != len(self.weights):
            raise InputError("rays and weights must have equal length")
        w = np.asarray(self.weights, dtype=float)
        if w.size and (np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(w))):
            raise InputError("weights must lie in [0, 1]")

    @property
    def origins(self) -> np.ndarray:
        return np.array([r.origin for r in self.rays]).reshape(-1, 3)

    @property
    def directions(self) -> np.ndarray:
        return np.array([r.direction for r in self.rays]).reshape(-1, 3)

    def select(self, mask) -> "TriangulationProblem":
        mask = np.asarray(mask, dtype=bool)
        return TriangulationProblem(
            [r for r, keep in zip(self.rays, mask) if keep],
            [w for w, keep in zip(self.weights, mask) if keep],
        )


@dataclass
class TriangulationResult:
    point: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    condition_warning: bool = False
    objective_history: list[float] = field(default_factory=list, repr=False)


def orthogonal_projector(direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float).reshape(3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise InputError("projector direction must be a unit vector")
    return np.eye(3) - np.outer(d, d)


def _projectors(directions: np.ndarray) -> np.ndarray:
    return np.eye(3)[None] - directions[:, :, None] * directions[:, None, :]


def objective(point, problem: TriangulationProblem) -> float:
    """Weighted sum of squared perpendicular point-to-ray distances."""
    if not problem.rays:
        return 0.0
    diff = np.asarray(point, dtype=float).reshape(3) - problem.origins
    perp = np.einsum("vij,vj->vi", _projectors(problem.directions), diff)
    w = np.asarray(problem.weights, dtype=float)
    return float(np.sum((w * np.linalg.norm(perp, axis=1)) ** 2))


def _check_conditioning(A: np.ndarray) -> bool:
    """Raise on degenerate geometry; return True when close to degenerate."""
    eig = np.linalg.eigvalsh(A)
    if eig[-1] <= 0 or eig[0] < DEGENERATE_RATIO * eig[-1]:
        raise DegenerateGeometryError(
            f"ray geometry is degenerate (eigenvalues {eig[0]:.3g} / {eig[-1]:.3g})"
        )
    return bool(eig[0] < WARNING_RATIO * eig[-1])


def normal_equations(problem: TriangulationProblem) -> tuple[np.ndarray, np.ndarray]:
    """``(sum w^2 P, sum w^2 P o)`` for the problem."""
    w2 = np.asarray(problem.weights, dtype=float) ** 2
    P = _projectors(problem.directions)
    A = np.einsum("v,vij->ij", w2, P)
    b = np.einsum("v,vij,vj->i", w2, P, problem.origins)
    return A, b


def triangulate_closed_form(problem: TriangulationProblem) -> np.ndarray:
    """Exact minimiser from the 3x3 normal equations."""
    if len(problem.rays) == 0:
        raise InsufficientViewsError("no rays")
    A, b = normal_equations(problem)
    _check_conditioning(A)
    return np.linalg.solve(A, b)


def _usable(problem: TriangulationProblem, threshold: float) -> TriangulationProblem:
    w = np.asarray(problem.weights, dtype=float)
    usable = problem.select(w >= threshold)
    if len(usable.rays) < 2:
        raise InsufficientViewsError(
            f"{len(usable.rays)} ray(s) with confidence >= {threshold}; need at least 2"
        )
    return usable


def triangulate_lm(problem: TriangulationProblem, config: LMConfig = LMConfig()) -> TriangulationResult:
    """Damped Levenberg-Marquardt on the stacked residual ``w_v P_v (l - o_v)``.

    Rays with confidence below ``config.weight_threshold`` are dropped first.
    The iteration starts at the unweighted centroid of the surviving ray
    origins; a step is accepted when it does not increase the objective, in
    which case the damping shrinks, otherwise it grows.
    """
    usable = _usable(problem, config.weight_threshold)
    origins = usable.origins
    w = np.asarray(usable.weights, dtype=float)
    # residual r_v = w_v P_v (l - o_v) is affine in l: constant Jacobian blocks w_v P_v
    jac = (w[:, None, None] * _projectors(usable.directions)).reshape(-1, 3)
    jtj = jac.T @ jac
    warning = _check_conditioning(jtj)
    scale = np.diag(np.diag(jtj))

    def residual(x):
        return jac @ x - (jac.reshape(-1, 3, 3) @ origins[:, :, None]).reshape(-1)

    x = origins.mean(axis=0)
    r = residual(x)
    cost = float(r @ r)
    history = [cost]
    damping = config.initial_damping
    converged = False
    iterations = 0
    while iterations < config.max_iterations:
        iterations += 1
        grad = jac.T @ r
        if not np.any(grad):
            converged = True
            break
        step = np.linalg.solve(jtj + damping * scale, -grad)
        x_new = x + step
        r_new = residual(x_new)
        cost_new = float(r_new @ r_new)
        # cost - cost_new expanded, which avoids cancellation near the optimum
        js = jac @ step
        if -(2.0 * float(r @ js) + float(js @ js)) >= 0.0:
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            damping *= config.damping_down
        else:
            damping *= config.damping_up
        if np.linalg.norm(step) < config.step_tolerance:
            converged = True
            break
    return TriangulationResult(x, objective(x, usable), iterations, converged, warning, history)


def triangulate_frame(
    detections: Sequence[Detection2D],
    views: Mapping[int, CameraView] | Sequence[CameraView],
    config: LMConfig = LMConfig(),
) -> TriangulationResult | None:
    """Triangulate one joint in one frame from its per-view detections.

    Returns ``None`` when too few confident detections remain, so that the
    caller can fill the gap later.  Degenerate geometry still raises.
    """
    if not isinstance(views, Mapping):
        views = {v.view_id: v for v in views}
    rays, weights = [], []
    for det in detections:
        if det.view_id not in views:
            raise InputError(f"detection refers to unknown view {det.view_id!r}")
        if det.confidence < config.weight_threshold:
            continue
        rays.append(back_project(views[det.view_id], det.pixel))
        weights.append(det.confidence)
    try:
        return triangulate_lm(TriangulationProblem(rays, weights), config)
    except InsufficientViewsError:
        return None


def triangulate_batch(
    items: Sequence[Sequence[Detection2D]],
    views: Mapping[int, CameraView] | Sequence[CameraView],
    config: LMConfig = LMConfig(),
    threads: int = 1,
) -> list[TriangulationResult | None | DegenerateGeometryError]:
    """Triangulate many independent (joint, frame) detection groups.

    Output order matches ``items`` whatever the thread count.  Degenerate
    groups yield the exception instance instead of raising.
    """
    if not isinstance(views, Mapping):
        views = {v.view_id: v for v in views}

    def work(dets):
        try:
            return triangulate_frame(dets, views, config)
        except DegenerateGeometryError as exc:
            return exc

    if threads <= 1:
        return [work(d) for d in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, items))


def triangulate_arrays(
    views: Sequence[CameraView],
    pixels,
    confidence,
    config: LMConfig = LMConfig(),
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Triangulate dense observations of shape ``(F, V, J, 2)`` / ``(F, V, J)``.

    Entries with zero confidence are absent.  Returns ``(positions (F, J, 3),
    valid (F, J))``; positions are NaN where a landmark could not be solved.
    """
    pixels = np.asarray(pixels, dtype=float)
    confidence = np.asarray(confidence, dtype=float)
    F, V, J = confidence.shape
    if pixels.shape != (F, V, J, 2) or len(views) != V:
        raise InputError("pixels, confidence and views disagree in shape")
    items = [
        [Detection2D((float(pixels[f, v, j, 0]), float(pixels[f, v, j, 1])), float(confidence[f, v, j]), j,
                     views[v].view_id, f)
         for v in range(V) if confidence[f, v, j] > 0]
        for f in range(F) for j in range(J)
    ]
    pos = np.full((F * J, 3), np.nan)
    for i, res in enumerate(triangulate_batch(items, views, config, threads)):
        if isinstance(res, TriangulationResult):
            pos[i] = res.point
    pos = pos.reshape(F, J, 3)
    return pos, np.isfinite(pos).all(axis=-1)
