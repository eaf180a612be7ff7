import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvlandmark.errors import DegenerateGeometryError, InputError, InsufficientViewsError
from mvlandmark.geometry import Detection2D, Ray, project
from mvlandmark.synthetic import RigSpec, generate_rig, make_rng
from mvlandmark.triangulate import (
    LMConfig,
    TriangulationProblem,
    objective,
    orthogonal_projector,
    triangulate_arrays,
    triangulate_batch,
    triangulate_closed_form,
    triangulate_frame,
    triangulate_lm,
)

from conftest import random_view


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_problem(rng, n=None, wlo=0.2):
    n = n or int(rng.integers(3, 13))
    target = rng.standard_normal(3)
    rays, weights = [], []
    for _ in range(n):
        origin = target + unit(rng.standard_normal(3)) * rng.uniform(2, 6)
        aim = target + 0.05 * rng.standard_normal(3)
        rays.append(Ray(origin, unit(aim - origin)))
        weights.append(rng.uniform(wlo, 1.0))
    return TriangulationProblem(rays, weights)


def two_ray_problem():
    return TriangulationProblem(
        [Ray((0, 0, 0), (0, 0, 1)), Ray((1, 0, 0), unit((-1, 0, 5)))], [1.0, 1.0]
    )


def brute_objective(point, problem):
    # per-ray distance via the cross product, an independent route to the projector form
    total = 0.0
    for ray, w in zip(problem.rays, problem.weights):
        dist = np.linalg.norm(np.cross(np.asarray(point) - ray.origin, ray.direction))
        total += (w * dist) ** 2
    return total


def test_projector_axis():
    np.testing.assert_array_equal(orthogonal_projector((0, 0, 1)), np.diag([1.0, 1.0, 0.0]))


def test_projector_properties(rng):
    for _ in range(200):
        d = unit(rng.standard_normal(3))
        P = orthogonal_projector(d)
        assert np.linalg.norm(P @ d) < 1e-12
        assert np.max(np.abs(P @ P - P)) < 1e-12
        np.testing.assert_array_equal(P, P.T)


def test_projector_rejects_non_unit():
    with pytest.raises(InputError):
        orthogonal_projector((0, 0, 2))


def test_objective_examples():
    assert objective((0, 0, 5), two_ray_problem()) == pytest.approx(0, abs=1e-24)
    one = TriangulationProblem([Ray((0, 0, 0), (0, 0, 1))], [1.0])
    assert objective((1, 0, 5), one) == pytest.approx(1.0)
    half = TriangulationProblem([Ray((0, 0, 0), (0, 0, 1))], [0.5])
    assert objective((1, 0, 5), half) == pytest.approx(0.25)


def test_objective_matches_cross_product_form(rng):
    for _ in range(100):
        prob = random_problem(rng)
        x = rng.standard_normal(3) * 3
        assert objective(x, prob) == pytest.approx(brute_objective(x, prob), rel=1e-12)


def test_lm_two_rays():
    res = triangulate_lm(two_ray_problem())
    np.testing.assert_allclose(res.point, [0, 0, 5], atol=1e-8)
    assert res.converged


def test_closed_form_two_rays():
    np.testing.assert_allclose(triangulate_closed_form(two_ray_problem()), [0, 0, 5], atol=1e-14)


def test_lm_initialised_at_centroid(rng):
    prob = random_problem(rng)
    res = triangulate_lm(prob, LMConfig(max_iterations=1, initial_damping=1e12))
    # enormous damping keeps the first iterate at the start point
    np.testing.assert_allclose(res.point, prob.origins.mean(axis=0), atol=1e-6)


def test_zero_weight_ray_is_inert(rng):
    for _ in range(100):
        prob = random_problem(rng)
        extra = Ray(rng.standard_normal(3) * 4, unit(rng.standard_normal(3)))
        augmented = TriangulationProblem(list(prob.rays) + [extra], list(prob.weights) + [0.0])
        a = triangulate_lm(prob).point
        b = triangulate_lm(augmented).point
        assert np.max(np.abs(a - b)) < 1e-10
        np.testing.assert_allclose(triangulate_closed_form(augmented), triangulate_closed_form(prob), atol=1e-10)


def test_lm_matches_closed_form_5_cameras(rng):
    for _ in range(50):
        gt = rng.standard_normal(3) * 0.3
        views = [random_view(rng, i) for i in range(5)]
        dets = []
        for v in views:
            px = project(v, gt) + rng.normal(0, 2.0, 2)
            dets.append(Detection2D(tuple(px), float(rng.uniform(0.3, 1)), 0, v.view_id, 0))
        res = triangulate_frame(dets, views)
        from mvlandmark.geometry import back_project

        prob = TriangulationProblem([back_project(views[d.view_id], d.pixel) for d in dets],
                                    [d.confidence for d in dets])
        np.testing.assert_allclose(res.point, triangulate_closed_form(prob), atol=1e-8)


def test_closed_form_weight_scaling(rng):
    for _ in range(50):
        prob = random_problem(rng)
        c = rng.uniform(0.1, 1.0)
        scaled = TriangulationProblem(prob.rays, [c * w for w in prob.weights])
        np.testing.assert_allclose(triangulate_closed_form(scaled), triangulate_closed_form(prob), atol=1e-9)


def test_closed_form_random_probe_minimality(rng):
    for _ in range(20):
        prob = random_problem(rng, n=6)
        x_star = triangulate_closed_form(prob)
        f_star = objective(x_star, prob)
        probes = x_star + rng.standard_normal((1000, 3)) * rng.choice([1e-4, 1e-2, 1.0])
        assert all(objective(p, prob) >= f_star for p in probes)


def test_lm_monotone_history(rng):
    for _ in range(100):
        res = triangulate_lm(random_problem(rng), LMConfig(initial_damping=1.0))
        h = np.array(res.objective_history)
        # accepted steps never increase the cost beyond rounding of the cost itself
        assert np.all(np.diff(h) <= 1e-12 * h[0])
        assert h[-1] < h[0]


def test_permutation_invariance(rng):
    for _ in range(50):
        prob = random_problem(rng)
        perm = rng.permutation(len(prob.rays))
        shuffled = TriangulationProblem([prob.rays[i] for i in perm], [prob.weights[i] for i in perm])
        np.testing.assert_allclose(triangulate_lm(shuffled).point, triangulate_lm(prob).point, atol=1e-10)


def test_insufficient_views():
    with pytest.raises(InsufficientViewsError):
        triangulate_lm(TriangulationProblem([Ray((0, 0, 0), (0, 0, 1))], [1.0]))
    with pytest.raises(InsufficientViewsError):
        triangulate_lm(TriangulationProblem([Ray((0, 0, 0), (0, 0, 1)), Ray((1, 0, 0), (0, 0, 1))], [1.0, 0.05]))


def test_parallel_rays_degenerate():
    prob = TriangulationProblem([Ray((0, 0, 0), (0, 0, 1)), Ray((1, 0, 0), (0, 0, 1))], [1.0, 1.0])
    with pytest.raises(DegenerateGeometryError):
        triangulate_lm(prob)
    with pytest.raises(DegenerateGeometryError):
        triangulate_closed_form(prob)


def test_near_degenerate_warning():
    d2 = unit((1e-4, 0, 1))
    res = triangulate_lm(TriangulationProblem([Ray((0, 0, 0), (0, 0, 1)), Ray((1, 0, 0), d2)], [1.0, 1.0]))
    assert res.condition_warning


def test_non_convergence_flagged(rng):
    res = triangulate_lm(random_problem(rng), LMConfig(max_iterations=1))
    assert not res.converged
    assert res.iterations == 1


def test_lm_config_validation():
    with pytest.raises(InputError):
        LMConfig(damping_up=0.5)
    with pytest.raises(InputError):
        LMConfig(step_tolerance=0)


def test_problem_validation():
    with pytest.raises(InputError):
        TriangulationProblem([Ray((0, 0, 0), (0, 0, 1))], [1.0, 1.0])
    with pytest.raises(InputError):
        TriangulationProblem([Ray((0, 0, 0), (0, 0, 1))], [1.5])


def _rig_detections(views, point, conf=None):
    conf = conf or [1.0] * len(views)
    return [Detection2D(tuple(project(v, point)), c, 3, v.view_id, 0) for v, c in zip(views, conf)]


def test_frame_noiseless_recovery():
    views = generate_rig(RigSpec(camera_count=4))
    gt = np.array([0.1, -0.2, 1.1])
    res = triangulate_frame(_rig_detections(views, gt), views)
    np.testing.assert_allclose(res.point, gt, atol=1e-9)


def test_frame_zero_confidence_view():
    views = generate_rig(RigSpec(camera_count=4))
    gt = np.array([0.1, -0.2, 1.1])
    dets = _rig_detections(views, gt, [1.0, 0.0, 1.0, 1.0])
    np.testing.assert_allclose(triangulate_frame(dets, views).point, gt, atol=1e-9)


def test_frame_invalid_marker():
    views = generate_rig(RigSpec(camera_count=4))
    dets = _rig_detections(views, np.zeros(3), [1.0, 0.0, 0.05, 0.0])
    assert triangulate_frame(dets, views) is None


def test_frame_unknown_view():
    views = generate_rig(RigSpec(camera_count=2))
    det = Detection2D((1.0, 1.0), 1.0, 0, 99, 0)
    with pytest.raises(InputError):
        triangulate_frame([det], views)


def test_frame_noisy_matches_oracle():
    from mvlandmark.geometry import back_project

    views = generate_rig(RigSpec(camera_count=8))
    rng = make_rng(7)
    for _ in range(100):
        gt = rng.normal(0, 0.3, 3) + [0, 0, 1]
        dets = [Detection2D(tuple(project(v, gt) + rng.normal(0, 2, 2)), float(rng.uniform(0.2, 1)), 0, v.view_id, 0)
                for v in views]
        prob = TriangulationProblem([back_project(views[d.view_id], d.pixel) for d in dets],
                                    [d.confidence for d in dets])
        np.testing.assert_allclose(triangulate_frame(dets, views).point, triangulate_closed_form(prob), atol=1e-8)


def test_batch_thread_count_does_not_change_output():
    views = generate_rig(RigSpec(camera_count=6))
    rng = make_rng(3)
    items = []
    for _ in range(60):
        gt = rng.normal(0, 0.3, 3)
        items.append([Detection2D(tuple(project(v, gt) + rng.normal(0, 1, 2)), 0.9, 0, v.view_id, 0) for v in views])
    items.append([])
    a = triangulate_batch(items, views, threads=1)
    b = triangulate_batch(items, views, threads=8)
    assert a[-1] is None and b[-1] is None
    for x, y in zip(a[:-1], b[:-1]):
        assert x.point.tobytes() == y.point.tobytes()


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_rigid_invariance(seed):
    from conftest import random_rotation
    from mvlandmark.geometry import back_project

    rng = np.random.default_rng(seed)
    views = [random_view(rng, i) for i in range(int(rng.integers(3, 8)))]
    gt = rng.normal(0, 0.2, 3)
    pixels = [project(v, gt) + rng.normal(0, 2, 2) for v in views]
    w = rng.uniform(0.2, 1, len(views))
    R0, t0 = random_rotation(rng), rng.normal(0, 2, 3)
    moved = [v.moved(v.rotation @ R0.T, v.translation - v.rotation @ R0.T @ t0) for v in views]
    a = triangulate_lm(TriangulationProblem([back_project(v, p) for v, p in zip(views, pixels)], w)).point
    b = triangulate_lm(TriangulationProblem([back_project(v, p) for v, p in zip(moved, pixels)], w)).point
    np.testing.assert_allclose(b, R0 @ a + t0, atol=1e-8)


def test_arrays_match_per_detection_route():
    from mvlandmark.synthetic import MotionSpec, ObservationSpec, generate_motion, observe_arrays

    views = generate_rig(RigSpec(camera_count=5))
    gt = generate_motion(MotionSpec(frame_count=4, seed=1))
    pixels, conf, present = observe_arrays(views, gt, ObservationSpec(1.0, 0.5, seed=2))
    pos, valid = triangulate_arrays(views, pixels, conf)
    assert pos.shape == (4, 25, 3) and valid.shape == (4, 25)
    for f in range(4):
        for j in range(25):
            dets = [Detection2D(tuple(pixels[f, v, j]), conf[f, v, j], j, v, f) for v in range(5) if present[f, v, j]]
            res = triangulate_frame(dets, views)
            if res is None:
                assert not valid[f, j] and np.isnan(pos[f, j]).all()
            else:
                assert valid[f, j]
                np.testing.assert_array_equal(pos[f, j], res.point)
    assert valid.any() and not valid.all()


def test_more_views_reduce_error():
    from mvlandmark.synthetic import MotionSpec, ObservationSpec, generate_motion, mpjpe, observe_arrays

    med = {}
    for n in (4, 16):
        views = generate_rig(RigSpec(camera_count=n))
        errs = []
        for seed in range(10):
            gt = generate_motion(MotionSpec(frame_count=5, seed=seed))
            pixels, conf, _ = observe_arrays(views, gt, ObservationSpec(2.0, 0.0, seed=seed))
            errs.append(mpjpe(triangulate_arrays(views, pixels, conf)[0], gt))
        med[n] = np.median(errs)
    assert med[16] <= med[4]
