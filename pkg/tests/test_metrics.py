import csv
from collections import deque

import numpy as np
import pytest

from src.core.errors import ConfigError, DataError, ShapeMismatchError
from src.data import write_image
from src.metrics import (
    AGGREGATE_ID, METRIC_NAMES, EvalReport, compute_image_metrics, conn_metric, evaluate_dataset, evaluate_pairs,
    gaussian_derivative_kernels, grad_metric, largest_component, mad, mse, sad,
)


def brute_largest_component(region):
    """4-connected flood fill in raster order; the first component wins ties"""
    h, w = region.shape
    seen = np.zeros_like(region, dtype=bool)
    best = np.zeros_like(region, dtype=bool)
    best_size = 0
    for i in range(h):
        for j in range(w):
            if not region[i, j] or seen[i, j]:
                continue
            component = np.zeros_like(region, dtype=bool)
            queue = deque([(i, j)])
            seen[i, j] = True
            size = 0
            while queue:
                y, x = queue.popleft()
                component[y, x] = True
                size += 1
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and region[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            if size > best_size:
                best, best_size = component, size
    return best


def brute_conn(pred, gt):
    thresholds = np.minimum(np.arange(11) * 0.1, 1.0)
    h, w = pred.shape
    levels = np.ones((h, w))
    assigned = np.zeros((h, w), dtype=bool)
    for i in range(1, len(thresholds)):
        omega = brute_largest_component((pred >= thresholds[i]) & (gt >= thresholds[i]))
        for y in range(h):
            for x in range(w):
                if not assigned[y, x] and not omega[y, x]:
                    levels[y, x] = thresholds[i - 1]
                    assigned[y, x] = True
    total = 0.0
    for y in range(h):
        for x in range(w):
            dp, dg = pred[y, x] - levels[y, x], gt[y, x] - levels[y, x]
            phi_p = 1.0 - (dp if dp >= 0.15 else 0.0)
            phi_g = 1.0 - (dg if dg >= 0.15 else 0.0)
            total += abs(phi_p - phi_g)
    return total / 1000.0


def test_closed_form_values():
    pred, gt = np.full((1, 1, 512, 512), 0.75), np.full((1, 1, 512, 512), 0.25)
    assert sad(pred, gt) == pytest.approx(131.072)
    assert mse(pred, gt) == pytest.approx(0.25)
    assert mad(pred, gt) == pytest.approx(0.5)


def test_pixel_metrics_match_loops(rng):
    pred, gt = rng.random((1, 1, 7, 9)), rng.random((1, 1, 7, 9))
    diffs = [pred[0, 0, i, j] - gt[0, 0, i, j] for i in range(7) for j in range(9)]
    assert sad(pred, gt) == pytest.approx(sum(abs(d) for d in diffs) / 1000)
    assert mse(pred, gt) == pytest.approx(sum(d * d for d in diffs) / len(diffs))
    assert mad(pred, gt) == pytest.approx(sum(abs(d) for d in diffs) / len(diffs))


def test_identical_mattes_score_zero(rng):
    gt = rng.random((1, 1, 16, 16))
    row = compute_image_metrics("x", gt, gt.copy())
    assert row.values() == (0.0, 0.0, 0.0, 0.0, 0.0)


def radial_matte(size, center, radius):
    yy, xx = np.mgrid[:size, :size]
    r = np.hypot(yy - center[0], xx - center[1])
    return np.clip(1.0 - r / radius, 0.0, 1.0)[None, None]


@pytest.mark.parametrize("seed", range(3))
def test_metrics_are_invariant_to_a_horizontal_flip(seed):
    rng = np.random.default_rng(seed)
    pred, gt = rng.random((1, 1, 16, 20)), rng.random((1, 1, 16, 20))
    flipped = pred[..., ::-1], gt[..., ::-1]
    for metric in (sad, mse, mad, grad_metric):
        assert metric(*flipped) == pytest.approx(metric(pred, gt), rel=1e-9)
    pred, gt = radial_matte(20, (9, 6), 7.0), radial_matte(20, (9, 6), 5.0)
    assert conn_metric(pred[..., ::-1], gt[..., ::-1]) == pytest.approx(conn_metric(pred, gt), rel=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_pixel_metric_orderings(seed):
    rng = np.random.default_rng(seed)
    pred, gt = rng.random((1, 1, 12, 12)), rng.random((1, 1, 12, 12))
    assert mse(pred, gt) <= mad(pred, gt) <= 1.0
    assert sad(pred, gt) == pytest.approx(mad(pred, gt) * pred.size / 1000)
    extreme = mad(np.ones((1, 1, 4, 4)), np.zeros((1, 1, 4, 4)))
    assert extreme == mse(np.ones((1, 1, 4, 4)), np.zeros((1, 1, 4, 4))) == 1.0


def test_grad_ignores_a_shared_constant_offset(rng):
    pred, gt = 0.8 * rng.random((1, 1, 16, 16)), 0.8 * rng.random((1, 1, 16, 16))
    base = grad_metric(pred, gt)
    assert base > 0
    assert grad_metric(pred + 0.2, gt + 0.2) == pytest.approx(base, rel=1e-9)


def test_conn_of_a_matte_against_itself_is_zero(rng):
    for gt in (rng.random((1, 1, 16, 16)), radial_matte(16, (8, 8), 5.0), np.zeros((1, 1, 8, 8))):
        assert conn_metric(gt, gt.copy()) == 0.0


def test_metric_input_checks(rng):
    with pytest.raises(ShapeMismatchError):
        sad(np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 4, 5)))
    with pytest.raises(DataError):
        mad(np.full((1, 1, 4, 4), 1.2), np.zeros((1, 1, 4, 4)))
    with pytest.raises(ShapeMismatchError, match="kernel"):
        grad_metric(rng.random((1, 1, 10, 10)), rng.random((1, 1, 10, 10)))
    with pytest.raises(ConfigError):
        conn_metric(np.zeros((4, 4)), np.zeros((4, 4)), step=1.5)


def test_gradient_kernels():
    hx, hy = gaussian_derivative_kernels(1.4)
    assert hx.shape == (11, 11)
    assert np.sum(hx ** 2) == pytest.approx(1.0)
    np.testing.assert_allclose(hx.sum(axis=1), 0.0, atol=1e-12)
    np.testing.assert_array_equal(hy, hx.T)


def _grad_oracle(matte, kernel):
    half = kernel.shape[0] // 2
    size = kernel.shape[0]
    padded = np.pad(matte, half, mode="edge")
    out = np.zeros_like(matte)
    for i in range(matte.shape[0]):
        for j in range(matte.shape[1]):
            acc = 0.0
            for u in range(size):
                for v in range(size):
                    acc += padded[i + u, j + v] * kernel[2 * half - u, 2 * half - v]
            out[i, j] = acc
    return out


def test_grad_matches_an_explicit_convolution(rng):
    pred, gt = rng.random((16, 14)), rng.random((16, 14))
    hx, hy = gaussian_derivative_kernels(1.4)

    def magnitude(m):
        return np.sqrt(_grad_oracle(m, hx) ** 2 + _grad_oracle(m, hy) ** 2)

    expected = np.sum((magnitude(pred) - magnitude(gt)) ** 2) / 1000
    assert grad_metric(pred, gt) == pytest.approx(expected, rel=1e-6)


def test_largest_component_breaks_ties_in_raster_order():
    region = np.zeros((5, 5), dtype=bool)
    region[0, 3:5] = True
    region[4, 0:2] = True
    np.testing.assert_array_equal(largest_component(region), brute_largest_component(region))
    assert largest_component(region)[0, 3]
    assert not largest_component(np.zeros((3, 3), dtype=bool)).any()


@pytest.mark.parametrize("seed", range(50))
def test_conn_matches_flood_fill(seed):
    rng = np.random.default_rng(seed)
    base = rng.random((16, 16))
    gt = np.clip(base + rng.normal(0, 0.1, base.shape), 0, 1)
    pred = np.clip(base + rng.normal(0, 0.2, base.shape), 0, 1)
    assert conn_metric(pred, gt) == pytest.approx(brute_conn(pred, gt), rel=1e-12, abs=1e-15)


def test_conn_penalizes_a_detached_blob():
    gt = np.zeros((16, 16))
    gt[2:10, 2:10] = 1.0
    pred = gt.copy()
    pred[12:15, 12:15] = 0.9
    score = conn_metric(pred, gt)
    assert score > 0.0
    assert score == pytest.approx(brute_conn(pred, gt), rel=1e-12)


def test_evaluate_dataset_against_itself(synth_dir):
    report = evaluate_dataset(synth_dir, synth_dir)
    assert len(report) == 8
    assert [r.id for r in report.rows] == [f"{i:05d}" for i in range(8)]
    assert all(v == 0.0 for r in report.rows for v in r.values())
    assert report.aggregate == {name: 0.0 for name in METRIC_NAMES}


def test_evaluate_dataset_with_flat_prediction_dir(synth_dir, tmp_path, rng):
    gt_ids = ["00001", "00003"]
    preds = {}
    for i in gt_ids:
        preds[i] = np.floor(rng.random((1, 1, 32, 32)) * 255 + 0.5) / 255
        write_image(tmp_path / f"{i}.png", preds[i])
    report = evaluate_dataset(tmp_path, synth_dir, ids=gt_ids)
    assert [r.id for r in report.rows] == gt_ids
    assert report.rows[0].mad > 0.0
    with pytest.raises(DataError, match="counterpart"):
        evaluate_dataset(tmp_path, synth_dir)
    with pytest.raises(DataError, match="counterpart"):
        evaluate_dataset(tmp_path, synth_dir, ids=["00001", "00002"])


def test_threaded_evaluation_matches_serial(rng):
    pairs = [(f"{i}", rng.random((1, 1, 16, 16)), rng.random((1, 1, 16, 16))) for i in range(6)]
    serial, threaded = evaluate_pairs(pairs), evaluate_pairs(pairs, workers=3)
    assert [r.values() for r in serial.rows] == [r.values() for r in threaded.rows]
    assert serial.aggregate == threaded.aggregate


def test_report_csv_and_aggregate(tmp_path, rng):
    pairs = [(f"{i:05d}", rng.random((1, 1, 16, 16)), rng.random((1, 1, 16, 16))) for i in range(3)]
    report = evaluate_pairs(pairs)
    path = report.write_csv(tmp_path / "out" / "report.csv")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["id"] + list(METRIC_NAMES)
    assert [r[0] for r in rows[1:]] == ["00000", "00001", "00002", AGGREGATE_ID]
    for row, metrics in zip(rows[1:4], report.rows):
        assert [float(v) for v in row[1:]] == list(metrics.values())
    for k, name in enumerate(METRIC_NAMES):
        assert float(rows[4][k + 1]) == pytest.approx(np.mean([getattr(r, name) for r in report.rows]))
    assert AGGREGATE_ID in report.format_table(title="eval")
    assert EvalReport().aggregate == {name: 0.0 for name in METRIC_NAMES}
