import numpy as np
import pytest

from src.core.errors import ConfigError, DataError, ShapeMismatchError
from src.data import composite, semantic_target, transition_mask
from src.losses import LossWeights, loss_alpha, loss_d, loss_s, total_loss
from src.tensor import Tensor4
from src.tensor.gradcheck import check_gradients


def scalar(value):
    return Tensor4.scalar(value, np.float64)


def test_semantic_loss_values(rng):
    alpha = rng.random((2, 1, 32, 32))
    target = semantic_target(alpha)
    assert loss_s(Tensor4(target), alpha).item() == 0.0
    assert loss_s(Tensor4(target + 1.0), alpha).item() == pytest.approx(0.5)
    assert loss_s(Tensor4(target + 1.0), alpha, target=target).item() == pytest.approx(0.5)
    with pytest.raises(ShapeMismatchError, match="1/16"):
        loss_s(Tensor4(np.zeros((2, 1, 4, 4))), alpha)


def test_semantic_loss_gradients(rng):
    alpha = rng.random((1, 1, 32, 32))
    error = check_gradients(lambda s: loss_s(s, alpha), [rng.random((1, 1, 2, 2))])
    assert error < 1e-4


def test_detail_loss_is_normalized_over_the_mask(rng):
    mask = np.zeros((1, 1, 8, 8))
    mask[..., 2:4, 2:5] = 1.0
    alpha = np.zeros((1, 1, 8, 8))
    assert loss_d(Tensor4(np.ones((1, 1, 8, 8))), alpha, mask).item() == pytest.approx(1.0)
    assert loss_d(Tensor4(np.ones((1, 1, 8, 8))), alpha, np.zeros_like(mask)).item() == 0.0

    d_p = rng.random((1, 1, 8, 8))
    base = loss_d(Tensor4(d_p), alpha, mask).item()
    outside = d_p + (1.0 - mask) * rng.random(d_p.shape)
    assert loss_d(Tensor4(outside), alpha, mask).item() == base


def test_detail_loss_rejects_soft_masks():
    with pytest.raises(DataError, match="binary"):
        loss_d(Tensor4(np.zeros((1, 1, 2, 2))), np.zeros((1, 1, 2, 2)), np.full((1, 1, 2, 2), 0.5))


def test_detail_loss_gradients(rng):
    alpha = rng.random((1, 1, 16, 16))
    mask = transition_mask((alpha > 0.5).astype(np.float64), band_radius=2)
    error = check_gradients(lambda d: loss_d(d, alpha, mask), [rng.random((1, 1, 16, 16))])
    assert error < 1e-4


def test_alpha_loss_vanishes_on_consistent_samples(rng):
    fg, bg = rng.random((1, 3, 8, 8)), rng.random((1, 3, 8, 8))
    alpha = rng.random((1, 1, 8, 8))
    image = composite(fg, bg, alpha)
    l_alpha, l_c = loss_alpha(Tensor4(alpha), alpha, image, fg, bg)
    assert l_alpha.item() == pytest.approx(0.0, abs=1e-12)
    assert l_c.item() == pytest.approx(0.0, abs=1e-12)


def test_compositional_term_ignores_alpha_when_fg_equals_bg(rng):
    fg = rng.random((1, 3, 8, 8))
    image = rng.random((1, 3, 8, 8))
    alpha_g = rng.random((1, 1, 8, 8))
    values = [loss_alpha(Tensor4(rng.random((1, 1, 8, 8))), alpha_g, image, fg, fg)[1].item() for _ in range(3)]
    assert values == pytest.approx([values[0]] * 3, abs=1e-12)


def test_compositional_term_on_a_black_white_composite(rng):
    alpha_g = rng.random((1, 1, 8, 8))
    fg, bg = np.ones((1, 3, 8, 8)), np.zeros((1, 3, 8, 8))
    image = np.repeat(alpha_g, 3, axis=1)
    l_alpha, l_c = loss_alpha(Tensor4(1.0 - alpha_g), alpha_g, image, fg, bg)
    expected_c = sum(abs(2 * a - 1) for a in alpha_g.ravel()) / alpha_g.size
    assert l_c.item() == pytest.approx(expected_c, rel=1e-12)
    assert l_alpha.item() == pytest.approx(2 * expected_c, rel=1e-12)


def test_alpha_loss_without_fg_bg(rng):
    alpha_g = rng.random((1, 1, 4, 4))
    pred = rng.random((1, 1, 4, 4))
    l_alpha, l_c = loss_alpha(Tensor4(pred), alpha_g, None)
    assert l_c.item() == 0.0
    assert l_alpha.item() == pytest.approx(np.abs(pred - alpha_g).mean())
    with pytest.raises(DataError):
        loss_alpha(Tensor4(pred), alpha_g, np.zeros((1, 3, 4, 4)), fg=np.zeros((1, 3, 4, 4)))


def test_alpha_loss_gradients(rng):
    alpha_g = rng.random((1, 1, 6, 6))
    fg, bg = rng.random((1, 3, 6, 6)), rng.random((1, 3, 6, 6))
    image = composite(fg, bg, alpha_g)

    def fn(pred):
        l_alpha, _ = loss_alpha(pred, alpha_g, image, fg, bg)
        return l_alpha

    # keep the prediction away from the kinks of |.|
    pred = alpha_g + np.where(rng.random(alpha_g.shape) < 0.5, -0.3, 0.3)
    assert check_gradients(fn, [pred]) < 1e-4


def test_total_is_the_weighted_sum(rng):
    a, b, c, lc = rng.random(4)
    breakdown = total_loss(scalar(a), scalar(b), scalar(c), scalar(lc), LossWeights())
    assert breakdown.total == pytest.approx(a + 10 * b + c, abs=1e-12)
    assert abs(breakdown.total - (breakdown.l_s + 10 * breakdown.l_d + breakdown.l_alpha)) < 1e-9
    assert breakdown.total_tensor.item() == pytest.approx(breakdown.total)
    assert breakdown.l_c == pytest.approx(lc)
    assert set(breakdown.as_row()) == {"l_s", "l_d", "l_alpha", "l_c", "total"}

    zero = total_loss(scalar(a), scalar(b), scalar(c), scalar(lc), LossWeights(0.0, 0.0, 0.0))
    assert zero.total == 0.0


def test_perfect_predictions_give_zero_total(rng):
    fg, bg = rng.random((1, 3, 32, 32)), rng.random((1, 3, 32, 32))
    alpha = (rng.random((1, 1, 32, 32)) > 0.5).astype(np.float64)
    image = composite(fg, bg, alpha)
    l_alpha, l_c = loss_alpha(Tensor4(alpha), alpha, image, fg, bg)
    breakdown = total_loss(loss_s(Tensor4(semantic_target(alpha)), alpha),
                           loss_d(Tensor4(alpha), alpha, transition_mask(alpha)), l_alpha, l_c)
    assert breakdown.total == pytest.approx(0.0, abs=1e-12)


def test_loss_weights_validation():
    with pytest.raises(ConfigError):
        LossWeights(lambda_d=-1.0)
    with pytest.raises(ConfigError):
        LossWeights.from_dict({"lambda_x": 1.0})
    weights = LossWeights.from_dict({"lambda_s": 2, "lambda_d": 5, "lambda_alpha": 1})
    assert weights.to_dict() == {"lambda_s": 2.0, "lambda_d": 5.0, "lambda_alpha": 1.0}
