import json
import struct

import numpy as np
import pytest

from src.core.errors import CheckpointError, ConfigError, MissingGradientError, ShapeMismatchError
from src.nn import (
    MAGIC, ParamStore, SgdConfig, conv_block, down_stage, load_checkpoint, save_checkpoint, se_block, sgd_step,
    up_stage,
)
from src.tensor import GradTape, Tensor4, mul, sum_all
from src.tensor.gradcheck import check_gradients


def test_se_block_with_zero_weights_halves_the_input(rng):
    params = ParamStore(seed=0, dtype="float64")
    x = Tensor4(rng.normal(size=(2, 8, 4, 4)))
    se_block(x, params, "se", reduction=4)
    for name in ("se.fc1.weight", "se.fc2.weight"):
        params.set(name, np.zeros_like(params[name]))
    np.testing.assert_allclose(se_block(x, params, "se", reduction=4).numpy(), 0.5 * x.numpy())


def test_se_block_rejects_indivisible_channels(rng):
    with pytest.raises(ShapeMismatchError, match="reduction"):
        se_block(Tensor4(rng.normal(size=(1, 6, 2, 2))), ParamStore(), "se", reduction=4)


def test_se_block_gradients(rng):
    params = ParamStore(seed=5, dtype="float64")
    weights = rng.normal(size=(1, 8, 3, 3))
    x = rng.normal(size=(1, 8, 3, 3))
    error = check_gradients(lambda t: sum_all(mul(se_block(t, params, "se", 4), Tensor4(weights))), [x])
    assert error < 1e-4


def test_conv_block_and_stages_shapes(rng):
    params = ParamStore(seed=1, dtype="float64")
    x = Tensor4(rng.normal(size=(2, 3, 8, 8)))
    y = conv_block(x, params, "c", 5)
    assert y.shape == (2, 5, 8, 8)
    assert y.numpy().min() >= 0.0
    down = down_stage(y, params, "d", 6)
    assert down.shape == (2, 6, 4, 4)
    up = up_stage(down, params, "u", 4, skip=y)
    assert up.shape == (2, 4, 8, 8)
    assert params["u.weight"].shape == (4, 6 + 5, 3, 3)
    with pytest.raises(ShapeMismatchError, match="skip"):
        up_stage(down, params, "u2", 4, skip=Tensor4(np.zeros((2, 5, 4, 4))))


def test_normalized_conv_block_drops_bias_and_adds_affine(rng):
    params = ParamStore(seed=2, dtype="float64")
    x = Tensor4(rng.normal(size=(2, 3, 8, 8)))
    y = conv_block(x, params, "c", 6, norm_groups=4)
    assert y.shape == (2, 6, 8, 8)
    assert "c.bias" not in params
    np.testing.assert_array_equal(params["c.norm.gamma"], np.ones((1, 6, 1, 1)))
    np.testing.assert_array_equal(params["c.norm.beta"], np.zeros((1, 6, 1, 1)))
    assert y.numpy().min() >= 0.0

    params.set("c.weight", np.zeros_like(params["c.weight"]))
    np.testing.assert_array_equal(conv_block(x, params, "c", 6, norm_groups=4).numpy(), 0.0)

    down = down_stage(y, params, "d", 8, norm_groups=4)
    up = up_stage(down, params, "u", 4, skip=y, norm_groups=4)
    assert up.shape == (2, 4, 8, 8)
    assert {"d.norm.gamma", "u.norm.beta"} <= set(params.names())


def test_normalized_conv_block_gradients(rng):
    params = ParamStore(seed=3, dtype="float64")
    weights = rng.normal(size=(1, 4, 4, 4))
    x = rng.normal(size=(1, 2, 4, 4))
    error = check_gradients(
        lambda t: sum_all(mul(conv_block(t, params, "c", 4, norm_groups=2), Tensor4(weights))), [x])
    assert error < 1e-4


def test_param_initialization_is_deterministic_and_order_free():
    a, b = ParamStore(seed=7), ParamStore(seed=7)
    a.get("x.weight", (4, 3, 3, 3))
    a.get("y.weight", (2, 4, 1, 1))
    b.get("y.weight", (2, 4, 1, 1))
    b.get("x.weight", (4, 3, 3, 3))
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert not np.array_equal(ParamStore(seed=8).get("x.weight", (4, 3, 3, 3)), a["x.weight"])
    bound = np.sqrt(6.0 / 27)
    assert np.abs(a["x.weight"]).max() <= bound
    with pytest.raises(ShapeMismatchError):
        a.get("x.weight", (4, 3, 1, 1))
    with pytest.raises(ConfigError):
        a.get("z", (1, 1, 1, 1), init="orthogonal")


def test_variable_is_watched_under_its_name():
    params = ParamStore(seed=0, dtype="float64")
    tape = GradTape()
    leaf = params.variable("w", (1, 1, 1, 1), tape)
    assert tape.named_leaves["w"] is leaf
    assert params.variable("w", (1, 1, 1, 1), tape) is leaf


def test_checkpoint_round_trip(tmp_path, rng):
    params = ParamStore(seed=11, dtype="float32")
    params.get("a.weight", (3, 2, 3, 3))
    params.get("a.bias", (1, 3, 1, 1), init="zeros")
    params.set("a.bias", rng.normal(size=(1, 3, 1, 1)), momentum=rng.normal(size=(1, 3, 1, 1)))
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, {"note": "x", "model": {"depth": 2}})

    loaded, config = load_checkpoint(path)
    assert config == {"note": "x", "model": {"depth": 2}}
    assert loaded.seed == 11 and loaded.dtype == np.float32
    assert loaded.names() == params.names()
    for name in params:
        np.testing.assert_array_equal(loaded[name], params[name])
        np.testing.assert_array_equal(loaded.momentum(name), params.momentum(name))
    assert path.read_bytes().startswith(MAGIC)


def test_corrupt_checkpoints_are_rejected(tmp_path):
    params = ParamStore(seed=0)
    params.get("w", (2, 2, 1, 1))
    path = tmp_path / "ok.ckpt"
    save_checkpoint(path, params)
    raw = path.read_bytes()

    for name, data in (("magic", b"XXXX" + raw[4:]), ("short", raw[:-3]), ("trailing", raw + b"\0"),
                       ("tiny", raw[:6])):
        bad = tmp_path / f"{name}.ckpt"
        bad.write_bytes(data)
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")


def _rewrite_manifest(raw: bytes, edit) -> bytes:
    header = struct.Struct("<4sIQ")
    magic, version, length = header.unpack_from(raw, 0)
    manifest = json.loads(raw[header.size:header.size + length].decode("utf-8"))
    edit(manifest)
    encoded = json.dumps(manifest).encode("utf-8")
    return header.pack(magic, version, len(encoded)) + encoded + raw[header.size + length:]


def _set_first_tensor(key, value):
    def edit(manifest):
        manifest["tensors"][0][key] = value
    return edit


@pytest.mark.parametrize("edit, message", [
    (_set_first_tensor("kind", "bogus"), "unknown tensor kind"),
    (lambda m: m["tensors"][0].pop("dtype"), "lacks keys"),
    (lambda m: m["tensors"][0].pop("name"), "lacks keys"),
    (_set_first_tensor("dtype", "int32"), "bad tensor dtype"),
    (_set_first_tensor("dtype", "not-a-dtype"), "bad tensor dtype"),
    (_set_first_tensor("shape", [2, 2, 1, 1000]), "truncated"),
    (_set_first_tensor("shape", [2, -2, 1, 1]), "non-negative"),
    (_set_first_tensor("shape", "2x2"), "non-negative"),
    (_set_first_tensor("name", 5), "name must be a string"),
    (lambda m: m["tensors"].__setitem__(0, [1, 2]), "not an object"),
    (lambda m: m.__setitem__("tensors", {"w": 1}), "tensor list"),
    (lambda m: m.__setitem__("dtype", "int8"), "bad manifest header"),
    (lambda m: m.__setitem__("seed", "abc"), "bad manifest header"),
])
def test_corrupt_manifest_entries_raise_checkpoint_error(tmp_path, edit, message):
    params = ParamStore(seed=0)
    params.get("w", (2, 2, 1, 1))
    path = tmp_path / "ok.ckpt"
    save_checkpoint(path, params)
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(_rewrite_manifest(path.read_bytes(), edit))
    with pytest.raises(CheckpointError, match=message):
        load_checkpoint(bad)


def test_momentum_without_parameter_is_rejected(tmp_path):
    params = ParamStore(seed=0)
    params.get("w", (2, 2, 1, 1))
    path = tmp_path / "ok.ckpt"
    save_checkpoint(path, params)
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(_rewrite_manifest(path.read_bytes(), _set_first_tensor("kind", "momentum")))
    with pytest.raises(CheckpointError, match="without a parameter"):
        load_checkpoint(bad)


def test_sgd_step_matches_hand_computation():
    params = ParamStore(seed=0, dtype="float64")
    params.set("w", np.full((1, 1, 1, 2), 1.0))
    cfg = SgdConfig(lr=0.1, momentum=0.9, weight_decay=0.01, decay_every=50)
    grad = np.array([[[[0.5, -1.0]]]])

    sgd_step(params, {"w": grad}, cfg, epoch=0)
    v1 = grad + 0.01 * 1.0
    np.testing.assert_allclose(params.momentum("w"), v1)
    np.testing.assert_allclose(params["w"], 1.0 - 0.1 * v1)

    theta1 = params["w"].copy()
    sgd_step(params, {"w": grad}, cfg, epoch=0)
    v2 = 0.9 * v1 + grad + 0.01 * theta1
    np.testing.assert_allclose(params["w"], theta1 - 0.1 * v2)


def test_sgd_requires_every_gradient():
    params = ParamStore(seed=0, dtype="float64")
    params.get("a", (1, 1, 1, 1))
    params.get("b", (1, 1, 1, 1))
    with pytest.raises(MissingGradientError, match="'b'"):
        sgd_step(params, {"a": np.zeros((1, 1, 1, 1))}, SgdConfig(), epoch=0)


def test_learning_rate_schedule_and_validation():
    cfg = SgdConfig(lr=0.02, decay_factor=0.1, decay_every=50)
    assert cfg.lr_at(0) == pytest.approx(0.02)
    assert cfg.lr_at(49) == pytest.approx(0.02)
    assert cfg.lr_at(50) == pytest.approx(0.002)
    assert cfg.lr_at(149) == pytest.approx(0.0002)
    assert SgdConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        SgdConfig(momentum=1.0)
    with pytest.raises(ConfigError):
        SgdConfig(weight_decay=-1.0)
    with pytest.raises(ConfigError):
        SgdConfig.from_dict({"lr": 0.1, "nesterov": True})


def test_conv_block_reference_behaviour(rng):
    params = ParamStore(seed=2, dtype="float64")
    x = Tensor4(rng.normal(size=(1, 3, 6, 6)))
    conv_block(x, params, "z", 4)
    for name in ("z.weight", "z.bias"):
        params.set(name, np.zeros_like(params[name]))
    np.testing.assert_array_equal(conv_block(x, params, "z", 4).numpy(), 0.0)
    assert conv_block(x, params, "s", 4, k=3, stride=2).shape == (1, 4, 3, 3)
    np.testing.assert_array_equal(conv_block(x, params, "s", 4, stride=2).numpy(),
                                  conv_block(x, params, "s", 4, stride=2).numpy())
    with pytest.raises(ShapeMismatchError):
        conv_block(x, params, "s", 5)


def test_down_then_up_restores_size(rng):
    params = ParamStore(seed=3, dtype="float64")
    x = Tensor4(rng.normal(size=(1, 2, 8, 8)))
    assert up_stage(down_stage(x, params, "d", 4), params, "u", 2).shape == (1, 2, 8, 8)
    for name in ("u.weight", "u.bias"):
        params.set(name, np.zeros_like(params[name]))
    np.testing.assert_array_equal(up_stage(down_stage(x, params, "d", 4), params, "u", 2).numpy(), 0.0)


def test_se_block_gates():
    params = ParamStore(seed=0, dtype="float64")
    zeros = Tensor4(np.zeros((1, 4, 2, 2)))
    np.testing.assert_array_equal(se_block(zeros, params, "se", 2).numpy(), 0.0)

    # positive identity excitation: the gate of channel 0 follows its mean
    params.set("se.fc1.weight", np.eye(2, 4).reshape(2, 4, 1, 1))
    params.set("se.fc2.weight", np.eye(4, 2).reshape(4, 2, 1, 1))
    gates = []
    for level in np.linspace(0.5, 3.0, 6):
        x = np.ones((1, 4, 2, 2))
        x[:, 0] = level
        out = se_block(Tensor4(x), params, "se", 2).numpy()
        gates.append(out[0, 0, 0, 0] / level)
    assert all(0.5 <= g < 1.0 for g in gates)
    assert all(b >= a for a, b in zip(gates, gates[1:]))

    params.set("se.fc1.weight", 50.0 * np.ones((2, 4, 1, 1)))
    params.set("se.fc2.weight", 50.0 * np.ones((4, 2, 1, 1)))
    x = np.full((1, 4, 2, 2), 2.0)
    np.testing.assert_allclose(se_block(Tensor4(x), params, "se", 2).numpy(), x)


def test_sgd_reference_steps():
    params = ParamStore(seed=0, dtype="float64")
    params.set("w", np.full((1, 1, 1, 3), 0.7))
    sgd_step(params, {"w": np.zeros((1, 1, 1, 3))}, SgdConfig(weight_decay=0.0), epoch=0)
    np.testing.assert_array_equal(params["w"], 0.7)

    cfg = SgdConfig(lr=0.02, momentum=0.0, weight_decay=0.0)
    sgd_step(params, {"w": np.ones((1, 1, 1, 3))}, cfg, epoch=0)
    np.testing.assert_allclose(params["w"], 0.68)
    assert SgdConfig().lr_at(50) == pytest.approx(0.002)


def test_sgd_decreases_a_convex_quadratic():
    params = ParamStore(seed=0, dtype="float64")
    target = np.array([[[[1.0, -2.0, 0.5]]]])
    params.set("w", np.zeros((1, 1, 1, 3)))
    cfg = SgdConfig(lr=0.1, momentum=0.9, weight_decay=0.0)

    def objective():
        return 0.5 * float(np.sum((params["w"] - target) ** 2))

    before = objective()
    sgd_step(params, {"w": params["w"] - target}, cfg, epoch=0)
    assert objective() < before
