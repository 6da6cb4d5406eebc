"""AdamW recurrence, module parameter walking, and binary round-trips."""

import numpy as np
import pytest

from gazecast import nn
from gazecast import tensor as T
from gazecast.errors import CheckpointError, DatasetError, GradError
from gazecast.serialization import load_checkpoint, save_checkpoint
from gazecast.tensor import Tensor


class TinyNet(nn.Module):
    def __init__(self, rng):
        self.conv = nn.Conv2d(2, 3, 3, rng, stride=1, padding=1)
        self.heads = {"a": nn.Linear(3, 2, rng), "b": nn.Linear(3, 2, rng)}

    def forward(self, x):
        return T.global_max_pool(self.conv(x))


def test_named_parameters_dotted_paths():
    net = TinyNet(np.random.default_rng(0))
    names = [n for n, _ in net.named_parameters()]
    assert names == [
        "conv.weight",
        "conv.bias",
        "heads.a.weight",
        "heads.a.bias",
        "heads.b.weight",
        "heads.b.bias",
    ]


def test_adamw_zero_grad_zero_decay_is_noop():
    p = Tensor([1.5, -2.0], requires_grad=True)
    p.grad = np.zeros(2)
    opt = nn.AdamW([p], learning_rate=0.1, weight_decay=0.0)
    opt.step()
    np.testing.assert_array_equal(p.data, [1.5, -2.0])


def test_adamw_first_step_magnitude_is_lr():
    # hand evaluation at t=1: m_hat = g, v_hat = g^2, update = lr * g/(|g|+eps)
    p = Tensor([1.0], requires_grad=True)
    p.grad = np.array([1.0])
    opt = nn.AdamW([p], learning_rate=0.1, betas=(0.9, 0.999), epsilon=1e-8,
                   weight_decay=0.0)
    opt.step()
    assert p.data[0] == pytest.approx(0.9, abs=1e-8)
    assert opt.step_count == 1


def test_adamw_decoupled_decay_exact():
    p = Tensor([2.0], requires_grad=True)
    p.grad = np.array([0.0])
    opt = nn.AdamW([p], learning_rate=0.05, weight_decay=0.01)
    opt.step()
    assert p.data[0] == pytest.approx(2.0 - 0.05 * 0.01 * 2.0, abs=0.0)


def test_adamw_missing_grad_raises():
    p = Tensor([1.0], requires_grad=True)
    opt = nn.AdamW([p])
    with pytest.raises(GradError):
        opt.step()


def test_adamw_moment_shapes_and_counter():
    rng = np.random.default_rng(1)
    ps = [Tensor(rng.normal(size=(3, 4)), requires_grad=True),
          Tensor(rng.normal(size=(5,)), requires_grad=True)]
    opt = nn.AdamW(ps, learning_rate=1e-3)
    for t in range(1, 4):
        for p in ps:
            p.grad = rng.normal(size=p.shape)
        opt.step()
        assert opt.step_count == t
    for p, m, v in zip(ps, opt.m, opt.v):
        assert m.shape == p.shape and v.shape == p.shape


def test_adamw_deterministic():
    def run():
        rng = np.random.default_rng(9)
        p = Tensor(rng.normal(size=(4,)), requires_grad=True)
        opt = nn.AdamW([p], learning_rate=0.01, weight_decay=0.02)
        for _ in range(10):
            p.grad = rng.normal(size=(4,))
            opt.step()
        return p.data.copy()

    np.testing.assert_array_equal(run(), run())


@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_tensor_roundtrip(tmp_path, dtype):
    rng = np.random.default_rng(2)
    arr = rng.normal(size=(2, 3, 4)).astype(dtype)
    path = tmp_path / "t.gzt"
    T.write_tensor(path, arr)
    back = T.read_tensor(path)
    assert back.dtype == dtype
    np.testing.assert_array_equal(back, arr)


def test_tensor_bad_magic(tmp_path):
    path = tmp_path / "bad.gzt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DatasetError, match="magic"):
        T.read_tensor(path)


def test_tensor_truncated(tmp_path):
    arr = np.arange(12.0).reshape(3, 4)
    full = T.tensor_to_bytes(arr)
    path = tmp_path / "trunc.gzt"
    path.write_bytes(full[:-8])
    with pytest.raises(DatasetError, match="truncated"):
        T.read_tensor(path)


def test_checkpoint_roundtrip(tmp_path):
    net = TinyNet(np.random.default_rng(3))
    state = net.state_dict()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, state, "cafebabe", "variant = multimodal\n")
    loaded, h, cfg = load_checkpoint(path)
    assert h == "cafebabe"
    assert cfg == "variant = multimodal\n"
    assert list(loaded) == list(state)
    for k in state:
        np.testing.assert_array_equal(loaded[k], state[k])

    # loading into a fresh model reproduces parameters bit-exactly
    net2 = TinyNet(np.random.default_rng(99))
    net2.load_state_dict(loaded)
    for (_, a), (_, b) in zip(net.named_parameters(), net2.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data)


def test_checkpoint_corrupt_and_mismatch(tmp_path):
    net = TinyNet(np.random.default_rng(4))
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net.state_dict(), "h", "")
    raw = bytearray(path.read_bytes())
    raw[0] = 0x58
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    bad_state = {k: v for k, v in net.state_dict().items()}
    bad_state["conv.weight"] = np.zeros((1, 1, 1, 1))
    with pytest.raises(CheckpointError, match="shape"):
        net.load_state_dict(bad_state)
