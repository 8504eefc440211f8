import numpy as np
import pytest

from rforce.checkpoint import CheckpointFormatError, load_checkpoint, read_checkpoint, save_checkpoint
from rforce.dynamics import build_network, initial_state
from rforce.targets import multi_periodic
from rforce.training import TrainingSchedule, run_test, train


@pytest.mark.parametrize("arch, k", [("rank1", 1), ("rank1", 3), ("rankN", 2)])
def test_round_trip(tmp_path, arch, k):
    net = build_network(arch, "rforce", 1.5, 24, k, seed=2)
    net.w_readout[:] = np.random.default_rng(0).normal(size=net.w_readout.shape)
    state = initial_state(24, 1)
    path = tmp_path / "n.ckpt"
    save_checkpoint(net, path, schedule=TrainingSchedule(), state=state, extra={"note": "x"})
    back, st = load_checkpoint(path, with_state=True)
    assert type(back) is type(net) and back.g == net.g and back.init_kind == net.init_kind
    for name in ("reservoir", "w_readout", "w_feedback", "error_injection"):
        a, b = getattr(net, name, None), getattr(back, name, None)
        assert (a is None and b is None) or np.array_equal(a, b)
    assert np.array_equal(st.x, state.x)
    header, _ = read_checkpoint(path)
    assert header["schedule"]["dt"] == 0.1 and header["extra"] == {"note": "x"}


def test_corrupted_byte(tmp_path):
    path = tmp_path / "n.ckpt"
    save_checkpoint(build_network("rank1", "normal", 1.5, 10, 1, seed=0), path)
    data = bytearray(path.read_bytes())
    data[len(data) // 2] ^= 0x01
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointFormatError, match="checksum"):
        load_checkpoint(path)


def test_truncated(tmp_path):
    path = tmp_path / "n.ckpt"
    save_checkpoint(build_network("rank1", "normal", 1.5, 10, 1, seed=0), path)
    path.write_bytes(path.read_bytes()[:-100])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_version_mismatch(tmp_path):
    path = tmp_path / "n.ckpt"
    save_checkpoint(build_network("rank1", "normal", 1.5, 10, 1, seed=0), path)
    data = path.read_bytes().replace(b"RFORCE-CHECKPOINT 1", b"RFORCE-CHECKPOINT 9", 1)
    path.write_bytes(data)
    with pytest.raises(CheckpointFormatError, match="version"):
        load_checkpoint(path)


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_text("hello\n")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_resume_gives_identical_trace(tmp_path):
    net = build_network("rank1", "rforce", 1.5, 400, 1, seed=0)
    tgt = multi_periodic(duration=400)
    sched = TrainingSchedule(warmup=10.0, train=200.0, test=20.0)
    trained, tr = train(net, tgt, sched, seed=0)
    path = tmp_path / "t.ckpt"
    save_checkpoint(trained, path, schedule=sched, state=tr.final_state)
    back, state = load_checkpoint(path, with_state=True)
    a = run_test(trained, tr.final_state, tgt, 300)
    b = run_test(back, state, tgt, 300)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
