import numpy as np
import pytest

from acgap.buffers import ReplayBuffer, Transition, TransitionBatch


def test_batch_default_weights_and_take():
    b = TransitionBatch([0, 1, 2], [1, 0, 1], [0.0, 1.0, 0.5], [1, 2, 0], [0, 1, 1])
    np.testing.assert_allclose(b.weights(), 1 / 3)
    sub = b.take([2, 2])
    assert len(sub) == 2 and list(sub.state) == [2, 2]
    assert list(b.transitions())[1] == Transition(1, 0, 1.0, 2, 1)


def test_round_trip_through_transitions():
    items = [Transition(0, 1, 0.5, 1, 0), Transition(1, 0, 0.0, 0, 1)]
    b = TransitionBatch.from_transitions(items)
    assert list(b.transitions()) == items
    assert len(TransitionBatch.from_transitions([])) == 0


def test_episode_buffer_capacity_and_clear():
    buf = ReplayBuffer(capacity=2)
    for k in range(3):
        buf.add((k, 0, 0.0, k + 1, 0))
    assert len(buf) == 2
    assert list(buf.as_batch().state) == [1, 2]
    buf.clear()
    assert len(buf) == 0
    with pytest.raises(ValueError):
        buf.sample(np.random.default_rng(0), 1)


def test_initial_buffer_stores_states_only():
    buf = ReplayBuffer(kind="initial")
    for s in (3, 1, 4):
        buf.add(s)
    np.testing.assert_array_equal(buf.states(), [3, 1, 4])
    with pytest.raises(TypeError):
        buf.as_batch()
    draws = buf.sample(np.random.default_rng(0), 500)
    assert set(draws.tolist()) == {1, 3, 4}


def test_sampling_with_replacement_is_seeded():
    buf = ReplayBuffer()
    buf.extend_batch(TransitionBatch(np.arange(5), np.zeros(5), np.zeros(5), np.arange(5), np.zeros(5)))
    a = buf.sample(np.random.default_rng(7), 300)
    b = buf.sample(np.random.default_rng(7), 300)
    assert len(a) == 300
    np.testing.assert_array_equal(a.state, b.state)
    assert len(np.unique(a.state)) == 5


def test_invalid_buffers():
    with pytest.raises(ValueError):
        ReplayBuffer(kind="other")
    with pytest.raises(ValueError):
        ReplayBuffer(capacity=0)
