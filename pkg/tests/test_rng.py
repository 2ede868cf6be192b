import numpy as np

from divsandpile.rng import THREADS_ENV, map_trials, stream_id, thread_count, trial_rng


def test_streams_are_stable_and_distinct():
    assert stream_id("odometer") == stream_id("odometer")
    assert stream_id("odometer") != stream_id("field-cholesky")


def test_trial_rng_depends_on_every_key():
    base = trial_rng(1, 2, "a").standard_normal(4)
    assert np.array_equal(base, trial_rng(1, 2, "a").standard_normal(4))
    for other in (trial_rng(0, 2, "a"), trial_rng(1, 3, "a"), trial_rng(1, 2, "b")):
        assert not np.array_equal(base, other.standard_normal(4))


def test_full_width_seed_is_accepted():
    trial_rng(2**64 - 1, 0).random()


def test_thread_count_sources(monkeypatch):
    assert thread_count(3) == 3
    assert thread_count(0) == 1
    monkeypatch.setenv(THREADS_ENV, "5")
    assert thread_count() == 5
    monkeypatch.delenv(THREADS_ENV)
    assert thread_count() >= 1


def test_map_trials_preserves_order_across_thread_counts():
    fn = lambda t: float(trial_rng(9, t, "x").standard_normal())  # noqa: E731
    serial = map_trials(fn, range(40), threads=1)
    assert serial == map_trials(fn, range(40), threads=6)
    assert map_trials(fn, [], threads=4) == []
