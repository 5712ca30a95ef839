import numpy as np

from mufasa.seeding import Purpose, derived_rng


def test_streams_are_reproducible():
    first = derived_rng(4, Purpose.ARMS, 17).normal(size=5)
    second = derived_rng(4, Purpose.ARMS, 17).normal(size=5)
    np.testing.assert_array_equal(first, second)


def test_streams_are_independent():
    draws = {
        "base": derived_rng(4, Purpose.ARMS, 17).normal(),
        "seed": derived_rng(5, Purpose.ARMS, 17).normal(),
        "purpose": derived_rng(4, Purpose.NOISE, 17).normal(),
        "key": derived_rng(4, Purpose.ARMS, 18).normal(),
        "no-key": derived_rng(4, Purpose.ARMS).normal(),
    }
    assert len(set(draws.values())) == len(draws)


def test_stream_ignores_other_consumers():
    derived_rng(0, Purpose.NOISE, 1).normal(size=1000)
    assert derived_rng(0, Purpose.ARMS, 1).normal() == derived_rng(0, Purpose.ARMS, 1).normal()


def test_pcg64():
    assert isinstance(derived_rng(0, Purpose.POLICY).bit_generator, np.random.PCG64)
