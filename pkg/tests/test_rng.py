import numpy as np

from evl_lab.rng import Purpose, Stream


def test_same_key_gives_same_draws() -> None:
    a = Stream.from_seed(7).child(3, Purpose.States).generator().random(10)
    b = Stream.from_seed(7).child(3, Purpose.States).generator().random(10)

    assert np.array_equal(a, b)


def test_children_do_not_depend_on_draw_order() -> None:
    root = Stream.from_seed(7)

    first = root.child(1).generator().random(5)
    root.child(2).generator().random(1000)
    again = root.child(1).generator().random(5)

    assert np.array_equal(first, again)


def test_purposes_give_independent_streams() -> None:
    stream = Stream.from_seed(7).child(1)

    states = stream.child(Purpose.States).generator().random(5)
    basis = stream.child(Purpose.Basis).generator().random(5)

    assert not np.array_equal(states, basis)


def test_seeds_give_different_streams() -> None:
    assert not np.array_equal(
        Stream.from_seed(1).generator().random(5),
        Stream.from_seed(2).generator().random(5),
    )


def test_nested_keys_match_flat_keys() -> None:
    nested = Stream.from_seed(3).child(1).child(Purpose.NextStates, 4, 0).generator().random(3)
    flat = Stream.from_seed(3).child(1, Purpose.NextStates, 4, 0).generator().random(3)

    assert np.array_equal(nested, flat)
