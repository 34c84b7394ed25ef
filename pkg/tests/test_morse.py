from app.services.morse import morse_relations_check


def test_stationary_sphere_counts():
    counts = {0: 1, 1: 1, 2: 1, 3: 1}
    verdict = morse_relations_check(counts, counts, 3)
    assert verdict.holds
    assert verdict.q == [0, 0, 0, 0]


def test_contractible_space_single_minimum():
    assert morse_relations_check({0: 1}, {0: 1}, 0).holds


def test_extra_critical_points_pair_up():
    verdict = morse_relations_check({0: 2, 1: 1}, {0: 1}, 2)
    assert verdict.holds
    assert verdict.q == [1, 0, 0]


def test_missing_geodesic_violates_relations():
    verdict = morse_relations_check({0: 1}, {0: 1, 1: 1}, 1)
    assert not verdict.holds
    assert verdict.violated_degree == 1


def test_string_keys_are_accepted():
    assert morse_relations_check({"0": 1}, {"0": 1}, 0).holds
