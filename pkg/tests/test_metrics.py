import numpy as np
import pytest
from hypothesis import given, strategies as st

from lts_curriculum.curriculum import select_nodes
from lts_curriculum.exceptions import ContractError
from lts_curriculum.hetero_graph import NoiseRecord
from lts_curriculum.metrics import accuracy, exclusion_purity


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([0, 1, 1, 0], [0, 1, 1, 1]) == 0.75
    labels = np.arange(349)
    assert accuracy((labels + 1) % 349, labels) == 0.0


def test_accuracy_length_mismatch():
    with pytest.raises(ContractError):
        accuracy([0, 1], [0])
    with pytest.raises(ContractError):
        accuracy([], [])


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=40), st.randoms())
def test_accuracy_permutation_invariant(pairs, rnd):
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    p, y = zip(*pairs)
    sp, sy = zip(*shuffled)
    assert accuracy(p, y) == accuracy(sp, sy)


def test_purity_nothing_excluded():
    sel = select_nodes([0.3, 0.1, 0.2, 0.4], 1.0)
    assert exclusion_purity(sel, NoiseRecord(frozenset({1}), {1: 0}), 4) == (0.0, 0.25)


def test_purity_set_arithmetic():
    # losses rank nodes 0 and 3 easiest, excluding {1, 2}
    sel = select_nodes([0.1, 0.8, 0.9, 0.2], 0.5)
    assert sorted(sel.excluded.tolist()) == [1, 2]
    assert exclusion_purity(sel, NoiseRecord(frozenset({1}), {1: 0}), 4) == (0.5, 0.25)
    both = NoiseRecord(frozenset({1, 2}), {1: 0, 2: 0})
    assert exclusion_purity(sel, both, 4)[0] == 1.0


def test_purity_maps_positions_to_node_ids():
    sel = select_nodes([0.1, 0.9], 0.5)  # excludes position 1
    rec = NoiseRecord(frozenset({17}), {17: 0})
    assert exclusion_purity(sel, rec, 2, node_ids=np.array([4, 17])) == (1.0, 0.5)


def test_purity_random_selection_matches_global_rate():
    rng = np.random.default_rng(0)
    n, n_noisy = 200, 60
    flipped = frozenset(rng.choice(n, n_noisy, replace=False).tolist())
    rec = NoiseRecord(flipped, {i: 0 for i in flipped})
    fracs = []
    for _ in range(2000):
        sel = select_nodes(rng.random(n), 0.5)  # losses unrelated to noise
        ex, glob = exclusion_purity(sel, rec, n)
        assert 0.0 <= ex <= 1.0
        fracs.append(ex)
    assert glob == 0.3
    assert abs(np.mean(fracs) - 0.3) < 0.005
