import pytest

from igpfix.bgp_prefs import derive_med_preferences
from igpfix.netmodel import assign_random_weights, random_demands
from igpfix.scenarios import two_prefix_med


@pytest.fixture(scope="session")
def six_node():
    """The 6-node two-prefix conflict instance with unknown weights."""
    return two_prefix_med()


@pytest.fixture(scope="session")
def six_node_weighted(six_node):
    """Same instance with one fixed random weighting and derived mandates."""
    inst, routes = six_node
    w = assign_random_weights(inst, seed=1001, low=1, high=16)
    inst = inst.with_weights(w)
    prefs = derive_med_preferences(inst, routes, hop_bound=2)
    return inst, routes, prefs


@pytest.fixture(scope="session")
def six_node_demands(six_node):
    inst, _ = six_node
    return random_demands(inst, pairs=8, seed=3)
