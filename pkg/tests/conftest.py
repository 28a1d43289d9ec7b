import random

import pytest
from hypothesis import HealthCheck, settings

from bseqmaj.netcore import Graph, Network, Rule, UpdateScheme

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def star_graph(leaves: int = 8) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def star_network(scheme: str) -> Network:
    g = star_graph()
    if scheme == "sync":
        s = UpdateScheme.synchronous(9)
    elif scheme == "seq":
        s = UpdateScheme.sequential(list(range(1, 9)) + [0])
    else:
        s = UpdateScheme((1,) + (2,) * 8)
    return Network(g, Rule.majority(), s)


STAR_START = [1] + [0] * 8


@pytest.fixture
def rng():
    return random.Random(12345)
