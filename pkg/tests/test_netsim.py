import math

import networkx as nx
import numpy as np
import pytest

from sweepsim import netsim
from sweepsim.config import NetConfig
from sweepsim.rng import rng_stream


def random_poses(rng, n, span=100.0):
    return {i: (float(rng.uniform(0, span)), float(rng.uniform(0, span)))
            for i in range(n)}


def nx_graph(topology):
    g = nx.Graph()
    g.add_nodes_from(topology.nodes)
    for a, nbrs in topology.adj.items():
        for b in nbrs:
            g.add_edge(a, b)
    return g


def test_edge_at_range_boundary():
    config = NetConfig(radio_range=10.0)
    top = netsim.rebuild_topology({0: (0.0, 0.0), 1: (10.0 - 1e-9, 0.0)}, config)
    assert top.has_edge(0, 1)
    top = netsim.rebuild_topology({0: (0.0, 0.0), 1: (10.0 + 1e-9, 0.0)}, config)
    assert not top.has_edge(0, 1)


def test_topology_symmetric_random():
    rng = np.random.default_rng(0)
    config = NetConfig(radio_range=30.0)
    for _ in range(100):
        top = netsim.rebuild_topology(random_poses(rng, 8), config)
        for a, nbrs in top.adj.items():
            for b in nbrs:
                assert top.has_edge(b, a)


def test_route_examples_and_oracle():
    config = NetConfig(radio_range=10.0)
    line = {0: (0.0, 0.0), 1: (8.0, 0.0), 2: (16.0, 0.0)}
    top = netsim.rebuild_topology(line, config)
    assert netsim.route(top, 0, 0) == []
    assert netsim.route(top, 0, 2) == [0, 1, 2]
    rng = np.random.default_rng(5)
    for _ in range(300):
        top = netsim.rebuild_topology(random_poses(rng, 9, span=70), config)
        g = nx_graph(top)
        src, dst = int(rng.integers(9)), int(rng.integers(9))
        path = netsim.route(top, src, dst)
        if path is None:
            assert not nx.has_path(g, src, dst)
        elif path:
            assert len(path) - 1 == nx.shortest_path_length(g, src, dst)


def test_partitions_match_networkx():
    rng = np.random.default_rng(9)
    config = NetConfig(radio_range=25.0)
    for _ in range(200):
        top = netsim.rebuild_topology(random_poses(rng, 10), config)
        ours = [tuple(c) for c in netsim.partitions(top)]
        theirs = sorted(tuple(sorted(c))
                        for c in nx.connected_components(nx_graph(top)))
        assert ours == theirs


def test_partitions_edge_cases():
    config = NetConfig(radio_range=1000.0)
    top = netsim.rebuild_topology({i: (float(i), 0.0) for i in range(5)}, config)
    assert netsim.partitions(top) == [[0, 1, 2, 3, 4]]
    config = NetConfig(radio_range=0.5)
    top = netsim.rebuild_topology({i: (3.0 * i, 0.0) for i in range(5)}, config)
    assert netsim.partitions(top) == [[0], [1], [2], [3], [4]]


def make_msg(mid, src, dst, tick=0, ttl=50):
    return netsim.Message(id=mid, src=src, dst=dst, kind="status",
                          payload=None, sent_tick=tick, ttl=ttl)


def line_topology(n, config):
    return netsim.rebuild_topology({i: (8.0 * i, 0.0) for i in range(n)}, config)


def test_lossless_delivery_time_is_hops_times_latency():
    config = NetConfig(radio_range=10.0, p_link_loss=0.0, base_latency=1)
    top = line_topology(4, config)
    rng = rng_stream(1, 0, "net")
    msgs = [make_msg(0, 0, 3, tick=0)]
    for tick in range(1, 10):
        delivered, msgs, dropped = netsim.deliver(msgs, top, rng, tick, config)
        assert not dropped
        if delivered:
            assert tick == 3            # 3 hops after the sent tick
            return
    pytest.fail("message never delivered")


def test_parked_message_expires_at_sent_plus_ttl():
    config = NetConfig(radio_range=10.0, p_link_loss=0.0)
    top = netsim.rebuild_topology({0: (0.0, 0.0), 9: (500.0, 0.0)}, config)
    msgs = [make_msg(0, 0, 9, tick=0, ttl=10)]
    for tick in range(1, 30):
        delivered, msgs, dropped = netsim.deliver(msgs, top, rng_stream(1, 0, "net"),
                                                  tick, config)
        assert not delivered
        if dropped:
            assert dropped[0][1] == "ttl"
            assert tick == 10           # sent_tick + ttl
            return
    pytest.fail("message never dropped")


def test_single_hop_loss_rate_binomial():
    config = NetConfig(radio_range=10.0, p_link_loss=0.5)
    top = line_topology(2, config)
    rng = rng_stream(3, 0, "net")
    n = 20_000
    msgs = [make_msg(i, 0, 1, tick=0) for i in range(n)]
    delivered, still, dropped = netsim.deliver(msgs, top, rng, 1, config)
    assert not still
    k = len(delivered)
    sd = math.sqrt(n * 0.25)
    assert abs(k - n * 0.5) <= 3 * sd


def test_self_healing_reroute_after_link_break():
    # route 0-1-2; node 1 dies mid-flight but 0-3-2 remains
    config = NetConfig(radio_range=10.0, p_link_loss=0.0)
    poses = {0: (0.0, 0.0), 1: (8.0, 0.0), 2: (16.0, 0.0), 3: (8.0, 6.0)}
    top = netsim.rebuild_topology(poses, config)
    rng = rng_stream(4, 0, "net")
    msgs = [make_msg(0, 0, 2, tick=0)]
    delivered, msgs, _ = netsim.deliver(msgs, top, rng, 1, config)
    assert not delivered and msgs[0].at == 1
    # topology change: node 1 moves away; message now at a dead end unless
    # rerouted from its current position
    poses[1] = (8.0, 30.0)
    top2 = netsim.rebuild_topology(poses, config)
    # 1 is now only connected to 3?? ensure graph still connected via 3
    assert netsim.route(top2, 1, 2) is not None
    for tick in range(2, 12):
        delivered, msgs, dropped = netsim.deliver(msgs, top2, rng, tick, config)
        assert not dropped
        if delivered:
            return
    pytest.fail("self-healing failed to deliver")


def test_no_phantom_delivery_across_partition():
    config = NetConfig(radio_range=10.0, p_link_loss=0.0)
    rng = np.random.default_rng(17)
    net_rng = rng_stream(5, 0, "net")
    for _ in range(200):
        left = {i: (float(rng.uniform(0, 20)), float(rng.uniform(0, 20)))
                for i in range(4)}
        right = {i + 4: (float(rng.uniform(200, 220)), float(rng.uniform(0, 20)))
                 for i in range(4)}
        top = netsim.rebuild_topology({**left, **right}, config)
        msgs = [make_msg(0, 0, 7, tick=0, ttl=12)]
        for tick in range(1, 15):
            delivered, msgs, dropped = netsim.deliver(msgs, top, net_rng,
                                                      tick, config)
            assert not delivered, "crossed a permanent partition"
            if dropped:
                break


def test_broadcast_reaches_component():
    config = NetConfig(radio_range=10.0)
    poses = {0: (0.0, 0.0), 1: (8.0, 0.0), 2: (16.0, 0.0), 3: (400.0, 0.0)}
    top = netsim.rebuild_topology(poses, config)
    assert netsim.broadcast(0, top) == {0, 1, 2}
    assert netsim.broadcast(3, top) == {3}


def test_broadcast_duplicate_suppression_counts():
    # dense graph: every node must be reached exactly once
    config = NetConfig(radio_range=100.0)
    poses = {i: (float(i), 0.0) for i in range(8)}
    top = netsim.rebuild_topology(poses, config)
    reached = netsim.broadcast(0, top)
    assert sorted(reached) == list(range(8))


def test_deliver_deterministic_across_runs():
    config = NetConfig(radio_range=10.0, p_link_loss=0.3)
    top = line_topology(5, config)

    def trace():
        rng = rng_stream(9, 0, "net")
        msgs = [make_msg(i, 0, 4, tick=0) for i in range(50)]
        events = []
        for tick in range(1, 60):
            delivered, msgs, dropped = netsim.deliver(msgs, top, rng, tick,
                                                      config)
            events.append((tick, sorted(m.id for m in delivered),
                           sorted(m.id for m, _ in dropped)))
            if not msgs:
                break
        return events

    assert trace() == trace()
