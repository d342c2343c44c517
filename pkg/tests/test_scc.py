import numpy as np
import pytest
from scipy import sparse

from src.models.errors import PartitionError
from src.synthesis.compose import compose_system, make_stationary
from src.synthesis.product import build_product, refine_product
from src.synthesis.scc import (
    SccSet,
    chain_sccs,
    check_partition,
    derive_sccs,
    product_partition,
    render_sccs,
    system_sccs,
    tarjan_sccs,
)


def graph(n, edges):
    rows, cols = zip(*edges) if edges else ((), ())
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def assert_schedulable(sccs: SccSet, adjacency: sparse.csr_matrix):
    """Precedence is acyclic, respected by the order, and covers every edge between blocks"""
    position = {b: k for k, b in enumerate(sccs.order)}
    assert sorted(position) == list(range(len(sccs)))
    for i, j in sccs.precedence:
        assert position[i] < position[j]
    coo = adjacency.tocoo()
    owner = sccs.block_of
    for u, v in zip(coo.row, coo.col):
        if owner[u] != owner[v]:
            assert (owner[v], owner[u]) in sccs.precedence


def test_crossing_pedestrian(peds):
    sccs = chain_sccs(peds[0])
    assert sccs.canonical(peds[0].states) == {frozenset({"c1"}), frozenset({"c2"}), frozenset({"c3"})}
    assert [peds[0].states[sccs.blocks[b][0]] for b in sccs.order] == ["c3", "c2", "c1"]
    assert sccs.precedence == {(1, 0), (2, 1)}
    assert all(sccs.self_loop)
    assert sccs.levels() == [[2], [1], [0]]


def test_wandering_pedestrian(peds):
    sccs = chain_sccs(peds[4])
    assert sccs.canonical() == {frozenset({0, 1, 2})}
    assert sccs.precedence == frozenset()


def test_graph_without_edges():
    sccs = tarjan_sccs(graph(3, []))
    assert len(sccs) == 3
    assert sccs.order == (0, 1, 2)
    assert sccs.self_loop == (False, False, False)
    assert sccs.levels() == [[0, 1, 2]]


def test_cycle_and_tail():
    # 0 -> 1 -> 2 -> 1, 3 -> 0, 4 isolated with a self-loop
    sccs = tarjan_sccs(graph(5, [(0, 1), (1, 2), (2, 1), (3, 0), (4, 4)]))
    assert sccs.canonical() == {frozenset({0}), frozenset({1, 2}), frozenset({3}), frozenset({4})}
    assert_schedulable(sccs, graph(5, [(0, 1), (1, 2), (2, 1), (3, 0), (4, 4)]))
    loops = {frozenset(int(i) for i in b): flag for b, flag in zip(sccs.blocks, sccs.self_loop)}
    assert loops[frozenset({0})] is False
    assert loops[frozenset({4})] is True


def test_long_chain_needs_no_recursion():
    n = 20000
    sccs = tarjan_sccs(graph(n, [(i, i + 1) for i in range(n - 1)]))
    assert len(sccs) == n
    assert sccs.order[0] == n - 1


def test_derived_blocks_of_the_crossing(vehicle, peds, spec_dfa):
    abstract = build_product(compose_system(vehicle, [make_stationary(p) for p in peds]), spec_dfa)
    parent = system_sccs(compose_system(vehicle, [make_stationary(p) for p in peds]))
    refined, index_of = refine_product(abstract, peds[0], 1)
    derived = derive_sccs(parent, chain_sccs(peds[0]), index_of)
    truth = tarjan_sccs(refined.system_adjacency())
    assert len(derived) == 9
    assert derived.canonical() == truth.canonical()
    assert_schedulable(derived, refined.system_adjacency())


def test_derived_blocks_split_loop_free_singletons():
    parent = tarjan_sccs(graph(2, [(0, 1), (1, 1)]))
    agent = tarjan_sccs(graph(2, [(0, 1), (1, 0)]))
    index_of = np.arange(4).reshape(2, 2)
    derived = derive_sccs(parent, agent, index_of)
    assert derived.canonical() == {frozenset({0}), frozenset({1}), frozenset({2, 3})}
    assert derived.tags.count((0, 0)) == 2


def test_derive_rejects_mismatched_index_map(peds):
    sccs = chain_sccs(peds[0])
    with pytest.raises(PartitionError):
        derive_sccs(sccs, sccs, np.arange(6).reshape(2, 3))


@pytest.mark.parametrize("seed", range(100))
def test_derived_blocks_match_tarjan(random_instance, seed):
    plant, agents, dfa = random_instance(seed)
    current = [make_stationary(a) for a in agents]
    system = compose_system(plant, current)
    product = build_product(system, dfa)
    sccs = system_sccs(system)
    for i, agent in enumerate(agents):
        product, index_of = refine_product(product, agent, i + 1)
        sccs = derive_sccs(sccs, chain_sccs(agent), index_of)
        adjacency = product.system_adjacency()
        assert sccs.canonical() == tarjan_sccs(adjacency).canonical()
        assert_schedulable(sccs, adjacency)
        check_partition(sccs, product.system_size)


def test_product_partition(peds):
    sccs = chain_sccs(peds[0])
    blocks = product_partition(sccs, 3)
    check_partition(blocks, 9)
    assert blocks.canonical() == {frozenset({0, 1, 2}), frozenset({3, 4, 5}), frozenset({6, 7, 8})}
    assert blocks.order == sccs.order


def test_check_partition_errors():
    def partition(n, blocks):
        blocks = tuple(np.array(b, dtype=np.int64) for b in blocks)
        return SccSet(n, blocks, (None,) * len(blocks), frozenset(), tuple(range(len(blocks))),
                      (True,) * len(blocks))

    with pytest.raises(PartitionError, match="more than one block"):
        check_partition(partition(3, [[0, 1], [1, 2]]), 3)
    with pytest.raises(PartitionError, match="no block"):
        check_partition(partition(3, [[0, 1]]), 3)
    with pytest.raises(PartitionError, match="expected 4"):
        check_partition(partition(3, [[0, 1, 2]]), 4)


def test_render_sccs(peds):
    text = render_sccs(chain_sccs(peds[0]), peds[0].states)
    assert text.splitlines() == ["scc 2 derived-from - : c3", "scc 1 derived-from - : c2", "scc 0 derived-from - : c1"]


def test_derived_blocks_of_periodic_agents_are_coarser(periodic_instance):
    plant, agents, dfa = periodic_instance
    product = build_product(compose_system(plant, [make_stationary(a) for a in agents]), dfa)
    sccs = system_sccs(compose_system(plant, [make_stationary(a) for a in agents]))
    for i, agent in enumerate(agents):
        product, index_of = refine_product(product, agent, i + 1)
        sccs = derive_sccs(sccs, chain_sccs(agent), index_of)
    adjacency = product.system_adjacency()
    truth = tarjan_sccs(adjacency)
    assert len(sccs) == 1
    assert len(truth) == 2
    assert all(any(block <= derived for derived in sccs.canonical()) for block in truth.canonical())
    assert_schedulable(sccs, adjacency)
    check_partition(sccs, product.system_size)
