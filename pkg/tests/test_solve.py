import numpy as np
import pytest

from src.models.components import Mc
from src.models.errors import PartitionError
from src.synthesis.compose import compose_system, make_stationary
from src.synthesis.product import build_product
from src.synthesis.scc import SccSet, product_partition, system_sccs, tarjan_sccs
from src.synthesis.settings import SolverConfig
from src.synthesis.solve import (
    ProbVector,
    block_value_iteration,
    fixed_point_residual,
    mc_reachability,
    value_iteration,
)

CFG = SolverConfig()


@pytest.fixture(scope="module")
def full_product(vehicle, peds, spec_dfa):
    return build_product(compose_system(vehicle, peds), spec_dfa)


@pytest.fixture(scope="module")
def full_values(full_product):
    return value_iteration(full_product, cfg=CFG)


def test_full_model_value(full_product, full_values):
    assert full_values.converged
    assert full_values.at(full_product.init) == pytest.approx(0.8, abs=CFG.tolerance)
    assert fixed_point_residual(full_product, full_values) <= CFG.tolerance


def test_values_are_probabilities(full_product, full_values):
    assert (full_values.values >= 0).all() and (full_values.values <= 1).all()
    assert (full_values.values[full_product.accepting] == 1.0).all()
    rejecting = np.array([q == "q2" for _, q in full_product.states])
    assert (full_values.values[rejecting] == 0.0).all()


def test_block_methods_agree(full_product, full_values):
    by_scc = block_value_iteration(full_product, tarjan_sccs(full_product.adjacency()), cfg=CFG)
    by_partition = block_value_iteration(
        full_product, product_partition(tarjan_sccs(full_product.system_adjacency()), full_product.n_q), cfg=CFG)
    for values in (by_scc, by_partition):
        assert values.converged
        assert np.abs(values.values - full_values.values).max() <= CFG.tolerance


def test_threaded_blocks_are_bit_identical(full_product):
    blocks = tarjan_sccs(full_product.adjacency())
    sequential = block_value_iteration(full_product, blocks, cfg=CFG)
    threaded = block_value_iteration(full_product, blocks, cfg=CFG, threads=4)
    assert np.array_equal(sequential.values, threaded.values)


def test_single_block_equals_plain_iteration(full_product, full_values):
    whole = SccSet(full_product.size, (np.arange(full_product.size),), (None,), frozenset(), (0,), (True,))
    assert np.array_equal(block_value_iteration(full_product, whole, cfg=CFG).values, full_values.values)


def test_blocks_must_partition(full_product):
    half = SccSet(full_product.size, (np.arange(10),), (None,), frozenset(), (0,), (True,))
    with pytest.raises(PartitionError):
        block_value_iteration(full_product, half, cfg=CFG)


@pytest.mark.parametrize("agents, expected", [((0,), 1.0), ((4,), 0.8), ((), 1.0)])
def test_single_pedestrian_values(vehicle, peds, spec_dfa, agents, expected):
    product = build_product(compose_system(vehicle, [peds[i] for i in agents]), spec_dfa)
    values = value_iteration(product, cfg=CFG)
    assert values.at(product.init) == pytest.approx(expected, abs=CFG.tolerance)


def test_abstract_model_is_optimistic(vehicle, peds, spec_dfa):
    product = build_product(compose_system(vehicle, [make_stationary(p) for p in peds]), spec_dfa)
    sccs = product_partition(system_sccs(compose_system(vehicle, [make_stationary(p) for p in peds])), product.n_q)
    values = block_value_iteration(product, sccs, cfg=CFG)
    assert values.at(product.init) == pytest.approx(1.0)


def test_explicit_targets(full_product):
    start = full_product.states[int(np.flatnonzero(full_product.init)[0])]
    values = value_iteration(full_product, targets=[start], cfg=CFG)
    assert values.at(full_product.init) == 1.0


def test_iteration_cap(full_product):
    values = value_iteration(full_product, cfg=SolverConfig(max_iterations=1))
    assert not values.converged
    assert values.iterations == 1


def test_chain_reachability():
    chain = Mc.from_rows("fork", ("s", "win", "lose"),
                         {"s": {"win": 0.25, "lose": 0.5, "s": 0.25}, "win": {"win": 1.0}, "lose": {"lose": 1.0}},
                         {"s": 1.0}, {})
    values = mc_reachability(chain, ["win"], CFG)
    assert values[0] == pytest.approx(1 / 3, abs=CFG.tolerance)
    assert values[2] == 0.0
    assert isinstance(values, ProbVector)


def test_chain_reachability_of_a_crossing(peds):
    values = mc_reachability(peds[0], np.array([False, False, True]), CFG)
    assert values.at(peds[0].init) == pytest.approx(1.0, abs=CFG.tolerance)


def test_iterates_are_monotone_and_bounded(full_product):
    previous = full_product.accepting.astype(float)
    for k in range(1, 25):
        current = value_iteration(full_product, cfg=SolverConfig(max_iterations=k)).values
        assert (current >= previous).all()
        assert (current >= 0).all() and (current <= 1).all()
        previous = current


@pytest.mark.parametrize("seed", range(100))
def test_solvers_agree_on_random_instances(random_instance, seed):
    instance = random_instance(seed)
    product = build_product(compose_system(instance.plant, instance.agents), instance.dfa)
    plain = value_iteration(product, cfg=CFG)
    by_scc = block_value_iteration(product, tarjan_sccs(product.adjacency()), cfg=CFG)
    by_partition = block_value_iteration(
        product, product_partition(tarjan_sccs(product.system_adjacency()), product.n_q), cfg=CFG)
    for values in (plain, by_scc, by_partition):
        assert values.converged
        assert (values.values >= 0).all() and (values.values <= 1).all()
        assert fixed_point_residual(product, values) <= CFG.tolerance
    assert np.abs(by_scc.values - plain.values).max() <= CFG.tolerance
    assert np.abs(by_partition.values - plain.values).max() <= CFG.tolerance
