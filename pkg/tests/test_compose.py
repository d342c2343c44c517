import numpy as np
import pytest

from src.models.components import Mc, Prop, row_sums
from src.models.errors import ValidationError
from src.synthesis.compose import (
    compose_mc_pair,
    compose_plant_mc,
    compose_system,
    make_stationary,
    refinement_index,
    replace,
)


def test_pair_of_pedestrians(peds):
    pair = compose_mc_pair(peds[0], peds[1])
    assert pair.size == 9
    assert pair.probability(("c1", "c1"), ("c2", "c2")) == pytest.approx(0.16)
    assert pair.probability(("c1", "c2"), ("c2", "c3")) == pytest.approx(0.32)
    assert np.allclose(row_sums(pair.matrix), 1.0)
    assert pair.initial_distribution() == {("c1", "c1"): 1.0}
    assert pair.label_of(("c2", "c3")) == {Prop("c2", 1), Prop("c3", 2)}


def test_plant_with_one_pedestrian(vehicle, peds):
    m = compose_plant_mc(vehicle, peds[0])
    assert m.size == 9
    assert m.probability(("c0", "c1"), "a2", ("c2", "c2")) == pytest.approx(0.4)
    assert m.probability(("c0", "c1"), "a1", ("c0", "c1")) == pytest.approx(0.6)
    assert m.enabled_actions(("c4", "c3")) == ("a1",)
    assert [slot.name for slot in m.layout] == ["vehicle", "ped1"]
    m.validate()


def test_slippery_plant_probabilities_multiply(slippery_vehicle, peds):
    m = compose_plant_mc(slippery_vehicle, peds[0])
    assert m.probability(("c0", "c1"), "a2", ("c2", "c2")) == pytest.approx(0.36)
    assert m.probability(("c0", "c1"), "a2", ("c0", "c1")) == pytest.approx(0.06)


def test_full_system(vehicle, peds):
    system = compose_system(vehicle, peds)
    assert system.size == 729
    assert len(system.layout) == 6
    assert system.states[0] == ("c0", "c1", "c1", "c1", "c1", "c1")
    assert system.init[0] == 1.0
    assert system.label_of(("c2", "c1", "c2", "c3", "c1", "c2")) == {
        Prop("c2", 0), Prop("c1", 1), Prop("c2", 2), Prop("c3", 3), Prop("c1", 4), Prop("c2", 5)}
    system.validate()


def test_system_without_agents(vehicle):
    system = compose_system(vehicle, [])
    assert system.states == (("c0",), ("c2",), ("c4",))
    assert system.probability(("c0",), "a2", ("c2",)) == 1.0


def test_agent_order_only_permutes_positions(vehicle, peds):
    forward = compose_system(vehicle, [peds[0], peds[4]])
    backward = compose_system(vehicle, [peds[4], peds[0]])
    assert forward.probability(("c0", "c2", "c2"), "a2", ("c2", "c3", "c1")) == pytest.approx(
        backward.probability(("c0", "c2", "c2"), "a2", ("c2", "c1", "c3")))


def test_duplicate_agent_index(vehicle, peds):
    clone = Mc.from_rows("clone", ("x",), {"x": {"x": 1.0}}, {"x": 1.0}, {}, agent=1)
    with pytest.raises(ValidationError, match="agent index 1"):
        compose_system(vehicle, [peds[0], clone])


def test_stationary_abstraction(peds):
    ped1 = peds[0]
    pinned = make_stationary(ped1)
    assert pinned.states == ("c1",)
    assert pinned.pinned == "c1"
    assert pinned.probability("c1", "c1") == 1.0
    assert pinned.name == "ped1" and pinned.agent == 1
    assert pinned.props == ped1.props

    far = make_stationary(ped1, "c3")
    assert far.labels == ({Prop("c3", 1)},)
    with pytest.raises(ValidationError, match="unknown pinned state"):
        make_stationary(ped1, "c9")


def test_stationary_mode_ties_go_to_the_first_state():
    m = Mc.from_rows("m", ("a", "b"), {"a": {"b": 1.0}, "b": {"a": 1.0}}, {"a": 0.5, "b": 0.5}, {}, agent=1)
    assert make_stationary(m).pinned == "a"


def test_stationary_agent_is_a_unit_for_composition(vehicle, peds):
    system = compose_system(vehicle, [make_stationary(peds[0])])
    assert system.size == 3
    assert system.probability(("c0", "c1"), "a2", ("c2", "c1")) == 1.0
    assert not system.layout[1].full


def test_refinement_index_matches_replace():
    sizes = [3, 1, 2]
    old = [(p, "x", t) for p in range(3) for t in range(2)]
    new = [(p, r, t) for p in range(3) for r in range(4) for t in range(2)]
    index_of = refinement_index(sizes, 1, 4)
    assert index_of.shape == (6, 4)
    for k, state in enumerate(old):
        for r in range(4):
            assert new[index_of[k, r]] == replace(state, 1, r)


def test_refinement_index_requires_a_single_state_slot():
    with pytest.raises(ValidationError):
        refinement_index([3, 3], 1, 3)
