import os

# keep test runs from writing logs/synth_*.log
os.environ.setdefault("SYNTH_LOG_LOG_TO_FILE", "false")

from pathlib import Path
from typing import Callable, List, NamedTuple, Union

import numpy as np
import pytest

from src.models.components import Dfts, Mc, Mdp, Prop
from src.models.dfa import Dfa, load_dfa, parse_dfa
from src.models.guard import TRUE, Lit, Not
from src.models.parser import load_component, parse_component

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
ACTIONS = ("a1", "a2")


class Instance(NamedTuple):
    plant: Union[Dfts, Mdp]
    agents: List[Mc]
    dfa: Dfa


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def vehicle() -> Dfts:
    return load_component(FIXTURES / "vehicle.mdl")


@pytest.fixture(scope="session")
def slippery_vehicle() -> Mdp:
    return load_component(FIXTURES / "vehicle_mdp.mdl")


@pytest.fixture(scope="session")
def peds() -> List[Mc]:
    return [load_component(FIXTURES / f"ped{i}.mdl") for i in range(1, 6)]


@pytest.fixture(scope="session")
def spec_dfa() -> Dfa:
    return load_dfa(FIXTURES / "spec.dfa")


def _row(rng: np.random.Generator, targets: List[str]) -> dict:
    k = int(rng.integers(1, len(targets) + 1))
    chosen = [targets[i] for i in rng.choice(len(targets), size=k, replace=False)]
    return dict(zip(chosen, rng.dirichlet(np.ones(k))))


def _labels(rng: np.random.Generator, states: List[str], agent: int) -> dict:
    return {s: {Prop(base, agent) for base in ("a", "b") if rng.random() < 0.5} for s in states}


def random_plant(rng: np.random.Generator) -> Union[Dfts, Mdp]:
    n = int(rng.integers(1, 5))
    states = [f"p{i}" for i in range(n)]
    labels = _labels(rng, states, 0)
    if rng.random() < 0.5:
        edges = {}
        for s in states:
            edges[(s, "a1")] = states[int(rng.integers(n))]
            if rng.random() < 0.5:
                edges[(s, "a2")] = states[int(rng.integers(n))]
        plant = Dfts.from_edges("plant", states, ACTIONS, edges, states[0], labels)
    else:
        rows = {(s, a): _row(rng, states) for s in states for a in ACTIONS if a == "a1" or rng.random() < 0.5}
        plant = Mdp.from_rows("plant", states, ACTIONS, rows, {states[0]: 1.0}, labels)
    plant.validate()
    return plant


def random_agent(rng: np.random.Generator, index: int) -> Mc:
    """
    Chain whose first state has no self-loop and no incoming edge while every
    other state carries a self-loop, so each of its SCCs is either a
    loop-free singleton or aperiodic.
    """
    n = int(rng.integers(2, 5))
    states = [f"m{i}" for i in range(n)]
    rows = {states[0]: _row(rng, states[1:])}
    for i in range(1, n):
        chosen = [states[i]] + [states[j] for j in range(1, n) if j != i and rng.random() < 0.5]
        rows[states[i]] = dict(zip(chosen, rng.dirichlet(np.ones(len(chosen)))))
    if rng.random() < 0.5:
        init = {states[0]: 1.0}
    else:
        init = dict(zip(states, rng.dirichlet(np.ones(n))))
    agent = Mc.from_rows(f"agent{index}", states, rows, init, _labels(rng, states, index), agent=index)
    agent.validate()
    return agent


def random_dfa(rng: np.random.Generator, props: List[Prop]) -> Dfa:
    n = int(rng.integers(1, 5))
    states = tuple(f"q{i}" for i in range(n))
    transitions = {}
    for q in states:
        yes, no = (states[int(rng.integers(n))] for _ in range(2))
        if props and rng.random() < 0.75:
            lit = Lit(props[int(rng.integers(len(props)))])
            transitions[q] = ((lit, yes), (Not(lit), no))
        else:
            transitions[q] = ((TRUE, yes),)
    accepting = frozenset(q for q in states if rng.random() < 0.5) or frozenset((states[-1],))
    dfa = Dfa(states, states[0], accepting, transitions, {})
    dfa.validate()
    return dfa


@pytest.fixture(scope="session")
def random_instance() -> Callable[[int], Instance]:
    """Factory of small seeded instances: plant of up to 4 states, up to 3 agents, DFA of up to 4 states"""

    def build(seed: int) -> Instance:
        rng = np.random.default_rng(seed)
        plant = random_plant(rng)
        agents = [random_agent(rng, i) for i in range(1, int(rng.integers(1, 4)) + 1)]
        props = sorted(plant.props.union(*(a.props for a in agents)))
        return Instance(plant, agents, random_dfa(rng, props))

    return build


LOOP_PLANT = "kind dfts\nname idle\nagent 0\nstates p0\nactions a1\ninit p0\ntrans p0 a1 p0\n"
LOOP_AGENT = "kind mc\nname loop{i}\nagent {i}\nstates m0 m1\n{init}trans m0 m1 1.0\ntrans m1 m0 1.0\nlabel m1 a\n"
BOTH_AT_M1 = (
    "kind dfa\nstates q0 q1\ninit q0\naccept q1\n"
    "trans q0 q1 a@1 & a@2\ntrans q0 q0 !(a@1 & a@2)\ntrans q1 q1 true\n"
)


@pytest.fixture(scope="session")
def periodic_instance() -> Instance:
    """
    Two agents alternating deterministically between m0 and m1, the second
    starting in either state with probability 1/2. Both sit in m1 at the same
    time only when they start in step, so the DFA accepts with probability 1/2.
    """
    agents = [
        parse_component(LOOP_AGENT.format(i=1, init="init m0 1.0\n")),
        parse_component(LOOP_AGENT.format(i=2, init="init m0 0.5\ninit m1 0.5\n")),
    ]
    return Instance(parse_component(LOOP_PLANT), agents, parse_dfa(BOTH_AT_M1))
