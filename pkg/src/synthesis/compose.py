"""
Synchronous parallel composition of the plant with environment agents.

Composite states are tuples of local state names, plant first and agents in
declared order. Matrices are composed with Kronecker products, so the state
enumeration is row-major over the component orders (last component fastest).
"""
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from src.models.components import Dfts, Labels, Mc, Mdp, Slot
from src.models.errors import ValidationError

Plant = Union[Dfts, Mdp]


def _tuple(state) -> tuple:
    return state if isinstance(state, tuple) else (state,)


def _product_states(a: Sequence, b: Sequence) -> Tuple[tuple, ...]:
    return tuple(_tuple(s) + _tuple(t) for s in a for t in b)


def _product_labels(a: Sequence[Labels], b: Sequence[Labels]) -> Tuple[Labels, ...]:
    return tuple(la | lb for la in a for lb in b)


def _kron(a: sparse.spmatrix, b: sparse.spmatrix) -> sparse.csr_matrix:
    result = sparse.kron(a, b, format="csr")
    result.eliminate_zeros()
    return result


def _slot(component: Union[Mc, Mdp, Dfts]) -> Slot:
    return Slot(component.name, component.agent, tuple(component.states), getattr(component, "pinned", None))


def compose_mc_pair(a: Mc, b: Mc) -> Mc:
    """M_a || M_b: transition probabilities and initial masses multiply, labels union"""
    return Mc(
        name=f"{a.name}||{b.name}",
        states=_product_states(a.states, b.states),
        matrix=_kron(a.matrix, b.matrix),
        init=np.kron(a.init, b.init),
        labels=_product_labels(a.labels, b.labels),
        props=a.props | b.props,
        agent=a.agent,
    )


def compose_plant_mc(plant: Plant, agent: Mc) -> Mdp:
    """
    Plant || agent as an MDP.

    A transition system contributes probability 1 along its edges, so the
    DFTS and MDP cases share one construction.
    """
    mdp = plant.to_mdp() if isinstance(plant, Dfts) else plant
    layout = mdp.layout or (_slot(plant),)
    return Mdp(
        name=f"{mdp.name}||{agent.name}",
        states=_product_states(mdp.states, agent.states),
        actions=mdp.actions,
        matrices={a: _kron(m, agent.matrix) for a, m in mdp.matrices.items()},
        init=np.kron(mdp.init, agent.init),
        labels=_product_labels(mdp.labels, agent.labels),
        props=mdp.props | agent.props,
        agent=mdp.agent,
        layout=layout + (_slot(agent),),
    )


def make_stationary(agent: Mc, pinned: Optional[str] = None) -> Mc:
    """
    One-state abstraction of an agent frozen at `pinned` with self-probability 1.

    Without an explicit state the agent is pinned at the mode of its initial
    distribution, ties going to the first declared state. The abstraction keeps
    the agent's name, index and proposition alphabet.

    Raises:
        ValidationError: unknown pinned state
    """
    if pinned is None:
        pinned = agent.states[int(np.argmax(agent.init))]
    elif pinned not in agent.index:
        raise ValidationError(f"{agent.name}: unknown pinned state {pinned}")
    return Mc(
        name=agent.name,
        states=(pinned,),
        matrix=sparse.csr_matrix(np.ones((1, 1))),
        init=np.ones(1),
        labels=(agent.label_of(pinned),),
        props=agent.props,
        agent=agent.agent,
        pinned=pinned,
    )


def compose_system(plant: Plant, agents: Iterable[Mc]) -> Mdp:
    """
    Left fold of plant || M_1 || ... || M_N; the result carries one layout slot per component.

    Raises:
        ValidationError: two components share an agent index (their propositions would collide)
    """
    agents = list(agents)
    seen = {plant.agent: plant.name}
    for agent in agents:
        if agent.agent in seen:
            raise ValidationError(f"{agent.name} and {seen[agent.agent]} both use agent index {agent.agent}")
        seen[agent.agent] = agent.name
    mdp = plant.to_mdp() if isinstance(plant, Dfts) else plant
    system = Mdp(
        name=mdp.name,
        states=tuple(_tuple(s) for s in mdp.states),
        actions=mdp.actions,
        matrices=dict(mdp.matrices),
        init=mdp.init,
        labels=mdp.labels,
        props=mdp.props,
        agent=mdp.agent,
        layout=mdp.layout or (_slot(plant),),
    )
    for agent in agents:
        system = compose_plant_mc(system, agent)
    return system


def replace(state: tuple, position: int, local) -> tuple:
    """s|_{l <- r}: the composite state with exactly one position changed"""
    return state[:position] + (local,) + state[position + 1:]


def refinement_index(sizes: Sequence[int], position: int, new_size: int) -> np.ndarray:
    """
    Index map of a refinement that widens one single-state slot to `new_size` states.

    Entry [k, r] is the row-major index of s_k|_{position <- r} in the refined
    enumeration, where s_k is the k-th state of the unrefined one.
    """
    if sizes[position] != 1:
        raise ValidationError(f"slot {position} holds {sizes[position]} states, expected a single pinned state")
    suffix = int(np.prod(sizes[position + 1:], dtype=np.int64))
    k = np.arange(int(np.prod(sizes, dtype=np.int64)), dtype=np.int64)
    hi, lo = np.divmod(k, suffix)
    r = np.arange(new_size, dtype=np.int64)
    return (hi[:, None] * new_size + r[None, :]) * suffix + lo[:, None]
