"""Complete state-space expansion and goal-distance labeling.

A `StateSpace` is the full reachable transition system of one ground
instance: breadth-first from the initial state, goal states included and
expanded like any other.  `label_goal_distances` adds the optimal distance
to a goal for every state (None for dead ends, i.e. states from which no
goal is reachable).

Encoders and reports care about *alive-source* transitions: transitions
whose source is solvable and not a goal.  Self loops count; transitions out
of goal or dead-end states do not.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from genpol.errors import LimitExceededError
from genpol.pddl import GroundProblem

log = logging.getLogger(__name__)


@dataclass
class StateSpace:
    gp: GroundProblem
    states: list  # id -> frozenset of atom ids; id 0 is the initial state
    src: list  # transition id -> source state id
    dst: list  # transition id -> target state id
    act: list  # transition id -> ground action id
    is_goal: list  # per state
    goal_dist: list = None  # per state, None for dead ends; filled by labeling
    out_start: list = field(default_factory=list)  # CSR offsets into src/dst/act

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return len(self.src)

    def out_edges(self, state_id: int) -> range:
        return range(self.out_start[state_id], self.out_start[state_id + 1])

    def is_solvable(self, state_id: int) -> bool:
        return self.goal_dist[state_id] is not None

    def is_deadend(self, state_id: int) -> bool:
        return self.goal_dist[state_id] is None

    def is_alive(self, state_id: int) -> bool:
        return self.goal_dist[state_id] is not None and not self.is_goal[state_id]

    def alive_transitions(self) -> list:
        """Transition ids whose source is solvable and not a goal."""
        return [t for t in range(len(self.src)) if self.is_alive(self.src[t])]

    def max_goal_distance(self) -> int:
        return max((d for d in self.goal_dist if d is not None), default=0)


def expand(gp: GroundProblem, max_states: int = 10**6,
           max_transitions: int = 10**7) -> StateSpace:
    """Breadth-first complete expansion from the initial state."""
    init = gp.init
    index = {init: 0}
    states = [init]
    queue = deque([0])
    src, dst, act = [], [], []
    out_start = [0]
    actions = gp.actions
    applicable = gp.applicable
    while queue:
        sid = queue.popleft()
        s = states[sid]
        for aid in applicable(s):
            a = actions[aid]
            t = (s - a.dele) | a.add
            tid = index.get(t)
            if tid is None:
                tid = len(states)
                if tid >= max_states:
                    raise LimitExceededError(
                        f"more than {max_states} states in '{gp.instance.name}'")
                index[t] = tid
                states.append(t)
                queue.append(tid)
            src.append(sid)
            dst.append(tid)
            act.append(aid)
            if len(src) > max_transitions:
                raise LimitExceededError(
                    f"more than {max_transitions} transitions in '{gp.instance.name}'")
        out_start.append(len(src))
    # BFS pops states in id order, so out_start is already aligned with ids.
    goal_flags = [gp.is_goal(s) for s in states]
    return StateSpace(gp=gp, states=states, src=src, dst=dst, act=act,
                      is_goal=goal_flags, out_start=out_start)


def label_goal_distances(space: StateSpace) -> StateSpace:
    """Fill per-state optimal goal distances via backward breadth-first search."""
    n = space.n_states
    radj = [[] for _ in range(n)]
    for t in range(space.n_transitions):
        radj[space.dst[t]].append(space.src[t])
    dist = [None] * n
    queue = deque()
    for sid in range(n):
        if space.is_goal[sid]:
            dist[sid] = 0
            queue.append(sid)
    while queue:
        v = queue.popleft()
        d = dist[v] + 1
        for u in radj[v]:
            if dist[u] is None:
                dist[u] = d
                queue.append(u)
    space.goal_dist = dist
    if dist[0] is None:
        log.warning("initial state of '%s' is a dead end: no goal is reachable",
                    space.gp.instance.name)
    return space


def expand_labeled(gp: GroundProblem, max_states: int = 10**6,
                   max_transitions: int = 10**7) -> StateSpace:
    return label_goal_distances(expand(gp, max_states, max_transitions))


@dataclass
class SampleSet:
    """Several labeled state spaces with a shared global state numbering."""

    spaces: list

    def __post_init__(self):
        self.offsets = []
        off = 0
        for sp in self.spaces:
            if sp.goal_dist is None:
                raise ValueError("sample spaces must be labeled first")
            self.offsets.append(off)
            off += sp.n_states
        self.n_states = off

    def globalize(self, space_idx: int, state_id: int) -> int:
        return self.offsets[space_idx] + state_id

    def iter_states(self):
        """Yields (global_id, space, local_id)."""
        for k, sp in enumerate(self.spaces):
            off = self.offsets[k]
            for sid in range(sp.n_states):
                yield off + sid, sp, sid

    def iter_alive_transitions(self):
        """Yields (space_idx, transition_id, global_src, global_dst)."""
        for k, sp in enumerate(self.spaces):
            off = self.offsets[k]
            for t in sp.alive_transitions():
                yield k, t, off + sp.src[t], off + sp.dst[t]

    def n_alive_transitions(self) -> int:
        return sum(len(sp.alive_transitions()) for sp in self.spaces)

    def max_goal_distance(self) -> int:
        return max(sp.max_goal_distance() for sp in self.spaces)


def dump_transitions(space: StateSpace) -> str:
    """Debug dump, one line per transition:

    ``src dst action src_goal dst_goal src_dead dst_dead src_dist dst_dist``

    Goal/dead flags are 0/1; distances print ``-`` for dead ends.
    """
    if space.goal_dist is None:
        raise ValueError("label the space before dumping")
    fmt_d = lambda d: "-" if d is None else str(d)
    lines = []
    for t in range(space.n_transitions):
        s, d = space.src[t], space.dst[t]
        lines.append(" ".join([
            str(s), str(d), space.gp.actions[space.act[t]].name,
            str(int(space.is_goal[s])), str(int(space.is_goal[d])),
            str(int(space.goal_dist[s] is None)), str(int(space.goal_dist[d] is None)),
            fmt_d(space.goal_dist[s]), fmt_d(space.goal_dist[d]),
        ]))
    return "\n".join(lines) + ("\n" if lines else "")
