"""Circuits, trapping detection and the turn/trap probability bounds."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .environment import Circuit, circuit_gap
from .graph import Graph, GraphError
from .walker import Observer, StopReason, WalkerState


class TurnMatch(NamedTuple):
    circuit: Circuit
    start_time: int
    turns: int


def detect_turns(trajectory: Sequence[int]) -> TurnMatch | None:
    """Longest suffix of ``trajectory`` made of full turns around one circuit.

    The suffix must be periodic with period ``l >= 3`` and have ``l``
    distinct vertices per period. The circuit is rooted at
    ``trajectory[start_time]``, which equals the last vertex, and oriented in
    the direction travelled. Adjacency is taken on trust from the input.
    """
    traj = list(trajectory)
    n = len(traj) - 1
    if n < 3:
        return None
    last = traj[n]
    prev = next((i for i in range(n - 1, -1, -1) if traj[i] == last), None)
    if prev is None:
        return None
    ell = n - prev
    if ell < 3 or len(set(traj[prev:n])) != ell:
        return None
    t0 = prev
    while t0 > 0 and traj[t0 - 1] == traj[t0 - 1 + ell]:
        t0 -= 1
    turns = (n - t0) // ell
    start = n - turns * ell
    return TurnMatch(Circuit(tuple(traj[start:start + ell])), start, turns)


def _check_turn_args(ell, D, beta):
    if ell < 3:
        raise ValueError(f"circuit length must be >= 3, got {ell}")
    if D < 2:
        raise ValueError(f"maximum degree must be >= 2, got {D}")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")


def turn_probability_lower_bound(ell: int, D: int, M: float, k: int, beta: float = 1.0) -> float:
    """Lower bound on the chance of ``k`` consecutive turns from the root of a
    circuit whose gap is at least ``M``:
    ``prod_{j<k} (1 + D exp(-beta (M + j)))^(-ell)``."""
    _check_turn_args(ell, D, beta)
    if k < 1:
        raise ValueError(f"number of turns must be >= 1, got {k}")
    log_p = 0.0
    for j in range(k):
        a = -beta * (M + j)
        # log(1 + D e^a), stable for large |a|
        log_term = a + math.log(D) + math.log1p(math.exp(-a) / D) if a > 0 else math.log1p(D * math.exp(a))
        log_p -= ell * log_term
    return math.exp(log_p)


def trap_probability_lower_bound(num_vertices: int, D: int, beta: float = 1.0) -> float:
    """``exp(-|V| D e^{2 beta} / (1 - e^{-beta}))``: the trapping bound for a
    circuit of gap at least -2. A bound only; it is astronomically small."""
    if num_vertices < 3:
        raise ValueError(f"need at least 3 vertices, got {num_vertices}")
    if D < 2:
        raise ValueError(f"maximum degree must be >= 2, got {D}")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return math.exp(-num_vertices * D * math.exp(2 * beta) / (1 - math.exp(-beta)))


def residual_escape_bound(ell: int, D: int, M: float, beta: float = 1.0) -> float:
    """Upper bound on ever leaving a circuit from its root when its gap is ``M``:
    ``min(1, ell D e^{-beta M} / (1 - e^{-beta}))``."""
    _check_turn_args(ell, D, beta)
    try:
        x = ell * D * math.exp(-beta * M) / (1.0 - math.exp(-beta))
    except OverflowError:
        return 1.0
    return min(1.0, x)


def min_certified_gap(ell: int, D: int, epsilon: float, beta: float = 1.0) -> int:
    """Smallest integer gap at which :func:`residual_escape_bound` <= ``epsilon``."""
    _check_turn_args(ell, D, beta)
    M = math.floor(math.log(ell * D / (epsilon * (1.0 - math.exp(-beta)))) / beta) - 1
    while residual_escape_bound(ell, D, M, beta) > epsilon:
        M += 1
    return M


@dataclass(frozen=True)
class TrapCertificate:
    """Evidence that a run is trapped in ``circuit`` (travel order, rooted at
    the position at time ``m``): ``turns`` full turns since ``m`` and a gap of
    ``gap`` at detection, giving escape probability <= ``residual_bound``."""

    circuit: Circuit
    m: int
    turns: int
    gap: int
    residual_bound: float
    detected_at: int

    def __post_init__(self):
        if self.turns < 1:
            raise ValueError("a certificate needs at least one observed turn")
        if not 0.0 <= self.residual_bound <= 1.0:
            raise ValueError("residual bound must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "circuit": list(self.circuit.canonical().vertices),
            "direction": list(self.circuit.vertices),
            "m": self.m,
            "k": self.turns,
            "M": self.gap,
            "residual_bound": self.residual_bound,
            "detected_at": self.detected_at,
        }


class TrapObserver(Observer):
    """Stops a run once trapping is certified.

    After each step the last ``window`` positions are searched for complete
    turns; if a circuit is found and its current gap ``M`` gives
    ``residual_escape_bound <= epsilon`` the run stops with a certificate.
    The default window, ``8 |V|``, covers two turns of any circuit.
    """

    name = "trap"

    def __init__(self, epsilon: float = 1e-6, window: int | None = None):
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
        self.epsilon = float(epsilon)
        self.window = window
        self.certificate: TrapCertificate | None = None

    def kernel_options(self):
        return {"trap_eps": self.epsilon}

    def reset(self, state: WalkerState) -> None:
        n = self.window or 8 * state.graph.num_vertices
        self._recent: deque[int] = deque([state.position], maxlen=n)
        self._history = [state.position]
        self._t0 = state.step
        self.certificate = None

    def on_step(self, state: WalkerState) -> StopReason | None:
        self._recent.append(state.position)
        self._history.append(state.position)
        if state.beta <= 0:
            return None
        match = detect_turns(self._recent)
        if match is None:
            return None
        D = state.graph.max_degree()
        M = circuit_gap(state.field, match.circuit)
        if residual_escape_bound(len(match.circuit), D, M, state.beta) > self.epsilon:
            return None
        full = detect_turns(self._history)
        self.certificate = self.certify(full.circuit.vertices, self._t0 + full.start_time,
                                        full.turns, M, state.beta, D, detected_at=state.step)
        return StopReason.TRAPPED

    def certify(self, circuit, m, turns, gap, beta, D, *, detected_at) -> TrapCertificate:
        circuit = Circuit(tuple(circuit))
        return TrapCertificate(circuit, int(m), int(turns), int(gap),
                               residual_escape_bound(len(circuit), D, gap, beta), int(detected_at))

    def payload(self):
        return None


def trap_observer(epsilon: float = 1e-6) -> TrapObserver:
    return TrapObserver(epsilon)


class CircuitCountError(RuntimeError):
    """Circuit enumeration exceeded its cap."""


def enumerate_circuits(g: Graph, max_len: int | None = None, *, cap: int = 100_000) -> list[Circuit]:
    """All circuits of length ``3..max_len`` up to rotation and reflection.

    Each class is reported in canonical form (smallest vertex first, smaller
    second vertex), sorted by length and then vertex order.
    """
    n = g.num_vertices
    if max_len is None:
        max_len = n
    if max_len < 3:
        raise ValueError("max_len must be >= 3")
    adj = [g.neighbors(u) for u in range(n)]
    found: list[Circuit] = []
    for root in range(n):
        # circuits whose smallest vertex is root: DFS through vertices > root
        stack = [(root, iter(adj[root]))]
        on_path = {root}
        path = [root]
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if v == root and len(path) >= 3 and path[1] < path[-1]:
                    found.append(Circuit(tuple(path)))
                    if len(found) > cap:
                        raise CircuitCountError(f"more than {cap} circuits in {g.describe()}")
                elif v > root and v not in on_path and len(path) < max_len:
                    path.append(v)
                    on_path.add(v)
                    stack.append((v, iter(adj[v])))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                on_path.discard(path.pop())
    found.sort(key=lambda c: (len(c), c.vertices))
    return found


def reference_circuit(g: Graph) -> Circuit:
    """Smallest canonical circuit: shortest length first, then vertex order."""
    if g.is_tree():
        raise GraphError(f"{g.describe()} is a tree and has no circuit")
    for max_len in range(3, g.num_vertices + 1):
        circuits = enumerate_circuits(g, max_len)
        if circuits:
            return circuits[0]
    raise GraphError(f"{g.describe()} has no circuit")
