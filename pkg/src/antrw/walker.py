"""Ant RW dynamics: transition law, single steps and whole runs."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .environment import CrossingField
from .graph import Graph, GraphError


class CrossingRangeError(ArithmeticError):
    """A crossing at the current vertex exceeds ``EXP_RANGE / beta`` in
    absolute value; the step is refused rather than risk saturating."""


class StopReason(str, enum.Enum):
    BUDGET = "budget"
    TRAPPED = "trapped"
    BOUNDARY = "boundary"
    CUSTOM = "custom"


@dataclass
class WalkerState:
    """Markov state of the walk: position, crossing field, step count, beta."""

    position: int
    field: CrossingField
    step: int = 0
    beta: float = 1.0

    @classmethod
    def fresh(cls, graph: Graph, start: int = 0, beta: float = 1.0) -> "WalkerState":
        graph._check(start)
        if beta < 0 or not math.isfinite(beta):
            raise ValueError(f"beta must be finite and >= 0, got {beta}")
        return cls(int(start), CrossingField(graph), 0, float(beta))

    @property
    def graph(self) -> Graph:
        return self.field.graph

    def copy(self) -> "WalkerState":
        return WalkerState(self.position, self.field.copy(), self.step, self.beta)


class RngStream:
    """Uniform stream fixed by ``(seed, trial_index)``.

    Streams for different trial indices (or substreams) are statistically
    independent: each is a PCG64 generator keyed by its own spawn key.
    """

    def __init__(self, seed: int, trial_index: int = 0, *, spawn: tuple[int, ...] = ()):
        if seed < 0 or trial_index < 0:
            raise ValueError("seed and trial_index must be non-negative")
        self.seed = int(seed)
        self.trial_index = int(trial_index)
        self.spawn = tuple(spawn)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.trial_index, *self.spawn))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def uniform(self) -> float:
        return float(self.generator.random())

    def uniforms(self, n: int) -> np.ndarray:
        return self.generator.random(n)

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.trial_index, spawn=(*self.spawn, int(k)))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, trial_index={self.trial_index}, spawn={self.spawn})"


def _weights(state: WalkerState) -> tuple[list[int], list[float]]:
    nbrs, cs = state.field.incident(state.position)
    if not nbrs:
        raise GraphError(f"vertex {state.position} has no neighbours")
    cmax = int(cs.max())
    big = max(cmax, -int(cs.min()))
    if state.beta * big > kernels.EXP_RANGE:
        raise CrossingRangeError(
            f"crossing of size {big} at vertex {state.position} is beyond "
            f"{kernels.EXP_RANGE / max(state.beta, 1e-300):.0f} for beta={state.beta}")
    return nbrs, [math.exp(state.beta * (int(c) - cmax)) for c in cs]


def transition_distribution(state: WalkerState) -> list[tuple[int, float]]:
    """``[(neighbour, probability)]`` in neighbour order.

    Weights are ``exp(beta * c(X, y))``, shifted by the largest incident
    crossing before exponentiating.
    """
    nbrs, w = _weights(state)
    total = math.fsum(w)
    return [(v, wi / total) for v, wi in zip(nbrs, w)]


def step(state: WalkerState, rng: RngStream | None = None, *, u: float | None = None) -> WalkerState:
    """Move the walker one step in place and return it.

    The next vertex is found by inverse CDF over the sorted neighbours using
    ``u`` if given, otherwise one uniform drawn from ``rng``.
    """
    if u is None:
        if rng is None:
            raise ValueError("step needs an rng or an explicit quantile u")
        u = rng.uniform()
    nbrs, w = _weights(state)
    total = 0.0
    for wi in w:
        total += wi
    target = u * total
    nxt = nbrs[-1]
    acc = 0.0
    for v, wi in zip(nbrs[:-1], w[:-1]):
        acc += wi
        if target < acc:
            nxt = v
            break
    state.field.record_step(state.position, nxt)
    state.position = nxt
    state.step += 1
    return state


class Observer:
    """Per-step hook for :func:`run`.

    ``on_step`` is called after every step and returns a :class:`StopReason`
    to end the run, or ``None``. Observers that can be expressed as kernel
    options override :meth:`kernel_options`, which lets :func:`run` use the
    compiled loop instead of stepping in Python.
    """

    name = "observer"

    def reset(self, state: WalkerState) -> None:
        pass

    def on_step(self, state: WalkerState) -> StopReason | None:
        return None

    def payload(self) -> Any:
        return None

    def kernel_options(self) -> dict | None:
        return None


class BoundaryObserver(Observer):
    """Stops the run when the walker enters one of ``vertices``."""

    name = "boundary"

    def __init__(self, vertices: Iterable[int]):
        self.vertices = frozenset(int(v) for v in vertices)
        self.hit: int | None = None

    def reset(self, state):
        self.hit = None

    def on_step(self, state):
        if state.position in self.vertices:
            self.hit = state.position
            return StopReason.BOUNDARY
        return None

    def payload(self):
        return {"hit": self.hit}

    def kernel_options(self):
        return {"stop_vertices": self.vertices}


@dataclass
class TrialRecord:
    """Outcome of one run."""

    stop_reason: StopReason
    steps: int
    start_position: int
    final_position: int
    start_step: int = 0
    beta: float = 1.0
    certificate: Any = None
    trajectory: np.ndarray | None = None
    payloads: dict = field(default_factory=dict)
    seed: int | None = None
    trial_index: int | None = None

    @property
    def trapped(self) -> bool:
        return self.stop_reason is StopReason.TRAPPED

    def to_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "trial_index": self.trial_index,
            "beta": self.beta,
            "stop_reason": self.stop_reason.value,
            "steps": self.steps,
            "start_step": self.start_step,
            "start_position": self.start_position,
            "final_position": self.final_position,
            "certificate": self.certificate.to_dict() if self.certificate is not None else None,
        }
        if self.payloads:
            out["payloads"] = self.payloads
        return out


def run(state: WalkerState, rng: RngStream, max_steps: int,
        observers: Sequence[Observer] = (), *, keep_trajectory: bool = True) -> TrialRecord:
    """Step ``state`` in place until the budget runs out or an observer stops it.

    When every observer is kernel-expressible the compiled loop is used and
    exactly ``max_steps`` uniforms are drawn up front (unused ones are
    discarded). Otherwise one uniform per step is drawn; both routes give
    the same trajectory for the same stream.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    options = [o.kernel_options() for o in observers]
    start = (state.position, state.step)
    for o in observers:
        o.reset(state)
    if all(opt is not None for opt in options):
        record = _run_kernel(state, rng, max_steps, observers, options)
    else:
        record = _run_python(state, rng, max_steps, observers)
    record.start_position, record.start_step = start
    record.beta = state.beta
    record.seed, record.trial_index = rng.seed, rng.trial_index
    for o in observers:
        p = o.payload()
        if p is not None:
            record.payloads[o.name] = p
    if not keep_trajectory:
        record.trajectory = None
    return record


_EMPTY = np.empty(0, dtype=np.int64)


def _run_kernel(state, rng, max_steps, observers, options) -> TrialRecord:
    g = state.graph
    stop_mask = np.zeros(g.num_vertices, dtype=np.bool_)
    trap_eps = 0.0
    trap_obs = None
    for o, opt in zip(observers, options):
        for v in opt.get("stop_vertices", ()):
            stop_mask[v] = True
        if "trap_eps" in opt:
            trap_eps = opt["trap_eps"]
            trap_obs = o
    uniforms = rng.uniforms(max_steps)
    traj = np.empty(max_steps + 1, dtype=np.int64)
    last_visit = np.empty(g.num_vertices, dtype=np.int64)
    steps, code, ell, turns, gap, begin = kernels.walk(
        g.indptr, g.indices, g.slot_edge, g.slot_sign, state.field.values,
        state.position, state.beta, uniforms, traj, last_visit, stop_mask,
        trap_eps, g.max_degree(), _EMPTY, _EMPTY)
    traj = traj[:steps + 1]
    step0 = state.step
    state.position = int(traj[-1])
    state.step += int(steps)
    if code == kernels.RANGE:
        raise CrossingRangeError(f"crossing range exceeded at step {state.step}")
    record = TrialRecord(StopReason.BUDGET, int(steps), 0, state.position, trajectory=traj)
    if code == kernels.TRAPPED:
        record.stop_reason = StopReason.TRAPPED
        record.certificate = trap_obs.certify(
            tuple(traj[begin:begin + ell].tolist()), step0 + int(begin), int(turns), int(gap),
            state.beta, g.max_degree(), detected_at=state.step)
    elif code == kernels.BOUNDARY:
        record.stop_reason = StopReason.BOUNDARY
        for o in observers:
            if isinstance(o, BoundaryObserver) and state.position in o.vertices:
                o.hit = state.position
    return record


def _run_python(state, rng, max_steps, observers) -> TrialRecord:
    traj = [state.position]
    reason = StopReason.BUDGET
    for _ in range(max_steps):
        step(state, rng)
        traj.append(state.position)
        stop = None
        for o in observers:
            stop = o.on_step(state)
            if stop is not None:
                break
        if stop is not None:
            reason = stop
            break
    record = TrialRecord(reason, len(traj) - 1, 0, state.position,
                         trajectory=np.array(traj, dtype=np.int64))
    if reason is StopReason.TRAPPED:
        record.certificate = next(o.certificate for o in observers
                                  if getattr(o, "certificate", None) is not None)
    return record


def iter_trace(trajectory: Sequence[int], field0: CrossingField, start_step: int = 0) -> Iterator[dict]:
    """Per-step trace records ``{n, from, to, crossing_after}``.

    ``n`` is the walker time after the step; ``field0`` is replayed on a copy.
    """
    f = field0.copy()
    for i in range(len(trajectory) - 1):
        a, b = int(trajectory[i]), int(trajectory[i + 1])
        f.record_step(a, b)
        yield {"n": start_step + i + 1, "from": a, "to": b, "crossing_after": f.crossing(a, b)}


def write_trace(fh: IO[str], trajectory: Sequence[int], field0: CrossingField,
                start_step: int = 0) -> int:
    count = 0
    for rec in iter_trace(trajectory, field0, start_step):
        fh.write(json.dumps(rec) + "\n")
        count += 1
    return count
