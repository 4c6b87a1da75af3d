"""Deterministic comparison paths, the renewal scheme, the 1D closed form and
the nested-ball coupling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .circuits import TrapObserver, reference_circuit
from .environment import Circuit, CrossingField, good_edges, heavy_set
from .graph import Graph, GraphError, shortest_path, zd_ball
from .walker import CrossingRangeError, RngStream, WalkerState, run


class PlanCase(str, enum.Enum):
    HEAVY_INSIDE = "heavy_inside"
    HEAVY_OUTSIDE = "heavy_outside"
    FRESH_TO_CSTAR = "fresh_to_cstar"
    FRESH_ON_CSTAR = "fresh_on_cstar"

    @property
    def heavy(self) -> bool:
        return self in (PlanCase.HEAVY_INSIDE, PlanCase.HEAVY_OUTSIDE)


@dataclass
class AuxiliaryPlan:
    """Eventually periodic path ``prefix + cycle + cycle + ...`` from the
    walker's position.

    ``heavy_entry`` is the index at which good-edge following starts (heavy
    cases only); ``ties`` lists ``(index, candidates)`` wherever more than one
    good edge was available and the smallest id was taken.
    """

    case: PlanCase
    prefix: tuple[int, ...]
    cycle: tuple[int, ...]
    reference_circuit: Circuit
    heavy_entry: int | None = None
    ties: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)

    @property
    def start(self) -> int:
        return self.prefix[0] if self.prefix else self.cycle[0]

    def position(self, n: int) -> int:
        if n < len(self.prefix):
            return self.prefix[n]
        return self.cycle[(n - len(self.prefix)) % len(self.cycle)]

    def path(self, length: int) -> list[int]:
        """First ``length`` positions ``Y_0 .. Y_{length-1}``."""
        return [self.position(n) for n in range(length)]

    def validate(self, g: Graph) -> "AuxiliaryPlan":
        Circuit(self.cycle).validate(g)
        seq = self.path(len(self.prefix) + len(self.cycle) + 1)
        for a, b in zip(seq, seq[1:]):
            if not g.has_edge(a, b):
                raise GraphError(f"plan steps along non-edge ({a}, {b})")
        return self


def build_auxiliary_plan(state: WalkerState, c_star: Circuit | None = None) -> AuxiliaryPlan:
    """Comparison path for the walker's current state.

    * heavy set non-empty: walk to it along a shortest path (if not already
      in it), then keep taking the smallest-id good edge, updating a scratch
      copy of the field, until a vertex of the good-edge portion repeats;
      the loop closed there is the cycle.
    * heavy set empty: go to ``c_star`` along a shortest path (if not on it)
      and turn around it forever.
    """
    g = state.graph
    if g.is_tree():
        raise GraphError(f"{g.describe()} is a tree; no circuit to follow")
    if c_star is None:
        c_star = reference_circuit(g)
    c_star.validate(g)
    x = state.position
    heavy = heavy_set(state.field)
    if not heavy:
        if x in c_star.vertices:
            return AuxiliaryPlan(PlanCase.FRESH_ON_CSTAR, (), c_star.rotated_to(x).vertices, c_star)
        to_c = shortest_path(g, x, c_star.vertices)
        return AuxiliaryPlan(PlanCase.FRESH_TO_CSTAR, tuple(to_c[:-1]),
                             c_star.rotated_to(to_c[-1]).vertices, c_star)

    scratch = state.field.copy()
    if x in heavy:
        case = PlanCase.HEAVY_INSIDE
        ys = [x]
    else:
        case = PlanCase.HEAVY_OUTSIDE
        ys = shortest_path(g, x, heavy)
        for a, b in zip(ys, ys[1:]):
            scratch.record_step(a, b)
    entry = len(ys) - 1
    first_seen = {ys[entry]: entry}
    ties: list[tuple[int, tuple[int, ...]]] = []
    for _ in range(g.num_vertices + 1):
        u = ys[-1]
        options = good_edges(scratch, u)
        if len(options) > 1:
            ties.append((len(ys) - 1, tuple(options)))
        v = options[0]
        scratch.record_step(u, v)
        if v in first_seen:
            i = first_seen[v]
            return AuxiliaryPlan(case, tuple(ys[:i]), tuple(ys[i:]), c_star, entry, ties)
        first_seen[v] = len(ys)
        ys.append(v)
    raise AssertionError("good-edge walk did not close within |V| + 1 steps")


def verify_non_backtracking(plan: AuxiliaryPlan, state: WalkerState, turns: int = 2) -> bool:
    """Replay ``plan`` from ``state`` and check its good-edge portion.

    True iff from ``heavy_entry`` on, over the prefix and ``turns`` laps of
    the cycle, no step returns to the vertex visited two steps earlier and
    every step takes a good edge whose crossing is >= 1 before the step.
    Plans without a good-edge portion pass vacuously.
    """
    if plan.heavy_entry is None or not plan.case.heavy:
        return True
    seq = plan.path(len(plan.prefix) + turns * len(plan.cycle) + 1)
    if seq[0] != state.position:
        return False
    scratch = state.field.copy()
    g = state.graph
    for j in range(len(seq) - 1):
        u, v = seq[j], seq[j + 1]
        if not g.has_edge(u, v):
            return False
        if j >= plan.heavy_entry:
            if j > plan.heavy_entry and v == seq[j - 1]:
                return False
            if v not in good_edges(scratch, u) or scratch.crossing(u, v) < 1:
                return False
        scratch.record_step(u, v)
    return True


# renewal scheme

@dataclass
class RenewalTrial:
    attempts: int
    success: bool
    steps: int
    cases: list[str]
    certificate: object = None

    @property
    def renewals(self) -> int:
        """Deviations before the plan that was finally followed."""
        return self.attempts - 1 if self.success else self.attempts


@dataclass
class RenewalStats:
    trials: int
    attempts: int
    successes: int
    success_frequency: float
    renewal_histogram: list[int]
    censored: int
    case_attempts: dict[str, int]
    case_successes: dict[str, int]
    tail_slope: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


_EMPTY = np.empty(0, dtype=np.int64)


def renewal_trial(g: Graph, beta: float, rng: RngStream, max_renewals: int, *,
                  max_steps: int = 100_000, epsilon: float = 1e-6, start: int = 0,
                  c_star: Circuit | None = None) -> RenewalTrial:
    """Follow comparison plans, rebuilding one at every deviation.

    Success means trapping was certified while on the current plan.
    ``max_renewals`` caps the number of plans built.
    """
    if c_star is None:
        c_star = reference_circuit(g)
    state = WalkerState.fresh(g, start, beta)
    uniforms = rng.uniforms(max_steps)
    traj = np.empty(max_steps + 1, dtype=np.int64)
    last_visit = np.empty(g.num_vertices, dtype=np.int64)
    no_stop = np.zeros(g.num_vertices, dtype=np.bool_)
    D = g.max_degree()
    used = 0
    attempts = 0
    cases: list[str] = []
    while attempts < max_renewals and used < max_steps:
        plan = build_auxiliary_plan(state, c_star)
        attempts += 1
        cases.append(plan.case.value)
        prefix = np.array(plan.prefix, dtype=np.int64)
        cycle = np.array(plan.cycle, dtype=np.int64)
        steps, code, ell, turns, gap, begin = kernels.walk(
            g.indptr, g.indices, g.slot_edge, g.slot_sign, state.field.values,
            state.position, beta, uniforms[used:], traj, last_visit, no_stop,
            epsilon, D, prefix, cycle)
        state.position = int(traj[steps])
        state.step += int(steps)
        used += int(steps)
        if code == kernels.RANGE:
            raise CrossingRangeError(f"crossing range exceeded at step {state.step}")
        if code == kernels.TRAPPED:
            cert = TrapObserver(epsilon).certify(
                traj[begin:begin + ell].tolist(), state.step - steps + begin, turns, gap,
                beta, D, detected_at=state.step)
            return RenewalTrial(attempts, True, state.step, cases, cert)
        if code != kernels.DEVIATED:
            break
    return RenewalTrial(attempts, False, state.step, cases)


def _tail_slope(hist: Sequence[int]) -> float | None:
    ks = [k for k in range(1, len(hist)) if hist[k] > 0]
    if len(ks) < 2:
        return None
    slope, _ = np.polyfit(ks, [math.log(hist[k]) for k in ks], 1)
    return float(slope)


def renewal_stats(results: Sequence[RenewalTrial], trials: int | None = None) -> RenewalStats:
    """Aggregate renewal trials.

    ``success_frequency`` is certified trappings per plan built; the
    histogram counts successful trials by number of renewals before success.
    """
    hist: list[int] = []
    attempts = successes = censored = 0
    case_attempts: dict[str, int] = {c.value: 0 for c in PlanCase}
    case_successes: dict[str, int] = {c.value: 0 for c in PlanCase}
    for t in results:
        attempts += t.attempts
        for c in t.cases:
            case_attempts[c] += 1
        if t.success:
            successes += 1
            case_successes[t.cases[-1]] += 1
            while len(hist) <= t.renewals:
                hist.append(0)
            hist[t.renewals] += 1
        else:
            censored += 1
    freq = successes / attempts if attempts else 0.0
    return RenewalStats(len(results) if trials is None else trials, attempts, successes, freq,
                        hist, censored, case_attempts, case_successes, _tail_slope(hist))


def renewal_experiment(g: Graph, beta: float, seed: int, trials: int, max_renewals: int = 100, *,
                       max_steps: int = 100_000, epsilon: float = 1e-6) -> RenewalStats:
    """:func:`renewal_trial` over ``trials`` seeded streams; empty when
    ``max_renewals`` is 0."""
    if max_renewals <= 0:
        return renewal_stats([], trials=0)
    c_star = reference_circuit(g)
    results = [renewal_trial(g, beta, RngStream(seed, i), max_renewals,
                             max_steps=max_steps, epsilon=epsilon, c_star=c_star)
               for i in range(trials)]
    return renewal_stats(results)


# Z: closed form

@dataclass(frozen=True)
class OneDimModel:
    beta: float

    def transition(self, x: int) -> tuple[float, float]:
        return one_dim_transition(self, x)

    def matrix(self, L: int) -> np.ndarray:
        """Transition matrix on ``-L..L`` (rows sum to 1; boundary rows keep
        their outward mass on the diagonal)."""
        n = 2 * L + 1
        P = np.zeros((n, n))
        for i in range(n):
            right, left = self.transition(i - L)
            P[i, min(i + 1, n - 1)] += right
            P[i, max(i - 1, 0)] += left
        return P


def one_dim_transition(m: OneDimModel, x: int) -> tuple[float, float]:
    """``(p_right, p_left)`` at ``x`` for the walk on Z started at 0."""
    if x == 0:
        return 0.5, 0.5
    strong = 1.0 / (1.0 + math.exp(-m.beta))
    weak = math.exp(-m.beta) / (1.0 + math.exp(-m.beta))
    return (strong, weak) if x > 0 else (weak, strong)


def one_dim_weight_oracle(g: Graph, trajectory: Sequence[int]) -> CrossingField:
    """Field predicted on ``z_path`` by the final position alone.

    With the walker at ``x > 0`` every edge between 0 and ``x`` has been
    crossed once more rightwards than leftwards and all other edges are
    balanced; mirrored for ``x < 0``; all zero at ``x = 0``.
    """
    if g.name != "z_path":
        raise GraphError("one_dim_weight_oracle needs a z_path graph")
    L = g.params["L"]
    xs = [g.coord(v)[0] for v in trajectory]
    if not xs or xs[0] != 0:
        raise ValueError("trajectory must start at coordinate 0")
    if max(abs(x) for x in xs) >= L:
        raise ValueError(f"trajectory leaves the interior of z_path({L})")
    f = CrossingField(g)
    x = xs[-1]
    for a in range(min(x, 0), max(x, 0)):
        left, right = a + L, a + 1 + L
        if x > 0:
            f.record_step(left, right)
        else:
            f.record_step(right, left)
    return f


def lln_limit(beta: float) -> float:
    """Speed ``(1 - e^{-beta}) / (1 + e^{-beta})`` of the walk on Z."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return (1.0 - math.exp(-beta)) / (1.0 + math.exp(-beta))


# nested balls

@dataclass
class CouplingReport:
    radii: list[int]
    sigma: list[int]
    reached: list[bool]
    prefix_ok: list[bool]
    outcomes: list[dict]
    steps: int

    def to_dict(self) -> dict:
        return {"radii": self.radii, "sigma": self.sigma, "reached": self.reached,
                "prefix_ok": self.prefix_ok, "outcomes": self.outcomes, "steps": self.steps}


def coupled_run(g_full: Graph, radii: Sequence[int], beta: float, rng: RngStream,
                max_steps: int, *, epsilon: float = 1e-6) -> CouplingReport:
    """Run the walk on a big l1 ball together with walks on smaller balls.

    The walk on ``B_k`` is driven by the same uniforms as the big walk until
    time ``sigma_k - 1`` (``sigma_k``: first visit to the sphere of radius
    ``k``) and by its own substream afterwards. Its positions are then
    compared with the big walk's over ``n < sigma_k``. When the sphere is not
    reached, ``sigma_k`` is reported as ``max_steps``.
    """
    if g_full.name != "zd_ball":
        raise GraphError("coupled_run needs a zd_ball graph")
    R = g_full.params["r"]
    d = g_full.params["d"]
    radii = [int(k) for k in radii]
    if any(k >= R or k < 1 for k in radii) or radii != sorted(radii):
        raise ValueError(f"radii must be ascending integers in 1..{R - 1}")
    uniforms = rng.uniforms(max_steps)
    big = WalkerState.fresh(g_full, g_full.origin, beta)
    rec = run(big, _Replay(uniforms, rng), max_steps, [TrapObserver(epsilon)])
    coords = g_full.coords[rec.trajectory]
    norms = np.abs(coords).sum(axis=1)
    sigma, reached, prefix_ok = [], [], []
    outcomes = [_outcome("full", rec)]
    for idx, k in enumerate(radii):
        hits = np.flatnonzero(norms == k)
        hit = bool(hits.size)
        s_k = int(hits[0]) if hit else max_steps
        ball = zd_ball(d, k)
        shared = max(s_k - 1, 0) if hit else max_steps
        own = rng.substream(idx + 1).uniforms(max_steps - shared)
        sub = WalkerState.fresh(ball, ball.origin, beta)
        sub_rec = run(sub, _Replay(np.concatenate([uniforms[:shared], own]), rng),
                      max_steps, [TrapObserver(epsilon)])
        upto = min(s_k, len(rec.trajectory), len(sub_rec.trajectory))
        same = np.array_equal(ball.coords[sub_rec.trajectory[:upto]], coords[:upto])
        if not hit:
            same = same and np.array_equal(ball.coords[sub_rec.trajectory], coords)
        sigma.append(s_k)
        reached.append(hit)
        prefix_ok.append(bool(same))
        outcomes.append(_outcome(f"B{k}", sub_rec))
    return CouplingReport(radii, sigma, reached, prefix_ok, outcomes, rec.steps)


class _Replay:
    """Stand-in stream serving a fixed array of uniforms."""

    def __init__(self, uniforms: np.ndarray, origin: RngStream):
        self._u = uniforms
        self._pos = 0
        self.seed, self.trial_index = origin.seed, origin.trial_index

    def uniform(self) -> float:
        value = float(self._u[self._pos])
        self._pos += 1
        return value

    def uniforms(self, n: int) -> np.ndarray:
        out = self._u[self._pos:self._pos + n]
        self._pos += n
        return out


def _outcome(name: str, rec) -> dict:
    cert = rec.certificate
    return {"walker": name, "stop_reason": rec.stop_reason.value, "steps": rec.steps,
            "circuit": list(cert.circuit.vertices) if cert else None}


def harvest_states(g: Graph, beta: float, rng: RngStream, n_steps: int, stride: int,
                   start: int = 0) -> Iterator[WalkerState]:
    """Snapshots of one unobserved walk every ``stride`` steps (from step 1)."""
    state = WalkerState.fresh(g, start, beta)
    rec = run(state, rng, n_steps)
    traj = rec.trajectory
    f = CrossingField(g)
    for n in range(1, len(traj)):
        f.record_step(int(traj[n - 1]), int(traj[n]))
        if n % stride == 0:
            yield WalkerState(int(traj[n]), f.copy(), n, beta)
