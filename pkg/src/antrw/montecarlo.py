"""Seeded batches of trials and their summary statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import kernels
from .circuits import TrapObserver, reference_circuit, turn_probability_lower_bound
from .environment import CrossingField, circuit_gap
from .graph import Graph, generate, z_path
from .strategy import (OneDimModel, coupled_run, lln_limit, one_dim_transition,
                       one_dim_weight_oracle, renewal_stats, renewal_trial)
from .walker import (BoundaryObserver, RngStream, StopReason, TrialRecord, WalkerState,
                     run, step, transition_distribution)

KINDS = ("trap_census", "lln", "turn_bound", "escape_decay", "renewal", "coupling", "oned_equiv")

CSV_COLUMNS = ("trial", "seed", "stop_reason", "steps", "circuit_len", "trap_time", "gap_M",
               "residual_bound")


@dataclass
class ExperimentSpec:
    """One experiment: kind, graph, parameters and seed.

    ``radii`` is used by ``escape_decay`` and ``coupling``; ``turns`` by
    ``turn_bound``. For ``lln``, ``max_steps`` is the walk length ``n`` and
    ``graph`` is ignored (the walk runs on all of Z).
    """

    kind: str
    graph: str = "cycle:3"
    beta: float = 1.0
    trials: int = 100
    max_steps: int = 100_000
    epsilon: float = 1e-6
    seed: int = 0
    radii: list[int] = field(default_factory=list)
    turns: int = 3
    max_renewals: int = 100
    jobs: int = 1

    def validate(self) -> "ExperimentSpec":
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta < 0 or not math.isfinite(self.beta):
            raise ValueError("beta must be finite and >= 0")
        if self.kind == "lln" and not self.beta > 0:
            raise ValueError("lln needs beta > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.kind == "turn_bound" and self.turns < 1:
            raise ValueError("turns must be >= 1")
        if self.kind in ("escape_decay", "coupling"):
            if not self.radii or list(self.radii) != sorted(set(self.radii)) or min(self.radii) < 1:
                raise ValueError("radii must be a non-empty ascending list of positive integers")
        return self


@dataclass
class SummaryStats:
    """Aggregates of one experiment plus one row per trial."""

    kind: str
    trials: int
    spec: dict
    aggregates: dict
    rows: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "trials": self.trials, "spec": self.spec,
                "aggregates": self.aggregates}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        columns = list(CSV_COLUMNS) if self.rows and "stop_reason" in self.rows[0] else []
        for row in self.rows:
            columns += [k for k in row if k not in columns]
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()


def _fmt(value: Any) -> Any:
    """Round floats to 10 significant digits, recursively."""
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(f"{value:.10g}")
    if isinstance(value, dict):
        return {str(k): _fmt(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_fmt(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return _fmt(float(value))
    return value


def dumps(obj: Any) -> str:
    return json.dumps(_fmt(obj), indent=2, sort_keys=True)


def binomial(successes: int, n: int) -> dict:
    p = successes / n
    return {"count": successes, "n": n, "p": p, "se": math.sqrt(p * (1.0 - p) / n)}


def _quantiles(values: Sequence[float]) -> dict | None:
    if not len(values):
        return None
    qs = np.quantile(np.asarray(values, dtype=float), [0.05, 0.25, 0.5, 0.75, 0.95])
    return dict(zip(("q05", "q25", "q50", "q75", "q95"), (float(q) for q in qs)))


def start_vertex(g: Graph) -> int:
    return g.origin if g.coords is not None else 0


def trial_row(i: int, rec: TrialRecord) -> dict:
    cert = rec.certificate
    return {
        "trial": i,
        "seed": rec.seed,
        "stop_reason": rec.stop_reason.value,
        "steps": rec.steps,
        "circuit_len": len(cert.circuit) if cert else None,
        "trap_time": cert.m if cert else None,
        "gap_M": cert.gap if cert else None,
        "residual_bound": cert.residual_bound if cert else None,
    }


def summarize(records: Sequence[TrialRecord]) -> SummaryStats:
    """Stop-reason fractions, trapped fraction with its binomial standard
    error, trapping-time quantiles and the circuit-length histogram."""
    if not records:
        raise ValueError("summarize needs at least one record")
    if len({r.beta for r in records}) > 1:
        raise ValueError("records mix different beta values")
    rows = [trial_row(i, r) for i, r in enumerate(records)]
    return SummaryStats("trap_census", len(records), {}, _trap_aggregates(rows), rows)


def _trap_aggregates(rows: list[dict]) -> dict:
    n = len(rows)
    reasons = {r.value: sum(row["stop_reason"] == r.value for row in rows) for r in StopReason}
    trapped = [row for row in rows if row["stop_reason"] == StopReason.TRAPPED.value]
    lengths: dict[str, int] = {}
    for row in trapped:
        key = str(row["circuit_len"])
        lengths[key] = lengths.get(key, 0) + 1
    agg = {
        "stop_reasons": reasons,
        "stop_fractions": {k: v / n for k, v in reasons.items()},
        "trapped": binomial(len(trapped), n),
        "trap_time_quantiles": _quantiles([row["trap_time"] for row in trapped]),
        "detection_time_quantiles": _quantiles([row["steps"] for row in trapped]),
        "circuit_length_histogram": dict(sorted(lengths.items(), key=lambda kv: int(kv[0]))),
    }
    if len(trapped) in (0, n):
        agg["trapped"]["note"] = "degenerate binomial: zero-width standard error"
    return agg


# experiment kinds: each has a context builder, a per-trial function and an
# aggregator; per-trial functions must only depend on (context, index).

class _Context:
    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        if spec.kind == "lln":
            self.graph = None
        elif spec.kind == "oned_equiv":
            # any requested graph other than a z_path is replaced
            g = generate(spec.graph)
            self.graph = g if g.name == "z_path" else z_path(50)
        else:
            self.graph = generate(spec.graph)
        g = self.graph
        if spec.kind in ("turn_bound", "renewal"):
            self.c_star = reference_circuit(g)
        if spec.kind in ("escape_decay", "coupling"):
            if g.name != "zd_ball":
                raise ValueError(f"{spec.kind} needs a zdball graph")
            if max(spec.radii) >= g.params["r"]:
                raise ValueError(f"radii must be smaller than the ball radius {g.params['r']}")
        if spec.kind == "escape_decay":
            self.outer = g.inner_boundary()
            self.norms = g.norms()

    def rng(self, i: int) -> RngStream:
        return RngStream(self.spec.seed, i)


def _trial_trap(ctx: _Context, i: int) -> dict:
    g, spec = ctx.graph, ctx.spec
    state = WalkerState.fresh(g, start_vertex(g), spec.beta)
    rec = run(state, ctx.rng(i), spec.max_steps, [TrapObserver(spec.epsilon)], keep_trajectory=False)
    return trial_row(i, rec)


def _trial_escape(ctx: _Context, i: int) -> dict:
    g, spec = ctx.graph, ctx.spec
    state = WalkerState.fresh(g, start_vertex(g), spec.beta)
    rec = run(state, ctx.rng(i), spec.max_steps,
              [TrapObserver(spec.epsilon), BoundaryObserver(ctx.outer)])
    row = trial_row(i, rec)
    row["max_radius"] = int(ctx.norms[rec.trajectory].max())
    return row


def _trial_lln(ctx: _Context, i: int) -> dict:
    n = ctx.spec.max_steps
    x = int(kernels.zline_final(ctx.spec.beta, ctx.rng(i).uniforms(n)))
    return {"trial": i, "seed": ctx.spec.seed, "steps": n, "final": x,
            "velocity": x / n if n else 0.0}


def _trial_turns(ctx: _Context, i: int) -> dict:
    g, spec, c = ctx.graph, ctx.spec, ctx.c_star
    n = spec.turns * len(c)
    u = ctx.rng(i).uniforms(n).reshape(1, n)
    traj = np.empty((1, n + 1), dtype=np.int64)
    kernels.walk_batch(g.indptr, g.indices, g.slot_edge, g.slot_sign, g.num_edges,
                       c[0], spec.beta, u, traj)
    target = np.array([c[j] for j in range(n + 1)])
    off = np.flatnonzero(traj[0] != target)
    followed = n if off.size == 0 else int(off[0]) - 1
    return {"trial": i, "seed": spec.seed, "turns_completed": followed // len(c)}


def _trial_renewal(ctx: _Context, i: int) -> dict:
    spec = ctx.spec
    t = renewal_trial(ctx.graph, spec.beta, ctx.rng(i), spec.max_renewals,
                      max_steps=spec.max_steps, epsilon=spec.epsilon, c_star=ctx.c_star)
    return {"trial": i, "seed": spec.seed, "attempts": t.attempts, "success": t.success,
            "steps": t.steps, "cases": "|".join(t.cases)}


def _trial_coupling(ctx: _Context, i: int) -> dict:
    spec = ctx.spec
    rep = coupled_run(ctx.graph, spec.radii, spec.beta, ctx.rng(i), spec.max_steps,
                      epsilon=spec.epsilon)
    return {"trial": i, "seed": spec.seed, "steps": rep.steps, "sigma": rep.sigma,
            "reached": rep.reached, "prefix_ok": rep.prefix_ok,
            "outcomes": [o["stop_reason"] for o in rep.outcomes]}


def _trial_oned(ctx: _Context, i: int) -> dict:
    return oned_equivalence_trial(ctx.graph, ctx.spec.beta, ctx.rng(i), ctx.spec.max_steps) | {
        "trial": i, "seed": ctx.spec.seed}


def oned_equivalence_trial(g: Graph, beta: float, rng: RngStream, max_steps: int) -> dict:
    """Step the general engine on ``z_path`` and compare with the closed form.

    At every visited position the engine's transition distribution is
    compared with :func:`one_dim_transition` and its field with
    :func:`one_dim_weight_oracle`; the walk stops before it could touch the
    end vertices. The same uniforms are then fed to the dedicated Z kernel
    and the two trajectories compared.
    """
    L = g.params["L"]
    model = OneDimModel(beta)
    state = WalkerState.fresh(g, g.origin, beta)
    traj = [state.position]
    used: list[float] = []
    max_diff = 0.0
    field_ok = True
    while True:
        x = g.coord(state.position)[0]
        dist = dict(transition_distribution(state))
        right, left = one_dim_transition(model, x)
        max_diff = max(max_diff, abs(dist[state.position + 1] - right),
                       abs(dist[state.position - 1] - left))
        field_ok = field_ok and state.field == one_dim_weight_oracle(g, traj)
        if len(used) >= max_steps or abs(x) >= L - 1:
            break
        u = rng.uniform()
        used.append(u)
        step(state, u=u)
        traj.append(state.position)
    ztraj = np.empty(len(used) + 1, dtype=np.int64)
    kernels.zline(beta, np.array(used), ztraj)
    coords = [g.coord(v)[0] for v in traj]
    return {"steps": len(used), "max_prob_diff": max_diff, "field_ok": bool(field_ok),
            "kernel_match": bool(np.array_equal(ztraj, coords)), "final": coords[-1]}


_TRIALS: dict[str, Callable[[_Context, int], dict]] = {
    "trap_census": _trial_trap,
    "lln": _trial_lln,
    "turn_bound": _trial_turns,
    "escape_decay": _trial_escape,
    "renewal": _trial_renewal,
    "coupling": _trial_coupling,
    "oned_equiv": _trial_oned,
}


def _aggregate(ctx: _Context, rows: list[dict]) -> dict:
    spec = ctx.spec
    n = len(rows)
    kind = spec.kind
    if kind == "trap_census":
        return _trap_aggregates(rows)
    if kind == "lln":
        v = np.array([row["velocity"] for row in rows])
        speed = np.abs(v)
        return {
            "n_steps": spec.max_steps,
            "limit": lln_limit(spec.beta),
            "mean_abs_velocity": float(speed.mean()),
            "se_abs_velocity": float(speed.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            "positive": binomial(int((v > 0).sum()), n),
            "velocity_quantiles": _quantiles(v.tolist()),
        }
    if kind == "turn_bound":
        c = ctx.c_star
        g = ctx.graph
        D = g.max_degree()
        M = circuit_gap(CrossingField(g), c)
        out = {"circuit": list(c.vertices), "max_degree": D, "initial_gap": M, "per_k": {}}
        done = np.array([row["turns_completed"] for row in rows])
        for k in range(1, spec.turns + 1):
            freq = binomial(int((done >= k).sum()), n)
            freq["bound"] = turn_probability_lower_bound(len(c), D, M, k, spec.beta)
            freq["holds_3se"] = freq["p"] >= freq["bound"] - 3 * freq["se"]
            out["per_k"][str(k)] = freq
        return out
    if kind == "escape_decay":
        radii = list(spec.radii)
        top = np.array([row["max_radius"] for row in rows])
        freqs = {str(r): binomial(int((top >= r).sum()), n) for r in radii}
        ps = [freqs[str(r)]["p"] for r in radii]
        pos = [(r, p) for r, p in zip(radii, ps) if p > 0]
        slope = float(np.polyfit([r for r, _ in pos], [math.log(p) for _, p in pos], 1)[0]) \
            if len(pos) >= 2 else None
        return {"escape": freqs,
                "non_increasing": all(a >= b for a, b in zip(ps, ps[1:])),
                "log_slope": slope,
                "trap": _trap_aggregates(rows)}
    if kind == "renewal":
        from .strategy import RenewalTrial
        trials = [RenewalTrial(row["attempts"], row["success"], row["steps"], row["cases"].split("|"))
                  for row in rows]
        return renewal_stats(trials).to_dict()
    if kind == "coupling":
        k = len(spec.radii)
        return {
            "radii": list(spec.radii),
            "prefix_ok_all": all(all(row["prefix_ok"]) for row in rows),
            "prefix_ok_per_radius": [sum(row["prefix_ok"][j] for row in rows) for j in range(k)],
            "reached_per_radius": [sum(row["reached"][j] for row in rows) for j in range(k)],
            "sigma_quantiles": [_quantiles([row["sigma"][j] for row in rows if row["reached"][j]])
                                for j in range(k)],
        }
    if kind == "oned_equiv":
        return {
            "graph": ctx.graph.describe(),
            "max_prob_diff": max(row["max_prob_diff"] for row in rows),
            "field_ok_all": all(row["field_ok"] for row in rows),
            "kernel_match_all": all(row["kernel_match"] for row in rows),
            "steps_checked": sum(row["steps"] for row in rows),
        }
    raise AssertionError(kind)


def _run_chunk(spec_dict: dict, indices: list[int]) -> list[dict]:
    ctx = _Context(ExperimentSpec(**spec_dict))
    trial = _TRIALS[ctx.spec.kind]
    return [trial(ctx, i) for i in indices]


def run_experiment(spec: ExperimentSpec) -> SummaryStats:
    """Run every trial of ``spec`` and aggregate.

    Trial ``i`` draws only from ``RngStream(spec.seed, i)``, so results do not
    depend on ``jobs`` or on execution order; rows are reduced in index order.
    """
    spec.validate()
    ctx = _Context(spec)
    indices = list(range(spec.trials))
    if spec.jobs == 1:
        trial = _TRIALS[spec.kind]
        rows = [trial(ctx, i) for i in indices]
    else:
        chunks = [indices[j::spec.jobs] for j in range(spec.jobs)]
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            parts = list(pool.map(_run_chunk, [asdict(spec)] * len(chunks), chunks))
        rows = sorted((row for part in parts for row in part), key=lambda r: r["trial"])
    public = asdict(spec)
    public.pop("jobs")
    return SummaryStats(spec.kind, spec.trials, public, _aggregate(ctx, rows), rows)


# exact oracles by enumeration

def path_distribution(state: WalkerState, length: int) -> dict[tuple[int, ...], float]:
    """Exact law of the next ``length`` positions, by enumerating every path.

    Exponential in ``length``; meant for small graphs and short horizons.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    out: dict[tuple[int, ...], float] = {}
    stack = [((state.position,), state.copy(), 1.0)]
    while stack:
        path, s, p = stack.pop()
        if len(path) == length + 1:
            out[path] = out.get(path, 0.0) + p
            continue
        for v, q in transition_distribution(s):
            nxt = s.copy()
            nxt.field.record_step(nxt.position, v)
            nxt.position = v
            nxt.step += 1
            stack.append((path + (v,), nxt, p * q))
    return out


def exact_turn_probability(g: Graph, circuit, turns: int = 1, beta: float = 1.0,
                           state: WalkerState | None = None) -> float:
    """Probability that the walk from ``state`` (default: fresh at the root of
    ``circuit``) travels ``turns`` full turns around ``circuit`` in either
    direction."""
    from .environment import Circuit
    c = circuit if isinstance(circuit, Circuit) else Circuit(tuple(circuit))
    if state is None:
        state = WalkerState.fresh(g, c[0], beta)
    if state.position != c[0]:
        raise ValueError("state must sit at the root of the circuit")
    n = turns * len(c)
    total = 0.0
    for direction in (c, c.reversed().rotated_to(c[0])):
        target = tuple(direction[j] for j in range(n + 1))
        total += _path_probability(state, target)
    return total


def _path_probability(state: WalkerState, path: Sequence[int]) -> float:
    s = state.copy()
    p = 1.0
    for v in path[1:]:
        p *= dict(transition_distribution(s))[v]
        s.field.record_step(s.position, v)
        s.position = v
    return p
