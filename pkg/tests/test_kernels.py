"""Compiled kernels against their Python sources, and against the engine."""

import numpy as np
import pytest

from antrw import kernels
from antrw._accel import NUMBA_ENABLED, python_impl
from antrw.environment import CrossingField
from antrw.graph import generate, z_path
from antrw.walker import RngStream, WalkerState, run, step

SPECS = ["cycle:3", "complete:4", "torus:3x3", "zdball:2,4", "triangleleaf:4"]


def _walk(kernel, g, u, eps, plan=(None, None), stop=None, field=None):
    field = np.zeros(g.num_edges, dtype=np.int64) if field is None else field
    traj = np.zeros(len(u) + 1, dtype=np.int64)
    last = np.empty(g.num_vertices, dtype=np.int64)
    stop = np.zeros(g.num_vertices, dtype=np.bool_) if stop is None else stop
    pre, cyc = (np.asarray(p if p is not None else [], dtype=np.int64) for p in plan)
    res = kernel(g.indptr, g.indices, g.slot_edge, g.slot_sign, field, 0, 1.0, u, traj, last,
                 stop, eps, g.max_degree(), pre, cyc)
    return tuple(int(r) for r in res), traj[:res[0] + 1].tolist(), field.tolist()


@pytest.mark.parametrize("spec", SPECS)
def test_walk_compiled_equals_python(spec):
    g = generate(spec)
    rng = np.random.default_rng(0)
    for eps in (0.0, 1e-6):
        u = rng.random(3000)
        assert _walk(kernels.walk, g, u, eps) == _walk(python_impl(kernels.walk), g, u, eps)


def test_walk_with_plan_compiled_equals_python():
    g = generate("cycle:3")
    u = np.random.default_rng(1).random(500)
    plan = ((), (0, 1, 2))
    a = _walk(kernels.walk, g, u, 1e-6, plan)
    assert a == _walk(python_impl(kernels.walk), g, u, 1e-6, plan)
    assert a[0][1] in (kernels.TRAPPED, kernels.DEVIATED)


@pytest.mark.parametrize("spec", SPECS)
def test_kernel_steps_match_engine_steps(spec):
    g = generate(spec)
    u = np.random.default_rng(2).random(400)
    _, traj, field = _walk(kernels.walk, g, u, 0.0)
    s = WalkerState.fresh(g)
    for x in u:
        step(s, u=float(x))
    assert s.position == traj[-1]
    assert s.field.values.tolist() == field


def test_batch_compiled_equals_python():
    g = generate("torus:3x3")
    u = np.random.default_rng(3).random((40, 80))
    outs = []
    for k in (kernels.walk_batch, python_impl(kernels.walk_batch)):
        traj = np.zeros((40, 81), dtype=np.int64)
        done = k(g.indptr, g.indices, g.slot_edge, g.slot_sign, g.num_edges, 0, 1.0, u, traj)
        outs.append((done.tolist(), traj.tolist()))
    assert outs[0] == outs[1]


def test_checked_walk_reports_no_failures():
    g = generate("complete:4")
    u = np.random.default_rng(4).random(1500)
    for k in (kernels.walk_checked, python_impl(kernels.walk_checked)):
        counts = np.zeros(len(g.indices), dtype=np.int64)
        done, code = k(g.indptr, g.indices, g.slot_edge, g.slot_sign, g.slot_rev,
                       np.zeros(g.num_edges, dtype=np.int64), 0, 1.0, u, counts)
        assert code == kernels.OK and done == len(u)


def test_checked_walk_detects_bad_start_field():
    g = generate("cycle:3")
    field = CrossingField.from_crossings(g, {(0, 1): 2}).values
    counts = np.zeros(len(g.indices), dtype=np.int64)
    _, code = kernels.walk_checked(g.indptr, g.indices, g.slot_edge, g.slot_sign, g.slot_rev,
                                   field, 0, 1.0, np.random.default_rng(0).random(5), counts)
    assert code != kernels.OK


def test_replay_flags_non_edges():
    g = generate("cycle:4")
    f = np.zeros(g.num_edges, dtype=np.int64)
    assert kernels.replay(g.indptr, g.indices, g.slot_edge, g.slot_sign, f,
                          np.array([0, 1, 2, 3, 0]), 4) == -1
    assert kernels.replay(g.indptr, g.indices, g.slot_edge, g.slot_sign, f,
                          np.array([0, 1, 3]), 2) == 1


def test_zline_matches_engine_on_z_path():
    g = z_path(200)
    u = np.random.default_rng(5).random(150)
    traj = np.zeros(151, dtype=np.int64)
    kernels.zline(1.0, u, traj)
    s = WalkerState.fresh(g, g.origin)
    for i, x in enumerate(u):
        step(s, u=float(x))
        assert g.coord(s.position)[0] == traj[i + 1]
    assert kernels.zline_final(1.0, u) == traj[-1]
    assert python_impl(kernels.zline_final)(1.0, u) == traj[-1]


def test_sampler_range_error():
    g = generate("cycle:3")
    field = CrossingField.from_crossings(g, {(0, 1): 300, (0, 2): -701}).values
    assert kernels.sample_slot(g.indptr, g.slot_edge, g.slot_sign, field, 0, 1.0, 0.3) == -1


def test_flag_reports_numba_state():
    assert isinstance(NUMBA_ENABLED, bool)
    assert callable(python_impl(kernels.walk))


def test_env_flag_selects_python_fallback():
    import os
    import subprocess
    import sys
    code = ("from antrw import _accel, kernels; assert not _accel.NUMBA_ENABLED; "
            "assert kernels.walk.py_func is kernels.walk; "
            "from antrw.graph import cycle; from antrw.walker import *; "
            "from antrw.circuits import TrapObserver; "
            "r = run(WalkerState.fresh(cycle(3)), RngStream(7), 100000, [TrapObserver()]); "
            "print(r.stop_reason.value, r.steps)")
    env = dict(os.environ, ANTRW_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    from antrw.circuits import TrapObserver
    from antrw.graph import cycle
    ref = run(WalkerState.fresh(cycle(3)), RngStream(7), 100000, [TrapObserver()])
    assert out == [ref.stop_reason.value, str(ref.steps)]
