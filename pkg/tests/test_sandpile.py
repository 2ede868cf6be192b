import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from divsandpile.graph import laplacian_apply, make_dirichlet_box, make_general, make_torus
from divsandpile.sandpile import (
    Configuration,
    SolverError,
    Status,
    TopplingTrace,
    check_legal,
    is_stable,
    nested_masks,
    solve_odometer_exact,
    topple_nested,
    topple_parallel,
    topple_two_stage,
)


def dense_odometer(g, s):
    """Brute-force oracle: least-squares solve of L u = 1 - s, shifted to min 0."""
    L = g.laplacian_matrix().toarray()
    u, *_ = np.linalg.lstsq(L, 1.0 - s, rcond=None)
    return u - u.min()


def critical(g, seed):
    sigma = np.random.default_rng(seed).standard_normal(g.vertex_count)
    return 1.0 + sigma - sigma.mean()


C3 = make_torus(3, 1)


# topple_parallel ------------------------------------------------------------


def test_two_vertex_path_one_sweep():
    g = make_general([[1], [0]])
    rep = topple_parallel(Configuration(g, [2.0, 0.0]))
    assert rep.sweeps == 1
    assert rep.odometer.tolist() == [1.0, 0.0]
    assert rep.final_config.values.tolist() == [1.0, 1.0]
    assert rep.stabilized


def test_stable_input_needs_no_sweeps():
    g = make_torus(5, 2)
    s = np.random.default_rng(3).uniform(-2, 1, g.vertex_count)
    rep = topple_parallel(Configuration(g, s))
    assert rep.sweeps == 0
    assert rep.status is Status.STABILIZED
    assert (rep.odometer == 0).all()


def test_triangle_example():
    rep = topple_parallel(Configuration(C3, [2.0, 0.5, 0.5]))
    assert rep.sweeps == 1
    assert np.allclose(rep.odometer, [0.5, 0.0, 0.0], atol=0, rtol=0)
    assert np.allclose(rep.final_config.values, 1.0, atol=0, rtol=0)


def test_parallel_rejects_bad_arguments():
    conf = Configuration(C3, [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        topple_parallel(conf, tol=0.0)
    with pytest.raises(ValueError):
        topple_parallel(conf, max_sweeps=0)
    with pytest.raises(ValueError, match="non-finite"):
        Configuration(C3, [np.nan, 1.0, 1.0])
    with pytest.raises(ValueError, match="shape"):
        Configuration(C3, [1.0, 1.0])
    with pytest.raises(TypeError):
        topple_parallel(np.ones(3))


def test_supercritical_mass_hits_the_sweep_cap():
    rep = topple_parallel(Configuration(C3, [2.0, 1.0, 1.0]), max_sweeps=50)
    assert rep.status is Status.MAX_SWEEPS
    assert rep.sweeps == 50
    assert not rep.stabilized


def test_trace_reproduces_configurations_and_is_legal():
    g = make_torus(6, 2)
    s = critical(g, 11) * 0.95
    rep = topple_parallel(Configuration(g, s), record=True)
    configs = list(rep.trace.configurations())
    odos = list(rep.trace.odometers())
    assert len(configs) == rep.sweeps + 1
    for s_t, u_t in zip(configs, odos):
        assert np.allclose(s_t, s + laplacian_apply(g, u_t), atol=1e-12)
    assert np.allclose(odos[-1], rep.odometer)
    assert check_legal(rep.trace) == (True, None)
    assert np.all(np.diff(np.stack(odos), axis=0) >= 0)
    masses = rep.trace.total_masses()
    assert np.max(np.abs(masses - masses[0])) <= 1e-9 * abs(masses[0])


def test_box_accounts_for_absorbed_mass():
    g = make_dirichlet_box(3, 2)
    s = np.zeros(g.vertex_count)
    s[g.origin] = 60.0  # more than the 49 sites can hold
    rep = topple_parallel(Configuration(g, s))
    assert rep.stabilized
    assert rep.absorbed >= 60.0 - 49.0 - 1e-6
    assert rep.mass_drift <= 1e-9 * 60.0


def test_track_mass_records_worst_sweep():
    g = make_torus(8, 2)
    rep = topple_parallel(Configuration(g, critical(g, 2)), track_mass=True)
    assert 0.0 <= rep.max_sweep_drift <= 1e-9 * g.vertex_count


def test_summary_is_plain_data():
    rep = topple_parallel(Configuration(C3, [2.0, 0.5, 0.5]))
    summ = rep.summary()
    assert summ["status"] == "stabilized"
    assert summ["sweeps"] == 1
    assert summ["odometer_max"] == 0.5


# nested -----------------------------------------------------------------


def test_nested_all_ones_gives_zero():
    g = make_dirichlet_box(4, 2)
    for rep in topple_nested(Configuration(g, np.ones(g.vertex_count)), [1, 2, 4]):
        assert (rep.odometer == 0).all()


def test_nested_point_mass_is_monotone():
    g = make_dirichlet_box(2, 1)
    s = np.ones(g.vertex_count)
    s[g.origin] += 1.0
    r1, r2 = topple_nested(Configuration(g, s), [1, 2])
    assert r2.odometer[g.origin] >= r1.odometer[g.origin]
    assert np.all(r2.odometer >= r1.odometer - 1e-12)


def test_nested_cone_grows_between_radii():
    g = make_dirichlet_box(32, 2)
    xy = g.coords_array()
    s = 2.0 * ((xy[:, 0] >= 0) & (np.abs(xy[:, 1]) <= xy[:, 0]))
    r16, r32 = topple_nested(Configuration(g, s), [16, 32], method="active_set")
    probe = g.index((1, 0))
    assert r32.odometer[probe] > r16.odometer[probe]


def test_nested_schedule_validation():
    g = make_dirichlet_box(4, 2)
    conf = Configuration(g, np.ones(g.vertex_count))
    with pytest.raises(ValueError, match="empty"):
        topple_nested(conf, [])
    with pytest.raises(ValueError, match="increasing"):
        topple_nested(conf, [2, 2])
    with pytest.raises(ValueError, match="exceeds"):
        topple_nested(conf, [2, 5])
    with pytest.raises(ValueError, match="method"):
        topple_nested(conf, [2], method="magic")
    with pytest.raises(TypeError):
        nested_masks(make_general([[1], [0]]), [1])


def test_active_set_matches_parallel_nested_on_a_box():
    g = make_dirichlet_box(6, 2)
    rng = np.random.default_rng(5)
    s = rng.uniform(0, 2.5, g.vertex_count)
    a = topple_nested(Configuration(g, s), [2, 4, 6], tol=1e-13)
    b = topple_nested(Configuration(g, s), [2, 4, 6], method="active_set")
    for ra, rb in zip(a, b):
        assert rb.stabilized
        assert np.max(np.abs(ra.odometer - rb.odometer)) <= 1e-8
    assert b[-1].method == "active_set"


def test_nested_matches_parallel_on_torus():
    g = make_torus(8, 2)
    s = critical(g, 4)
    par = topple_parallel(Configuration(g, s), tol=1e-13)
    nest = topple_nested(Configuration(g, s), [1, 2, 4], tol=1e-13)
    assert np.max(np.abs(par.odometer - nest[-1].odometer)) <= 1e-6


# two-stage ----------------------------------------------------------------


def test_two_stage_with_empty_second_stage_equals_parallel():
    s1 = [2.0, 0.5, 0.5]
    a = topple_two_stage(Configuration(C3, s1), Configuration(C3, np.zeros(3)))
    b = topple_parallel(Configuration(C3, s1))
    assert np.array_equal(a.odometer, b.odometer)
    assert np.array_equal(a.final_config.values, b.final_config.values)
    assert a.stage_statuses == (Status.STABILIZED, Status.STABILIZED)


def test_two_stage_stable_first_stage():
    g = make_torus(5, 2)
    s1 = np.random.default_rng(8).uniform(0, 1, g.vertex_count)
    a = topple_two_stage(Configuration(g, s1), Configuration(g, np.zeros(g.vertex_count)))
    b = topple_parallel(Configuration(g, s1))
    assert np.array_equal(a.odometer, b.odometer)


def test_two_stage_supercritical_agrees_at_equal_budget():
    a = topple_two_stage(Configuration(C3, [1.0, 1.0, 1.0]),
                         Configuration(C3, [1.0, 0.0, 0.0]), max_sweeps=200)
    b = topple_parallel(Configuration(C3, [2.0, 1.0, 1.0]), max_sweeps=200)
    assert a.status is Status.MAX_SWEEPS and b.status is Status.MAX_SWEEPS
    assert np.allclose(a.odometer, b.odometer, rtol=0, atol=1e-12)


def test_two_stage_matches_direct_stabilization_and_is_legal():
    g = make_torus(6, 2)
    rng = np.random.default_rng(9)
    s1 = rng.uniform(0, 1.4, g.vertex_count)
    s2 = rng.uniform(0, 0.1, g.vertex_count)
    two = topple_two_stage(Configuration(g, s1), Configuration(g, s2), tol=1e-13, record=True)
    direct = topple_parallel(Configuration(g, s1 + s2), tol=1e-13)
    assert np.max(np.abs(two.odometer - direct.odometer)) <= 1e-6
    assert np.max(np.abs(two.final_config.values - direct.final_config.values)) <= 1e-6
    assert check_legal(two.trace)[0]


def test_two_stage_rejects_negative_addition():
    with pytest.raises(ValueError, match="negative at vertex 1"):
        topple_two_stage(Configuration(C3, [1.0, 1.0, 1.0]), Configuration(C3, [0.0, -0.1, 0.0]))


# exact solver ------------------------------------------------------------


def test_exact_all_ones_is_zero():
    g = make_torus(5, 2)
    assert np.array_equal(solve_odometer_exact(Configuration(g, np.ones(25))), np.zeros(25))


def test_exact_triangle():
    u = solve_odometer_exact(Configuration(C3, [2.0, 0.5, 0.5]))
    assert np.allclose(u, [0.5, 0.0, 0.0], atol=1e-14)


def test_exact_four_cycle_dipole():
    g = make_torus(4, 1)
    s = np.ones(4)
    s[g.index((0,))] += 1.0
    s[g.index((2,))] -= 1.0
    u = solve_odometer_exact(Configuration(g, s))
    # brute-force oracle and the defining equation L u = delta_2 - delta_0
    assert np.allclose(u, dense_odometer(g, s), atol=1e-12)
    lap = laplacian_apply(g, u)
    assert lap[g.index((0,))] == pytest.approx(-1.0)
    assert lap[g.index((2,))] == pytest.approx(1.0)
    order = [g.index((k,)) for k in range(4)]
    assert np.allclose(u[order], [1.0, 0.5, 0.0, 0.5], atol=1e-12)


@pytest.mark.parametrize("g", [make_torus(6, 2), make_torus(5, 3),
                               make_general([[1], [0, 2, 3], [1, 3], [1, 2]])])
def test_exact_matches_dense_oracle(g):
    s = critical(g, 21)
    u = solve_odometer_exact(Configuration(g, s))
    assert u.min() == 0.0
    assert np.allclose(u, dense_odometer(g, s), atol=1e-9)
    assert np.max(np.abs(s + laplacian_apply(g, u) - 1.0)) <= 1e-8


def test_exact_general_uses_iterative_solver_on_large_graphs():
    n = 10_005
    adj = [[(v - 1) % n, (v + 1) % n] for v in range(n)]
    g = make_general(adj)
    s = np.ones(n)
    s[0] += 0.5
    s[n // 2] -= 0.5
    u = solve_odometer_exact(Configuration(g, s))
    assert np.max(np.abs(s + laplacian_apply(g, u) - 1.0)) <= 1e-8


def test_exact_rejects_wrong_mass_and_boxes():
    with pytest.raises(ValueError, match="differs"):
        solve_odometer_exact(Configuration(C3, [2.0, 0.5, 0.6]))
    box = make_dirichlet_box(1, 1)
    with pytest.raises(ValueError, match="absorption"):
        solve_odometer_exact(Configuration(box, np.ones(3)))


def test_active_set_refuses_a_closed_graph_covered_entirely():
    from divsandpile.sandpile import _active_set_stage

    s = np.array([2.0, 2.0, 2.0])
    with pytest.raises(SolverError):
        _active_set_stage(C3, s, np.ones(3, dtype=bool))


# stability and legality -------------------------------------------------


def test_is_stable():
    tol = 1e-10
    assert is_stable(np.ones(4), tol)
    s = np.ones(4)
    s[2] = 1 + 2 * tol
    assert not is_stable(s, tol)
    rep = topple_parallel(Configuration(C3, [2.0, 0.5, 0.5]), tol=tol)
    assert is_stable(rep.final_config, tol)


def test_illegal_emission_is_located():
    trace = TopplingTrace(C3, np.array([1.5, 0.5, 1.0]))
    trace.increments.append(np.array([0.25, 0.0, 0.0]))
    trace.increments.append(np.array([0.0, 0.1, 0.0]))
    ok, where = check_legal(trace)
    assert not ok
    # after sweep 1, vertex 1 holds 0.5 + 0.25 = 0.75 < 1
    assert where == (2, 1)


# properties -----------------------------------------------------------------

TORUS = make_torus(5, 2)
masses = arrays(np.float64, 25, elements=st.floats(-1.0, 3.0))


@settings(max_examples=25, deadline=None)
@given(masses)
def test_sweeps_conserve_mass_and_odometer_is_monotone(s):
    s = s - s.mean() + 0.9  # subcritical, always stabilizes
    rep = topple_parallel(Configuration(TORUS, s), record=True)
    assert rep.stabilized
    totals = rep.trace.total_masses()
    assert np.max(np.abs(totals - totals[0])) <= 1e-9 * max(1.0, np.abs(s).sum())
    odos = np.stack(list(rep.trace.odometers()))
    assert np.all(np.diff(odos, axis=0) >= 0)
    assert check_legal(rep.trace)[0]


@settings(max_examples=25, deadline=None)
@given(masses)
def test_mass_at_least_one_stays_at_least_one(s):
    s = s - s.mean() + 0.9
    rep = topple_parallel(Configuration(TORUS, s), record=True)
    configs = np.stack(list(rep.trace.configurations()))
    reached = np.maximum.accumulate(configs >= 1.0, axis=0)
    assert np.all(configs[reached] >= 1.0 - 1e-12)


@settings(max_examples=20, deadline=None)
@given(masses)
def test_least_action_bound(s):
    s = s - s.mean() + 1.0
    exact = solve_odometer_exact(Configuration(TORUS, s))
    rep = topple_parallel(Configuration(TORUS, s), tol=1e-11, max_sweeps=20_000, record=True)
    for u_t in rep.trace.odometers():
        assert np.all(u_t <= exact + 1e-9)
    assert np.max(np.abs(rep.odometer - exact)) <= 1e-6
