import math
from fractions import Fraction

import numpy as np
import pytest

from divsandpile.experiments import (
    Check,
    ExperimentReport,
    clt_weights,
    cone_certificate,
    cone_explode,
    exp_critical_clt,
    exp_density_conservation,
    exp_dirac_identity,
    exp_equality_in_law,
    exp_s0_line,
    exp_scaling,
    gaussian,
    laplacian_u1_formula,
    parse_law,
    phi,
    phi_psi_eval,
    psi,
    two_point,
    u_cone,
    uniform,
)
from divsandpile.graph import laplacian_apply, make_dirichlet_box, make_torus
from divsandpile.sandpile import Configuration, topple_nested

# reference orders ------------------------------------------------------------


def test_phi_values():
    assert phi(3, 16) == 4
    assert phi(1, 4) == 8
    assert phi(2, 10) == 10
    assert phi(4, 10) == pytest.approx(math.log(10))
    assert phi(7, 10) == pytest.approx(math.sqrt(math.log(10)))


def test_psi_values():
    assert psi(2, 16, 4) == pytest.approx(16 * math.log(4))
    assert psi(1, 8, 2) == 32
    assert psi(3, 8, 2.5) == 2.5
    assert psi(4, 8, 2) == pytest.approx(math.log(3))
    assert psi(5, 8, 2) == 1.0
    for d in range(1, 6):
        assert psi(d, 8, 0) == 0.0


@pytest.mark.parametrize("args", [(0, 8, 1), (1.5, 8, 1), (2, 1, 0), (2, 8, 9), (2, 8, -1)])
def test_phi_psi_eval_validation(args):
    with pytest.raises(ValueError):
        phi_psi_eval(*args)


def test_phi_psi_eval_pair():
    assert phi_psi_eval(3, 16, 0) == (4.0, 0.0)


# laws and reports -------------------------------------------------------------


def test_laws():
    rng = np.random.default_rng(0)
    tp = two_point(1.0, 1.0)
    assert set(np.unique(tp.sample(rng, 1000))) == {0.0, 2.0}
    assert (tp.mean, tp.var) == (1.0, 1.0)
    u = uniform(0.4, 1.4)
    assert u.mean == pytest.approx(0.9)
    assert u.var == pytest.approx(1 / 12)
    g = gaussian(2.0, 3.0)
    assert g.var == 9.0
    x = g.sample(rng, 20_000)
    assert abs(x.mean() - 2.0) < 5 * 3 / math.sqrt(20_000)
    assert parse_law("two_point:1,1") == tp
    assert parse_law("gaussian") == gaussian()
    for bad in ("cauchy:0,1", "uniform:2,1", "gaussian:1,-1"):
        with pytest.raises(ValueError):
            parse_law(bad)


def test_check_ops():
    assert Check("a", 1.0, "<=", 1.0).passed
    assert not Check("a", 1.0, "<", 1.0).passed
    assert Check("a", 2.0, ">", 1.0).passed
    assert Check("a", 1.5, "in", (1.4, 1.6)).passed
    assert not Check("a", 1.7, "in", (1.4, 1.6)).passed
    assert not Check("a", float("nan"), ">=", 0.0).passed
    d = Check("a", 1.5, "in", (1.4, 1.6)).as_dict()
    assert d["bound"] == [1.4, 1.6] and d["passed"]
    assert Check("a", 1.0, "<=", 2.0).line().startswith("[PASS]")


def test_report_flags_recompute_from_values():
    rep = ExperimentReport("demo", {})
    rep.check("x", 0.5, "<=", 1.0)
    rep.check("y", 3.0, "<=", 1.0)
    assert not rep.passed
    assert [c.name for c in rep.failures()] == ["y"]
    res = rep.results()
    for c in res["checks"]:
        assert Check(c["name"], c["value"], c["op"],
                     tuple(c["bound"]) if isinstance(c["bound"], list) else c["bound"]
                     ).passed == c["passed"]
    assert rep.lines()[1].startswith("demo: [FAIL]")


# torus experiments -----------------------------------------------------------------


def test_equality_in_law_small_run():
    rep = exp_equality_in_law(4, 2, 400, seed=1, bootstrap=50)
    assert rep.passed, rep.lines()
    assert len(rep.data["ks_pvalues"]) == 16


def test_equality_in_law_is_deterministic():
    a = exp_equality_in_law(4, 1, 60, seed=3, bootstrap=20)
    b = exp_equality_in_law(4, 1, 60, seed=3, bootstrap=20, threads=3)
    assert a.results() == b.results()


def test_equality_in_law_rejections():
    with pytest.raises(ValueError):
        exp_equality_in_law(4, 1, 0, seed=0)
    with pytest.raises(ValueError, match="4096"):
        exp_equality_in_law(65, 2, 10, seed=0)


def test_scaling_one_dimension_short_run():
    table = exp_scaling(1, [32, 64, 128], 60, seed=2)
    assert [r.n for r in table.rows] == [32, 64, 128]
    assert table.passed, table.report.lines()
    lo, hi = table.ci
    assert lo < table.slope < hi


def test_scaling_ratio_test_for_high_dimension():
    table = exp_scaling(4, [4, 6, 8], 20, seed=2)
    names = [c.name for c in table.report.checks]
    assert names == ["ratio spread E u / phi_4 (d=4)"]
    assert table.passed


def test_scaling_cross_check_with_expected_max():
    table = exp_scaling(2, [8, 12, 16], 400, seed=5, cross_check=True)
    cross = [c for c in table.report.checks if "max eta" in c.name]
    assert len(cross) == 3 and all(c.passed for c in cross)


def test_scaling_rejections():
    with pytest.raises(ValueError, match="3 sizes"):
        exp_scaling(1, [8, 16], 10, seed=0)
    with pytest.raises(ValueError, match="increasing"):
        exp_scaling(1, [8, 16, 16], 10, seed=0)


def test_density_recentred_draws_stabilize_to_all_ones():
    rep = exp_density_conservation(make_torus(6, 2), gaussian(1.0, 1.0), 30, seed=1,
                                   condition="recenter")
    assert rep.passed, rep.lines()
    assert rep.data["sinf_origin"]["mean"] == pytest.approx(1.0, abs=1e-8)


def test_density_subcritical_short_run():
    rep = exp_density_conservation(make_torus(8, 2), uniform(0.4, 1.4), 100, seed=4)
    assert rep.passed, rep.lines()


def test_density_rejections():
    with pytest.raises(ValueError):
        exp_density_conservation(make_torus(4, 1), gaussian(), 10, 0, condition="other")
    with pytest.raises(ValueError):
        exp_density_conservation(make_dirichlet_box(2, 1), gaussian(), 10, 0)


def test_dirac_identity():
    rep = exp_dirac_identity(9, 1, 1.0, 50)
    assert rep.passed, rep.lines()
    rep2 = exp_dirac_identity(5, 2, 2.5, 1)
    assert rep2.passed


def test_dirac_zero_beta_gives_zero_odometer():
    rep = exp_dirac_identity(6, 1, 0.0, 10)
    assert rep.passed
    assert rep.data["u_origin_final"] == 0.0
    assert rep.data["sweeps"] == 0


# CLT -----------------------------------------------------------------------


def test_clt_weights_are_normalised():
    a = clt_weights(4, 3)
    assert math.fsum(a * a) == pytest.approx(1.0)


def test_clt_small_run():
    rep = exp_critical_clt(3, [4, 6], 300, two_point(1.0, 1.0), seed=2)
    assert rep.passed, rep.lines()
    b = rep.data["b_n"]
    assert b[1] < b[0]


def test_clt_rejections():
    with pytest.raises(ValueError, match="variance"):
        exp_critical_clt(3, [4], 10, two_point(1.0, 0.0), seed=0)
    with pytest.raises(ValueError, match="mean 1"):
        exp_critical_clt(3, [4], 10, two_point(0.9, 1.0), seed=0)
    with pytest.raises(ValueError):
        exp_critical_clt(3, [4, 4], 10, two_point(), seed=0)


# cones -------------------------------------------------------------------------


def test_u1_laplacian_hand_values():
    g = make_dirichlet_box(6, 2)
    xy = g.coords_array()
    lap = laplacian_apply(g, u_cone(xy[:, 0], xy[:, 1], 1))
    assert lap[g.index((2, 0))] == -1.0
    assert lap[g.index((0, 0))] == 0.25
    assert lap[g.index((3, 1))] == 1.0
    assert lap[g.index((2, 2))] == 0.5
    assert lap[g.index((-2, 1))] == 0.0
    assert laplacian_u1_formula(2, 0) == -1.0
    assert laplacian_u1_formula(0, 0) == 0.25


def test_ua_laplacian_at_origin():
    a = Fraction(1, 3)
    g = make_dirichlet_box(8, 2)
    xy = g.coords_array()
    lap = laplacian_apply(g, u_cone(xy[:, 0], xy[:, 1], a))
    af = float(a)
    assert lap[g.index((0, 0))] == pytest.approx(af**2 / (2 * (1 + af**2)), abs=1e-14)
    # on the axis, deep inside the cone
    x = 5
    assert lap[g.index((x, 0))] == pytest.approx(1 - 2 * af / (1 + af**2) * x, abs=1e-12)


def test_certificate_at_the_threshold():
    rep = cone_certificate(Fraction(1, 2), 1.25, 30)
    assert rep.passed, rep.lines()
    assert rep.data["exceptional_set"] == [[-3, 0], [-2, 0], [-1, 0], [0, 0]]


@pytest.mark.parametrize("a", [Fraction(1, 3), Fraction(2, 3), Fraction(1, 1), 0.25])
def test_certificate_passes_below_threshold(a):
    af = float(a)
    m = 0.9 * (1 + af * af) / (2 * af)
    assert cone_certificate(a, m, 25).passed


def test_certificate_fails_above_threshold():
    rep = cone_certificate(Fraction(1, 2), 1.4, 30)
    assert not rep.passed


def test_certificate_rejections():
    with pytest.raises(ValueError):
        cone_certificate(Fraction(3, 2), 1.0, 30)
    with pytest.raises(ValueError):
        cone_certificate(0, 1.0, 30)
    with pytest.raises(ValueError, match="radius"):
        cone_certificate(Fraction(1, 4), 1.0, 5)


def test_s0_line():
    rep = exp_s0_line(40)
    assert rep.passed, rep.lines()
    with pytest.raises(ValueError):
        exp_s0_line(1)


def test_cone_explode_small():
    rep = cone_explode(1.0, [8, 16, 32])
    assert rep.passed, rep.lines()
    assert rep.data["divergence_consistent"]
    u = rep.data["u_probe"]
    assert u[0] < u[1] < u[2]


def test_empty_cone_never_moves():
    g = make_dirichlet_box(16, 2)
    for rep in topple_nested(Configuration(g, np.zeros(g.vertex_count)), [4, 8, 16],
                             method="active_set"):
        assert (rep.odometer == 0).all()


def test_cone_explode_rejections():
    with pytest.raises(ValueError):
        cone_explode(0.0, [8, 16])
    with pytest.raises(ValueError):
        cone_explode(1.0, [8])
