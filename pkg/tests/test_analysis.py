"""Diagnostics tests: face slope, contact sets, semiconcavity, reflection,
Hölder seminorms, decay fits, and the quadratic barrier.

Hand-derivable values are asserted exactly (linear/quadratic profiles, the
closed-form barrier value). Solver-dependent constants were measured once
on the bundled problems and are frozen at 17 digits; the assertions use
relative tolerances far above double rounding so they only move on a real
behavior change.
"""
import math

import numpy as np
import pytest

from thinlab import (
    BarrierBox, ContactDecomposition, GridSpec, SigmaField, SpaceTimeField,
    barrier_h_check, barrier_threshold, build_grid, check_sigma_nonpositive,
    complementarity_residual, compute_sigma, decompose_contact,
    default_barrier_box, even_reflection, fit_sigma_decay, fit_u_decay,
    holder_seminorm, holder_time_seminorm, make_problem,
    max_normal_curvature_near_contact_edge, omega_gamma_set,
    reflection_check, reflection_margin, regularity_report,
    select_free_boundary_point, semiconcavity_report, thin_node_set,
)
from thinlab.errors import PreconditionError
from thinlab.problems import _halfplane_profile
from thinlab.solvers import SolveResult


def small_grid(h=1 / 16, dt=1 / 256, t_span=(-0.25, 0.0)):
    return build_grid(GridSpec(n=2, h=h, dt=dt, t_span=t_span))


def planted_result(values, grid, name="P1"):
    """Wrap a hand-built field as a SolveResult for the diagnostics."""
    spec = make_problem(name, h=grid.spec.h, dt=grid.spec.dt,
                        t_span=grid.spec.t_span)
    levels = len(grid.t_levels)
    return SolveResult(field=SpaceTimeField(grid=grid, values=values),
                       spec=spec, cfg=None, mode="signorini", penalty_k=0.0,
                       flux=np.zeros((levels, 2 * grid.spec.m - 1)),
                       iterations=np.zeros(levels, dtype=int),
                       residuals=np.zeros(levels))


def broadcast_profile(grid, fn):
    """Steady field values from a function of the spatial node arrays."""
    base = np.asarray(fn(grid.tangential[0], grid.normal), dtype=float)
    return np.broadcast_to(base, (len(grid.t_levels),) + base.shape).copy()


# ---------------------------------------------------------------------------
# face slope stencil


def test_sigma_exact_on_linear_profile():
    g = small_grid(h=1 / 8, dt=1 / 64, t_span=(-1 / 16, 0.0))
    fld = SpaceTimeField(grid=g, values=broadcast_profile(g, lambda x, y: -y))
    sig = compute_sigma(fld)
    assert sig.values.shape == (len(g.t_levels), 2 * g.spec.m - 1)
    np.testing.assert_allclose(sig.values, -1.0, rtol=0, atol=1e-14)


def test_sigma_exact_on_quadratic_profile():
    g = small_grid(h=1 / 8, dt=1 / 64, t_span=(-1 / 16, 0.0))
    fld = SpaceTimeField(grid=g, values=broadcast_profile(g, lambda x, y: y * y))
    np.testing.assert_allclose(compute_sigma(fld).values, 0.0, atol=1e-14)


def test_sigma_cubic_truncation_is_minus_two_h_squared():
    h = 1 / 8
    g = small_grid(h=h, dt=1 / 64, t_span=(-1 / 16, 0.0))
    fld = SpaceTimeField(grid=g, values=broadcast_profile(g, lambda x, y: y ** 3))
    np.testing.assert_allclose(compute_sigma(fld).values, -2.0 * h * h,
                               rtol=1e-12)


def test_sigma_linearity():
    g = small_grid(h=1 / 8, dt=1 / 64, t_span=(-1 / 16, 0.0))
    rng = np.random.default_rng(7)
    shape = (len(g.t_levels),) + g.normal.shape
    for _ in range(10):
        f = rng.standard_normal(shape)
        w = rng.standard_normal(shape)
        a, b = rng.standard_normal(2)
        lhs = compute_sigma(SpaceTimeField(grid=g, values=a * f + b * w)).values
        rhs = (a * compute_sigma(SpaceTimeField(grid=g, values=f)).values
               + b * compute_sigma(SpaceTimeField(grid=g, values=w)).values)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_sigma_needs_three_normal_levels():
    g = build_grid(GridSpec(n=2, h=1.0, dt=0.5, t_span=(-1.0, 0.0)))
    fld = SpaceTimeField(grid=g, values=np.zeros((3, 3, 2)))
    with pytest.raises(PreconditionError):
        compute_sigma(fld)


# ---------------------------------------------------------------------------
# sign check


def test_sign_check_passes_on_constrained_solves(solved):
    for name in ("P3", "P4"):
        chk = check_sigma_nonpositive(compute_sigma(solved(name, 1 / 16)))
        assert chk.passed
        assert chk.tol == pytest.approx(5 / 16)


def test_sign_check_flags_positive_slope():
    g = small_grid(h=1 / 8, dt=1 / 64, t_span=(-1 / 16, 0.0))
    vals = np.zeros((len(g.t_levels), 2 * g.spec.m - 1))
    vals[2, 3] = 1.0
    chk = check_sigma_nonpositive(SigmaField(grid=g, values=vals), tol=0.1)
    assert not chk.passed
    assert chk.worst_value == 1.0
    assert chk.worst_node == (2, (3,))


# ---------------------------------------------------------------------------
# contact decomposition


def test_decompose_p4_has_no_contact(solved):
    dec = decompose_contact(solved("P4", 1 / 16))
    assert not dec.contact.any()
    assert not dec.edge.any()
    assert not dec.free[0].any()
    assert dec.free[1:].all()


def test_decompose_p3_is_all_contact_with_empty_edge(solved):
    dec = decompose_contact(solved("P3", 1 / 16))
    assert dec.contact[1:].all()
    assert not dec.free.any()
    assert not dec.edge.any()


def test_decompose_p1_edge_sits_at_origin(solved):
    res = solved("P1", 1 / 16)
    dec = decompose_contact(res)
    assert int(dec.contact.sum()) == 4096
    assert int(dec.edge.sum()) == 256
    levels, idxs = np.nonzero(dec.edge)
    assert set(idxs) == {15}  # interior index 15 <-> x = 0
    assert set(levels) == set(range(1, 257))


def test_decompose_initial_level_is_data_only(solved):
    dec = decompose_contact(solved("P1", 1 / 16))
    for mask in (dec.contact, dec.free, dec.edge):
        assert not mask[0].any()


def test_decomposition_rejects_overlap_and_stray_edge():
    ones = np.ones((2, 3), dtype=bool)
    zeros = np.zeros((2, 3), dtype=bool)
    with pytest.raises(PreconditionError):
        ContactDecomposition(contact=ones, free=ones, edge=zeros,
                             tol_contact=0.0)
    with pytest.raises(PreconditionError):
        ContactDecomposition(contact=zeros, free=ones, edge=ones,
                             tol_contact=0.0)


def test_decompose_invariants_on_random_fields():
    spec = make_problem("P4", h=1 / 8, dt=1 / 128, t_span=(-1 / 16, 0.0))
    g = spec.built_grid
    rng = np.random.default_rng(11)
    shape = (len(g.t_levels),) + g.normal.shape
    for _ in range(20):
        res = planted_result(rng.standard_normal(shape) - 1.0, g, name="P4")
        dec = decompose_contact(res)
        assert not (dec.contact & dec.free).any()
        assert (dec.contact[1:] | dec.free[1:]).all()
        assert not (dec.edge & ~dec.contact).any()
        assert not dec.contact[0].any() and not dec.free[0].any()


# ---------------------------------------------------------------------------
# complementarity and the slope sublevel sets


def test_complementarity_residuals_frozen(solved):
    c1 = complementarity_residual(solved("P1", 1 / 16))
    assert c1.max_min_form == pytest.approx(0.016289893128666157, rel=1e-10)
    assert c1.max_product == pytest.approx(0.00044666958682770266, rel=1e-10)
    c2 = complementarity_residual(solved("P2", 1 / 16))
    assert c2.max_min_form == pytest.approx(0.013296972423502362, rel=1e-10)
    assert c2.max_product == pytest.approx(0.00022616846048266969, rel=1e-10)
    for c in (c1, c2):
        assert c.max_min_form <= 5 / 16


def test_omega_gamma_monotone_in_gamma():
    g = small_grid(h=1 / 8, dt=1 / 64, t_span=(-1 / 16, 0.0))
    rng = np.random.default_rng(3)
    shape = (len(g.t_levels), 2 * g.spec.m - 1)
    for _ in range(20):
        sig = SigmaField(grid=g, values=rng.standard_normal(shape))
        g1, g2 = np.sort(rng.uniform(0.05, 2.0, size=2))
        small = omega_gamma_set(sig, float(g1))
        large = omega_gamma_set(sig, float(g2))
        assert not (small & ~large).any()


def test_omega_gamma_requires_positive_gamma():
    g = small_grid(h=1 / 8, dt=1 / 64, t_span=(-1 / 16, 0.0))
    sig = SigmaField(grid=g, values=np.zeros((len(g.t_levels), 15)))
    with pytest.raises(PreconditionError):
        omega_gamma_set(sig, 0.0)


# ---------------------------------------------------------------------------
# semiconcavity proxies


def test_semiconcavity_exact_on_concave_parabola():
    g = small_grid()
    fld = SpaceTimeField(grid=g,
                         values=broadcast_profile(g, lambda x, y: -(x ** 2)))
    rep = semiconcavity_report(fld, 0.25)
    # interior window |x| <= 0.75: steepest chord is (0.6875 + 0.75) = 1.4375
    assert rep.grad_max == pytest.approx(1.4375, rel=1e-12)
    assert rep.tan_curv_min == pytest.approx(-2.0, rel=1e-12)
    assert rep.time_diff_min == 0.0
    assert rep.normal_curv_max == 0.0


def test_semiconcavity_exact_on_affine_field():
    g = small_grid()
    fld = SpaceTimeField(
        grid=g,
        values=broadcast_profile(g, lambda x, y: 0.25 + 0.5 * x - 0.125 * y))
    rep = semiconcavity_report(fld, 0.25)
    assert rep.grad_max == pytest.approx(0.5, rel=1e-12)
    assert rep.tan_curv_min == pytest.approx(0.0, abs=1e-14)
    assert rep.time_diff_min == pytest.approx(0.0, abs=1e-14)
    assert rep.normal_curv_max == pytest.approx(0.0, abs=1e-14)


def test_semiconcavity_frozen_on_solves(solved):
    rep = semiconcavity_report(solved("P1", 1 / 16), 0.25)
    assert rep.grad_max == pytest.approx(1.2715809579399249, rel=1e-10)
    assert rep.tan_curv_min == pytest.approx(0.0, abs=1e-14)
    assert rep.time_diff_min == pytest.approx(-0.15902914141097657, rel=1e-10)
    assert rep.normal_curv_max == pytest.approx(-0.047758582129752369, rel=1e-10)
    assert rep.node_count == 59648
    rep2 = semiconcavity_report(solved("P2", 1 / 16), 0.25)
    assert rep2.grad_max == pytest.approx(0.5625, rel=1e-12)
    assert rep2.tan_curv_min == pytest.approx(-2.0, rel=1e-12)
    assert rep2.time_diff_min == pytest.approx(-0.93056817937201619, rel=1e-10)
    assert rep2.normal_curv_max == pytest.approx(0.82882474651115956, rel=1e-10)


def test_semiconcavity_rejects_bad_delta(solved):
    res = solved("P1", 1 / 16)
    for delta in (0.0, 0.75, -0.1):
        with pytest.raises(PreconditionError):
            semiconcavity_report(res, delta)


def test_edge_curvature_frozen(solved):
    val = max_normal_curvature_near_contact_edge(solved("P1", 1 / 16))
    assert val == pytest.approx(2.2422828736530738, rel=1e-10)
    val2 = max_normal_curvature_near_contact_edge(solved("P2", 1 / 16))
    assert val2 == pytest.approx(0.56498059516464849, rel=1e-10)


def test_edge_curvature_needs_an_edge(solved):
    with pytest.raises(PreconditionError):
        max_normal_curvature_near_contact_edge(solved("P4", 1 / 16))


# ---------------------------------------------------------------------------
# even reflection


def test_even_reflection_mirrors_the_normal_axis():
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((4, 9, 5))
    doubled = even_reflection(vals)
    assert doubled.shape == (4, 9, 9)
    m = 4
    np.testing.assert_array_equal(doubled[..., m:], vals)
    for k in range(doubled.shape[-1]):
        np.testing.assert_array_equal(doubled[..., k], doubled[..., 2 * m - k])


def test_reflection_within_truncation_on_solves(solved):
    rep = reflection_check(solved("P4", 1 / 16))
    assert rep.passed
    assert rep.margin == pytest.approx(2.8421709430404007e-14, abs=1e-12)
    assert rep.max_defect == pytest.approx(6.2800859931488873e-05, rel=1e-6)

    rep1 = reflection_check(solved("P1", 1 / 16))
    assert rep1.passed
    assert rep1.margin == pytest.approx(0.001757945318521692, rel=1e-10)
    assert rep1.max_defect == pytest.approx(0.25554398022526215, rel=1e-10)
    assert rep1.tol == pytest.approx(0.015437739740300374, rel=1e-10)
    assert rep1.worst_level == 1


def test_reflection_control_kink_fails(solved):
    """u = +|y| is a subsolution-shaped kink: its mirrored field must fail."""
    res = solved("P4", 1 / 16)
    g = res.field.grid
    vals = broadcast_profile(g, lambda x, y: np.broadcast_to(y, x.shape))
    doubled = even_reflection(vals)
    max_defect, margin, worst = reflection_margin(
        res.spec.operator, doubled, g.t_levels, g.spec.h)
    # kink curvature 2/h against lambda = 1, far beyond any truncation budget
    assert margin == pytest.approx(2.0 / g.spec.h, rel=1e-12)
    assert margin > 100 * 0.01 * max(1.0, res.spec.K)
    # worst node sits on the mirror plane (interior indexing: m - 1)
    assert worst[-1] == g.spec.m - 1


def test_reflection_rejects_unconstrained_mode(solved):
    res = solved("P4", 1 / 8, mode="neumann", dt=1 / 128, t_span=(-1 / 16, 0.0))
    with pytest.raises(PreconditionError):
        reflection_check(res)


# ---------------------------------------------------------------------------
# parabolic Hölder seminorms


def holder_nodes():
    x = np.linspace(-1.0, 1.0, 21)
    t = np.linspace(-0.5, 0.0, 6)
    T, X = np.meshgrid(t, x, indexing="ij")
    return X, T


def test_holder_linear_space_profile_is_exactly_one():
    X, T = holder_nodes()
    assert holder_seminorm(X, (X, T), 1.0) == pytest.approx(1.0, rel=1e-14)


def test_holder_constant_is_zero():
    X, T = holder_nodes()
    assert holder_seminorm(np.zeros_like(X), (X, T), 0.5) == 0.0
    assert holder_time_seminorm(np.ones_like(X), (X, T), 0.5) == 0.0


def test_holder_time_ramp_is_exactly_one():
    X, T = holder_nodes()
    assert holder_time_seminorm(T, (X, T), 1.0) == pytest.approx(1.0, rel=1e-14)


def test_holder_scale_equivariance():
    X, T = holder_nodes()
    rng = np.random.default_rng(13)
    for _ in range(10):
        f = rng.standard_normal(X.shape)
        c = float(rng.uniform(-4.0, 4.0))
        base = holder_seminorm(f, (X, T), 0.5)
        assert holder_seminorm(c * f, (X, T), 0.5) == pytest.approx(
            abs(c) * base, rel=1e-12)


def test_holder_cap_subsamples_but_stays_bounded():
    X, T = holder_nodes()
    val = holder_seminorm(X, (X, T), 1.0, cap=50)
    assert 0.0 < val <= 1.0 + 1e-12


def test_holder_rejects_bad_inputs():
    X, T = holder_nodes()
    with pytest.raises(PreconditionError):
        holder_seminorm(X, (X, T), 0.0)
    with pytest.raises(PreconditionError):
        holder_seminorm(X, (X, T), 1.5)
    with pytest.raises(PreconditionError):
        holder_time_seminorm(X, (X[:3], T), 1.0)
    with pytest.raises(PreconditionError):
        holder_seminorm(np.array([]), (np.array([]), np.array([])), 1.0)


def test_thin_node_set_shapes(solved):
    vals, coords = thin_node_set(solved("P1", 1 / 16))
    assert vals.shape == (256, 31)
    # coords carry every spatial axis (the face sits at y = 0) then time
    assert len(coords) == 3
    assert all(c.shape == vals.shape for c in coords)
    assert coords[0][0, 0] == pytest.approx(-1 + 1 / 16)
    assert not coords[1].any()
    assert coords[2][-1, 0] == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# decay fits


def test_sigma_fit_on_planted_ramp_matches_polyfit():
    g = small_grid()
    m = g.spec.m
    x_int = g.tangential[0][..., 0][1:-1]
    vals = np.broadcast_to(-np.maximum(x_int, 0.0),
                           (len(g.t_levels),) + x_int.shape).copy()
    sig = SigmaField(grid=g, values=vals)
    radii = (0.25, 0.375, 0.5)
    fit = fit_sigma_decay(sig, (len(g.t_levels) - 1, (m,)), radii)
    assert fit.max_values == pytest.approx((0.1875, 0.3125, 0.4375), rel=1e-14)
    # independent route for the same slope
    ref = np.polyfit(np.log(radii), np.log(fit.max_values), 1)[0]
    assert fit.alpha_sigma == pytest.approx(ref, rel=1e-10)
    assert fit.alpha_sigma == pytest.approx(1.2248510071525764, rel=1e-10)
    assert fit.r2 == pytest.approx(0.99958156390160935, rel=1e-10)
    assert not fit.unconstrained


def test_sigma_fit_flags_unconstrained_field():
    g = small_grid()
    x_int = g.tangential[0][..., 0][1:-1]
    vals = np.broadcast_to(np.abs(x_int),
                           (len(g.t_levels),) + x_int.shape).copy()
    fit = fit_sigma_decay(SigmaField(grid=g, values=vals),
                          (len(g.t_levels) - 1, (g.spec.m,)), (0.25, 0.375, 0.5))
    assert fit.unconstrained
    assert math.isnan(fit.alpha_sigma)
    assert fit.c_sigma == 0.0


def test_u_fit_on_planted_halfplane_profile():
    g = small_grid()
    vals = broadcast_profile(g, _halfplane_profile)
    res = planted_result(vals, g)
    dec = decompose_contact(res)
    radii = (0.25, 0.375, 0.5)
    pt = select_free_boundary_point(res, radii, dec)
    assert pt == (64, (16,))
    fit = fit_u_decay(res, pt, radii, dec)
    assert fit.alpha_u == pytest.approx(0.73409020222417887, rel=1e-10)
    assert fit.r2 == pytest.approx(0.99518318364204372, rel=1e-10)
    assert not fit.degenerate


def test_u_fit_degenerates_on_affine_field():
    g = small_grid()
    vals = broadcast_profile(g, lambda x, y: 0.25 + 0.5 * x)
    res = planted_result(vals, g)
    face = (len(g.t_levels), 2 * g.spec.m - 1)
    x_int = g.tangential[0][..., 0][1:-1]
    contact = np.broadcast_to(x_int <= 0.0, face).copy()
    contact[0] = False
    free = ~contact
    free[0] = False
    edge = np.zeros(face, dtype=bool)
    edge[1:, 15] = True
    dec = ContactDecomposition(contact=contact, free=free, edge=edge,
                               tol_contact=0.0)
    fit = fit_u_decay(res, (64, (16,)), (0.25, 0.375, 0.5), dec)
    assert fit.degenerate
    assert math.isnan(fit.alpha_u)
    assert fit.A0 == pytest.approx(0.25, rel=1e-14)
    assert fit.B0 == pytest.approx((0.5, 0.0), abs=1e-14)
    assert max(fit.deviations) < 1e-13


def test_p1_fits_frozen(solved):
    res = solved("P1", 1 / 16)
    dec = decompose_contact(res)
    radii = (0.25, 0.375, 0.5)
    pt = select_free_boundary_point(res, radii, dec)
    assert pt == (256, (16,))
    uf = fit_u_decay(res, pt, radii, dec)
    assert uf.A0 == 0.0
    assert uf.B0 == pytest.approx((0.13031914502932926, 0.0), abs=1e-12)
    assert uf.alpha_u == pytest.approx(0.74388510310473643, rel=1e-10)
    assert uf.r2 == pytest.approx(0.99527622610911159, rel=1e-10)
    assert uf.deviations == pytest.approx(
        (0.089648301556952442, 0.19461289001933144, 0.29782124951622541),
        rel=1e-10)
    sf = fit_sigma_decay(compute_sigma(res), pt, radii, dec)
    assert sf.alpha_sigma == pytest.approx(0.62272658912145773, rel=1e-10)
    assert sf.c_sigma == pytest.approx(1.5192354157313694, rel=1e-10)
    assert sf.r2 == pytest.approx(0.99932977489853314, rel=1e-10)
    assert sf.max_values == pytest.approx(
        (0.63906203229590619, 0.8301678056015952, 0.98293799181231156),
        rel=1e-10)


def test_select_point_is_deterministic(solved):
    res = solved("P1", 1 / 16)
    assert select_free_boundary_point(res, (0.25, 0.375, 0.5)) == (256, (16,))
    h = 1 / 16
    assert select_free_boundary_point(res, (8 * h, 16 * h, 32 * h)) == (256, (16,))


def test_select_needs_an_edge(solved):
    for name in ("P3", "P4"):
        with pytest.raises(PreconditionError):
            select_free_boundary_point(solved(name, 1 / 16), (0.25, 0.375, 0.5))


def test_fit_preconditions(solved):
    res = solved("P1", 1 / 16)
    dec = decompose_contact(res)
    pt = (256, (16,))
    with pytest.raises(PreconditionError):  # not on the edge
        fit_u_decay(res, (256, (20,)), (0.25, 0.375, 0.5), dec)
    with pytest.raises(PreconditionError):  # fewer than 3 radii
        fit_u_decay(res, pt, (0.25, 0.5), dec)
    with pytest.raises(PreconditionError):  # below the 4h resolution floor
        fit_u_decay(res, pt, (0.1, 0.375, 0.5), dec)
    sig = compute_sigma(res)
    with pytest.raises(PreconditionError):  # ball leaves the tangential box
        fit_sigma_decay(sig, (256, (24,)), (0.25, 0.375, 0.6))
    with pytest.raises(PreconditionError):  # time window precedes the run
        fit_sigma_decay(sig, (4, (16,)), (0.25, 0.375, 0.5))


# ---------------------------------------------------------------------------
# quadratic barrier


def test_barrier_threshold_closed_form():
    assert barrier_threshold(2, 1.0, 2.0) == 6.0
    assert barrier_threshold(2, 1.0, 1.0) == 4.0
    assert barrier_threshold(3, 0.5, 2.0) == 30.0


def test_barrier_p2_matches_closed_form(solved):
    res = solved("P2", 1 / 16)
    rep = barrier_h_check(res, (192, (21,)), C0=6.6)
    n, lam, Lam = 2, 1.0, 2.0
    expected = rep.K0 * (2 * Lam - 2 * rep.C0 * (lam / n) + 1)
    assert rep.K0 == 4.0
    assert rep.threshold == 6.0
    assert rep.supersolution_value == pytest.approx(expected, rel=1e-12)
    assert rep.supersolution_value == pytest.approx(-6.4, rel=1e-12)
    assert rep.supersolution_passed
    assert rep.majorant_margin == pytest.approx(0.0091406249999999023, rel=1e-8)
    assert rep.majorant_passed
    assert rep.boundary_margin == pytest.approx(1.6537915569951116, rel=1e-10)
    assert rep.boundary_passed


def test_barrier_p1_matches_closed_form(solved):
    rep = barrier_h_check(solved("P1", 1 / 16), (192, (24,)), C0=4.4)
    # trace operator: lam = Lam = 1, so the value is K0 (2 - C0 + 1)
    assert rep.supersolution_value / rep.K0 == pytest.approx(-1.4, rel=1e-12)
    assert rep.supersolution_passed and rep.majorant_passed and rep.boundary_passed
    assert rep.majorant_margin == pytest.approx(0.0060303670860548334, rel=1e-8)
    assert rep.boundary_margin == pytest.approx(1.2826446144635946, rel=1e-10)


def test_barrier_preconditions(solved):
    res = solved("P2", 1 / 16)
    with pytest.raises(PreconditionError):  # curvature factor at the threshold
        barrier_h_check(res, (192, (21,)), C0=6.0)
    with pytest.raises(PreconditionError):  # K0 must be positive
        barrier_h_check(res, (192, (21,)), C0=6.6, K0=0.0)
    with pytest.raises(PreconditionError):  # lateral node, not an open face node
        barrier_h_check(res, (192, (0,)), C0=6.6)
    with pytest.raises(PreconditionError):  # initial level
        barrier_h_check(res, (0, (21,)), C0=6.6)
    p1 = solved("P1", 1 / 16)
    with pytest.raises(PreconditionError):  # anchor inside the contact set
        barrier_h_check(p1, (192, (8,)), C0=4.4)
    box = BarrierBox(level_lo=150, level_hi=191, idx_lo=(17,), idx_hi=(25,),
                     j_hi=4)
    with pytest.raises(PreconditionError):  # box must end at the anchor level
        barrier_h_check(res, (192, (21,)), C0=6.6, box=box)
    box2 = BarrierBox(level_lo=188, level_hi=192, idx_lo=(25,), idx_hi=(29,),
                      j_hi=4)
    with pytest.raises(PreconditionError):  # box must contain the anchor
        barrier_h_check(res, (192, (21,)), C0=6.6, box=box2)


def test_default_barrier_box_clips_to_grid(solved):
    g = solved("P1", 1 / 16).field.grid
    box = default_barrier_box(g, (192, (24,)))
    assert box == BarrierBox(level_lo=188, level_hi=192, idx_lo=(20,),
                             idx_hi=(28,), j_hi=4)
    near = default_barrier_box(g, (2, (1,)))
    assert near.level_lo == 0
    assert near.idx_lo == (0,)


# ---------------------------------------------------------------------------
# combined report


def test_report_skips_fits_when_radii_do_not_resolve(solved):
    rep = regularity_report(solved("P1", 1 / 16))
    assert rep.fit_note == ("only 1 of the requested radii fit around the "
                            "best edge node")
    assert rep.u_fit is None and rep.sigma_fit is None
    assert rep.fit_point == (256, (16,))
    assert rep.contact_nodes == 4096
    assert rep.edge_nodes == 256
    assert rep.sigma_max == pytest.approx(-4.0084226845316095e-05, rel=1e-8)
    assert rep.sigma_check.passed
    assert rep.iterations_max == 1


def test_report_fits_with_explicit_radii(solved):
    rep = regularity_report(solved("P1", 1 / 16), radii=(0.25, 0.375, 0.5))
    assert not rep.fit_note
    assert rep.fit_point == (256, (16,))
    assert rep.u_fit.alpha_u == pytest.approx(0.74388510310473643, rel=1e-10)
    assert rep.sigma_fit.alpha_sigma == pytest.approx(0.62272658912145773,
                                                      rel=1e-10)
