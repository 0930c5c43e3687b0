"""Problem instances: obstacle, boundary data, operator, margins.

Evaluators are vectorized callables. An obstacle sees tangential
coordinates only: value(x, t) with x a tuple of q = n-1 coordinate arrays.
Boundary data sees value(x, y, t). Polynomial tables give exact
derivatives, which the validation helpers cross-check by finite
differences for user-supplied callables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CompatibilityError, ConfigError, InputDataError
from .geometry import GridSpec, HalfCylinderGrid, NodeClass, build_grid
from .operators import (
    EllipticOperator, OperatorKind, max_linear, pucci_minus, pucci_plus,
    trace_operator,
)


def _poly_eval(rows, vars_, derivs):
    """Evaluate a monomial table with per-variable derivative orders."""
    out = 0.0
    for row in rows:
        degs, c = row[:-1], row[-1]
        term = c
        for v, d, order in zip(vars_, degs, derivs):
            d = int(d)
            if order > d:
                term = 0.0
                break
            for k in range(order):
                term = term * (d - k)
            term = term * v ** (d - order)
        out = out + term
    if np.isscalar(out):
        shapes = [np.shape(v) for v in vars_ if np.ndim(v) > 0]
        if shapes:
            return np.full(shapes[0], float(out))
    return out


@dataclass(frozen=True)
class Obstacle:
    """phi(x, t) with exact tangential and time derivatives."""

    value: callable
    grad: callable            # tuple of q first derivatives
    hess: callable            # q x q nested tuple of second derivatives
    time_deriv: callable
    describe: str = "custom"

    @staticmethod
    def from_poly(rows, q: int) -> "Obstacle":
        """Monomial table: each row is (deg_x1[, deg_x2], deg_t, coeff)."""
        rows = [tuple(float(v) for v in r) for r in rows]
        for r in rows:
            if len(r) != q + 2:
                raise ConfigError(
                    "obstacle poly rows need %d entries (x degrees, t degree, "
                    "coefficient), got %r" % (q + 2, (r,)))
            if any(d < 0 or d != int(d) for d in r[:-1]):
                raise ConfigError("monomial degrees must be nonnegative integers")

        def at(orders):
            def f(x, t):
                return _poly_eval(rows, tuple(x) + (t,), orders)
            return f

        zeros = (0,) * (q + 1)

        def bump(i, by=1):
            o = list(zeros)
            o[i] += by
            return tuple(o)

        def second(i, j):
            o = list(zeros)
            o[i] += 1
            o[j] += 1
            return tuple(o)

        grad_fns = tuple(at(bump(i)) for i in range(q))
        hess_fns = tuple(tuple(at(second(i, j)) for j in range(q)) for i in range(q))

        def grad(x, t):
            return tuple(g(x, t) for g in grad_fns)

        def hess(x, t):
            return tuple(tuple(hess_fns[i][j](x, t) for j in range(q))
                         for i in range(q))

        return Obstacle(value=at(zeros), grad=grad, hess=hess,
                        time_deriv=at(bump(q)),
                        describe="poly %s" % (rows,))


@dataclass(frozen=True)
class BoundaryData:
    """u0(x, y, t) on the lateral and initial boundary."""

    value: callable
    describe: str = "custom"

    @staticmethod
    def from_poly(rows, q: int) -> "BoundaryData":
        """Rows are (deg_x1[, deg_x2], deg_y, deg_t, coeff)."""
        rows = [tuple(float(v) for v in r) for r in rows]
        for r in rows:
            if len(r) != q + 3:
                raise ConfigError(
                    "boundary poly rows need %d entries, got %r" % (q + 3, (r,)))
            if any(d < 0 or d != int(d) for d in r[:-1]):
                raise ConfigError("monomial degrees must be nonnegative integers")

        def value(x, y, t):
            return _poly_eval(rows, tuple(x) + (y, t), (0,) * (q + 2))

        return BoundaryData(value=value, describe="poly %s" % (rows,))


@dataclass(frozen=True)
class SpaceTimeField:
    """Solution values on every grid node, immutable after construction."""

    grid: HalfCylinderGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.field_shape:
            raise InputDataError(
                "field shape %r does not match grid %r" % (v.shape, self.grid.field_shape))
        if not np.isfinite(v).all():
            raise InputDataError("field contains non-finite values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ProblemSpec:
    """One full instance: operator, obstacle, data, grid, margins."""

    name: str
    operator: EllipticOperator
    obstacle: Obstacle
    boundary: BoundaryData
    grid: GridSpec
    rho: float = 0.25
    tol_contact: float = None
    exact_solution: callable = None     # u(x, y, t) if known
    exact_sigma: callable = None        # sigma(x, t) if known
    notes: str = ""

    def __post_init__(self):
        if not (0 < self.rho < 1):
            raise ConfigError("margin rho=%r must lie in (0,1)" % (self.rho,))
        if self.operator.kind == OperatorKind.MAX_LINEAR:
            width = len(self.operator.coeffs[0])
            if width != self.grid.n:
                raise ConfigError(
                    "max_linear coefficients are %d-dimensional but grid has n=%d"
                    % (width, self.grid.n))
        if self.tol_contact is None:
            # twice the O(h^2) truncation of the face stencil: tight enough
            # that the first free node of a 3/2-power gap stays free
            object.__setattr__(self, "tol_contact", 2.0 * self.grid.h ** 2)

    @cached_property
    def built_grid(self) -> HalfCylinderGrid:
        return build_grid(self.grid)

    @cached_property
    def K(self) -> float:
        """Data bound max(sup|u0|, obstacle H^{2} proxy), sampled on the grid.

        Stands in for the solution sup norm via the maximum principle; the
        true sup norm is unknown before solving.
        """
        g = self.built_grid
        q = g.q
        tang = tuple(xg[..., 0] for xg in g.tangential)
        k_phi = 0.0
        for t in (g.t_levels[0], g.t_levels[-1], g.t_levels[len(g.t_levels) // 2]):
            k_phi = max(k_phi, float(np.max(np.abs(self.obstacle.value(tang, t)))))
            for gv in self.obstacle.grad(tang, t):
                k_phi = max(k_phi, float(np.max(np.abs(gv))))
            hs = self.obstacle.hess(tang, t)
            for i in range(q):
                for j in range(q):
                    k_phi = max(k_phi, float(np.max(np.abs(hs[i][j]))))
            k_phi = max(k_phi, float(np.max(np.abs(self.obstacle.time_deriv(tang, t)))))
        bmask = (g.spatial_mask(NodeClass.LATERAL)
                 | g.spatial_mask(NodeClass.EDGE_RING))
        xb = tuple(xg[bmask] for xg in g.tangential)
        yb = g.normal[bmask]
        xa = tuple(xg.ravel() for xg in g.tangential)
        ya = g.normal.ravel()
        sup_u0 = float(np.max(np.abs(self.boundary.value(xa, ya, g.t_levels[0]))))
        for t in g.t_levels[1:]:
            sup_u0 = max(sup_u0, float(np.max(np.abs(self.boundary.value(xb, yb, t)))))
        return max(sup_u0, k_phi)


@dataclass
class CompatibilityReport:
    passed: bool
    ring_margin: float
    worst_ring_node: tuple
    rho_declared: float
    rho_observed: float
    rho_consistent: bool
    K: float


def validate_compatibility(spec: ProblemSpec, raise_on_fail: bool = True
                           ) -> CompatibilityReport:
    """Check u0 > phi strictly on the edge ring, and estimate the margin band.

    The band estimate rho_observed is the widest band of thin-face nodes
    hugging the ring on which the initial data sits strictly above the
    obstacle; it is an empirical stand-in for the continuum margin, which
    would require the auxiliary zero-flux solution to pin down.
    """
    g = spec.built_grid
    ring = g.spatial_mask(NodeClass.EDGE_RING)
    xr = tuple(xg[ring] for xg in g.tangential)
    yr = g.normal[ring]
    margin = np.inf
    worst = None
    for level, t in enumerate(g.t_levels):
        gap = np.asarray(spec.boundary.value(xr, yr, t) - spec.obstacle.value(xr, t))
        i = int(np.argmin(gap))
        if gap[i] < margin:
            margin = float(gap[i])
            worst = (level, tuple(np.argwhere(ring)[i]))

    face = ring | g.spatial_mask(NodeClass.THIN_BOUNDARY)
    xf = tuple(xg[face] for xg in g.tangential)
    yf = g.normal[face]
    t0 = g.t_levels[0]
    gap0 = np.asarray(spec.boundary.value(xf, yf, t0) - spec.obstacle.value(xf, t0))
    dist = np.max(np.stack([np.abs(x) for x in xf]), axis=0)
    h = spec.grid.h
    rho_obs = 0.0
    for k in range(1, spec.grid.m + 1):
        band = dist > 1.0 - k * h - 0.5 * h
        if (gap0[band] > 0).all():
            rho_obs = k * h
        else:
            break
    consistent = spec.rho <= rho_obs + 1e-12
    rep = CompatibilityReport(passed=bool(margin > 0), ring_margin=margin,
                              worst_ring_node=worst, rho_declared=spec.rho,
                              rho_observed=rho_obs, rho_consistent=consistent,
                              K=spec.K)
    if raise_on_fail and not rep.passed:
        raise CompatibilityError(
            "boundary data does not strictly majorize the obstacle on the edge "
            "ring: min margin %g at (level, index)=%r" % (margin, worst))
    return rep


@dataclass(frozen=True)
class GridData:
    """Nodal samples of obstacle and boundary data on the recording levels."""

    grid: HalfCylinderGrid
    phi: np.ndarray        # (levels, tangential shape), whole y=0 face
    u0: np.ndarray         # (levels, spatial shape), valid on data nodes
    data_mask: np.ndarray  # spatial mask where u0 is consumed for levels > 0


def _name_bad_node(arr, grid, level_known=None):
    bad = np.argwhere(~np.isfinite(arr))
    idx = tuple(int(v) for v in bad[0])
    return "index %r" % (idx,)


def sample_to_grid(spec: ProblemSpec) -> GridData:
    """Deterministic nodal sampling of phi and u0; NaN anywhere is an error."""
    g = spec.built_grid
    tang = tuple(xg[..., 0] for xg in g.tangential)
    nt = len(g.t_levels)
    phi = np.empty((nt,) + tang[0].shape)
    for level, t in enumerate(g.t_levels):
        phi[level] = spec.obstacle.value(tang, t)
        if not np.isfinite(phi[level]).all():
            raise InputDataError(
                "obstacle evaluator returned a non-finite value at level %d, %s"
                % (level, _name_bad_node(phi[level], g)))

    data_mask = (g.spatial_mask(NodeClass.LATERAL)
                 | g.spatial_mask(NodeClass.EDGE_RING))
    xa = tuple(xg.ravel() for xg in g.tangential)
    ya = g.normal.ravel()
    u0 = np.zeros((nt,) + g.spatial_shape)
    first = np.asarray(spec.boundary.value(xa, ya, g.t_levels[0]), dtype=float)
    u0[0] = first.reshape(g.spatial_shape)
    if not np.isfinite(u0[0]).all():
        raise InputDataError(
            "boundary evaluator returned a non-finite value on the initial "
            "slice at %s" % _name_bad_node(u0[0], g))
    xb = tuple(xg[data_mask] for xg in g.tangential)
    yb = g.normal[data_mask]
    for level, t in enumerate(g.t_levels[1:], start=1):
        vals = np.asarray(spec.boundary.value(xb, yb, t), dtype=float)
        if not np.isfinite(vals).all():
            j = int(np.argwhere(~np.isfinite(vals))[0])
            idx = tuple(int(v) for v in np.argwhere(data_mask)[j])
            raise InputDataError(
                "boundary evaluator returned a non-finite value at level %d, "
                "index %r" % (level, idx))
        u0[level][data_mask] = vals
    return GridData(grid=g, phi=phi, u0=u0, data_mask=data_mask)


def check_obstacle_derivatives(obs: Obstacle, grid: HalfCylinderGrid) -> float:
    """Worst gap between declared derivatives and centered differences."""
    g = grid
    h = g.spec.h
    dt = g.spec.dt
    tang = tuple(xg[..., 0] for xg in g.tangential)
    q = len(tang)
    worst = 0.0
    inner = (slice(1, -1),) * q
    for t in (g.t_levels[len(g.t_levels) // 2],):
        grad = obs.grad(tang, t)
        hess = obs.hess(tang, t)
        for i in range(q):
            up = [np.roll(tang[j], -1, axis=j) if j == i else tang[j] for j in range(q)]
            dn = [np.roll(tang[j], 1, axis=j) if j == i else tang[j] for j in range(q)]
            vp, vd = obs.value(tuple(up), t), obs.value(tuple(dn), t)
            v0 = obs.value(tang, t)
            fd_g = (vp - vd) / (2 * h)
            fd_h = (vp - 2 * v0 + vd) / h ** 2
            worst = max(worst, float(np.max(np.abs((grad[i] - fd_g)[inner]))))
            worst = max(worst, float(np.max(np.abs((hess[i][i] - fd_h)[inner]))))
        fd_t = (obs.value(tang, t + dt) - obs.value(tang, t - dt)) / (2 * dt)
        worst = max(worst, float(np.max(np.abs(obs.time_deriv(tang, t) - fd_t))))
    return worst


# ----------------------------------------------------------------------
# built-in library


def _halfplane_profile(x, y):
    """Re((x + iy)^{3/2}): the 3/2-homogeneous half-plane profile."""
    z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
    return np.power(z, 1.5).real


def _profile_sigma(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, -1.5 * np.sqrt(np.abs(x)), 0.0)


_P1_BUMP_HEIGHT = 0.01
_P1_BUMP_WIDTH = 0.25


def _p1_bump(x):
    s = np.clip(1.0 - (np.asarray(x, dtype=float) + 1.0) / _P1_BUMP_WIDTH, 0.0, None)
    return _P1_BUMP_HEIGHT * s * s


def _make_p1(gs: GridSpec) -> ProblemSpec:
    if gs.n != 2:
        raise ConfigError("P1 uses the planar profile and needs n=2")

    def u0(x, y, t):
        return _halfplane_profile(x[0], y) + _p1_bump(x[0])

    def exact(x, y, t):
        return _halfplane_profile(x[0], y)

    def exact_sigma(x, t):
        return _profile_sigma(x[0])

    return ProblemSpec(
        name="P1", operator=trace_operator(),
        obstacle=Obstacle.from_poly([[0, 0, 0.0]], q=1),
        boundary=BoundaryData(value=u0, describe="3/2-homogeneous profile + edge bump"),
        grid=gs, rho=0.1,
        exact_solution=exact, exact_sigma=exact_sigma,
        notes=("steady heat-operator benchmark; boundary data carries a "
               "0.01-high bump at the x=-1 edge so the ring margin is strict; "
               "the analytic reference ignores the bump, whose influence sits "
               "well below scheme error"))


_P2_C0, _P2_C1, _P2_C2 = 0.3, 1.0, 0.1


def _make_p2(gs: GridSpec) -> ProblemSpec:
    q = gs.n - 1
    rows = [(0,) * q + (0, _P2_C0), (0,) * q + (1, -_P2_C2)]
    for i in range(q):
        deg = tuple(2 if j == i else 0 for j in range(q))
        rows.append(deg + (0, -_P2_C1))
    obstacle = Obstacle.from_poly(rows, q=q)

    def u0(x, y, t):
        return np.maximum(obstacle.value(x, t), 0.0) + 0.0 * np.asarray(y)

    return ProblemSpec(
        name="P2", operator=pucci_plus(1.0, 2.0),
        obstacle=obstacle,
        boundary=BoundaryData(value=u0, describe="positive part of the obstacle"),
        grid=gs, rho=0.25,
        notes="paraboloid obstacle under the convex Pucci operator; genuine "
              "free boundary near |x| ~ 0.55")


_P3_EPS = 1e-3


def _make_p3(gs: GridSpec) -> ProblemSpec:
    q = gs.n - 1

    def u0(x, y, t):
        return _P3_EPS - np.asarray(y, dtype=float) + 0.0 * x[0]

    diags = [(1.0,) * gs.n, (2.0,) + (1.0,) * (gs.n - 1)]
    return ProblemSpec(
        name="P3", operator=max_linear(diags, 1.0, 2.0),
        obstacle=Obstacle.from_poly([(0,) * q + (0, 0.0)], q=q),
        boundary=BoundaryData(value=u0, describe="thin tilted slab"),
        grid=gs, rho=0.5,
        notes="fully coated regime: data dips below the obstacle one cell off "
              "the face, so every thin node is in contact from the first step")


def _make_p4(gs: GridSpec) -> ProblemSpec:
    def u0(x, y, t):
        r2 = sum(np.asarray(xi, dtype=float) ** 2 for xi in x)
        return (r2 + 0.5 * np.asarray(y, dtype=float) ** 2) * np.exp(0.3 * np.asarray(t))

    q = gs.n - 1
    return ProblemSpec(
        name="P4", operator=pucci_minus(1.0, 2.0),
        obstacle=Obstacle.from_poly([(0,) * q + (0, -1.0)], q=q),
        boundary=BoundaryData(value=u0, describe="paraboloid times slow exponential"),
        grid=gs, rho=0.5,
        notes="obstacle far below everything: the constraint never binds and "
              "the run doubles as a pure zero-flux reference")


_DEFAULT_SPANS = {"P1": (-0.5, 0.0), "P2": (-0.6, 0.0), "P3": (-0.25, 0.0),
                  "P4": (-0.25, 0.0)}
_BUILDERS = {"P1": _make_p1, "P2": _make_p2, "P3": _make_p3, "P4": _make_p4}


def problem_names():
    return sorted(_BUILDERS)


def problem_notes(name: str) -> str:
    return make_problem(name, h=0.25).notes


def make_problem(name: str, h: float = 1.0 / 16, dt: float = None,
                 t_span: tuple = None, n: int = 2) -> ProblemSpec:
    """Instantiate a library problem on a grid of the requested resolution."""
    if name not in _BUILDERS:
        raise ConfigError("unknown problem %r; known: %s"
                          % (name, ", ".join(problem_names())))
    if t_span is None:
        t_span = _DEFAULT_SPANS[name]
    if dt is None:
        span = t_span[1] - t_span[0]
        dt = span / 256
    gs = GridSpec(n=n, h=h, dt=dt, t_span=t_span)
    return _BUILDERS[name](gs)


def neumann_validation_spec(h: float, dt: float = None,
                            t_span: tuple = (0.0, 1.0 / 32)) -> ProblemSpec:
    """Heat-operator zero-flux benchmark with the separable exact solution.

    Not registered in the library: its role is the convergence check for
    the plain flux solver, and the thin-face sign diagnostics do not apply
    to it cleanly.
    """
    if dt is None:
        dt = h * h / 8.0

    def u0(x, y, t):
        return np.exp(-np.pi ** 2 * np.asarray(t)) * np.cos(np.pi * np.asarray(y)) \
            + 0.0 * x[0]

    def exact(x, y, t):
        return u0(x, y, t)

    gs = GridSpec(n=2, h=h, dt=dt, t_span=t_span)
    return ProblemSpec(
        name="heat_neumann", operator=trace_operator(),
        obstacle=Obstacle.from_poly([[0, 0, -10.0]], q=1),
        boundary=BoundaryData(value=u0, describe="separable heat mode"),
        grid=gs, rho=0.5, exact_solution=exact,
        notes="exact solution exp(-pi^2 t) cos(pi y); flux at y=0 vanishes")
