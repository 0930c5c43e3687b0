"""Diagnostics extracted from finished solves.

Everything here is a pure function of a SolveResult (or of raw arrays for
the hand-built controls): the one-sided face slope and its sign check, the
contact / free decomposition of the thin face, complementarity residuals,
semiconcavity proxies on an interior subcylinder, the even-reflection
supersolution defect, parabolic Hölder seminorms, log-log decay fits at
free-boundary points, and the quadratic barrier check.

Conventions shared with the solver module: time is axis 0, y is the last
spatial axis, thin-face arrays live on the open face (tangential interior,
shape (levels,) + (2m-1,)*q).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .geometry import CylinderKind, NodeClass, ParabolicPoint, cylinder_nodes
from .operators import eval_operator_field, pucci_plus
from .problems import ProblemSpec, SpaceTimeField
from .solvers import SolveResult, hessian_interior

_INNER = slice(1, -1)


def _field_of(obj):
    """Accept either a SolveResult or a bare SpaceTimeField."""
    if isinstance(obj, SolveResult):
        return obj.field
    if isinstance(obj, SpaceTimeField):
        return obj
    raise PreconditionError(
        "expected a SolveResult or SpaceTimeField, got %r" % type(obj).__name__)


def face_obstacle_values(spec: ProblemSpec, grid) -> np.ndarray:
    """Obstacle sampled on the open thin face for every recording level."""
    q = grid.q
    x_int = tuple(xg[..., 0][(_INNER,) * q] for xg in grid.tangential)
    out = np.empty((len(grid.t_levels),) + x_int[0].shape)
    for lv, t in enumerate(grid.t_levels):
        out[lv] = np.broadcast_to(np.asarray(spec.obstacle.value(x_int, t),
                                             dtype=float), x_int[0].shape)
    return out


# ---------------------------------------------------------------------------
# face slope


@dataclass(frozen=True)
class SigmaField:
    """Second-order one-sided normal derivative on the open thin face."""

    grid: object
    values: np.ndarray  # (levels,) + (2m-1,)*q


def compute_sigma(result) -> SigmaField:
    """Face slope from the first three y-levels, exact on quadratics in y."""
    fld = _field_of(result)
    grid = fld.grid
    if grid.spec.m < 2:
        raise PreconditionError(
            "face slope stencil needs at least 3 y-levels, grid has %d"
            % (grid.spec.m + 1))
    h = grid.spec.h
    q = grid.q
    sel = (slice(None),) + (_INNER,) * q
    u0 = fld.values[sel + (0,)]
    u1 = fld.values[sel + (1,)]
    u2 = fld.values[sel + (2,)]
    vals = (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)
    return SigmaField(grid=grid, values=vals)


@dataclass(frozen=True)
class SigmaSignCheck:
    passed: bool
    worst_value: float
    worst_node: tuple  # (level, tangential interior index)
    tol: float


def check_sigma_nonpositive(sigma: SigmaField, tol: float = None) -> SigmaSignCheck:
    """Face slope should stay below a first-order boundary layer.

    The projection scheme enforces the sign only up to O(h) at nodes that
    just left contact, hence the default tolerance 5h.
    """
    if tol is None:
        tol = 5.0 * sigma.grid.spec.h
    worst_flat = int(np.argmax(sigma.values))
    worst = np.unravel_index(worst_flat, sigma.values.shape)
    value = float(sigma.values[worst])
    return SigmaSignCheck(passed=bool(value <= tol), worst_value=value,
                          worst_node=(int(worst[0]), tuple(int(i) for i in worst[1:])),
                          tol=float(tol))


# ---------------------------------------------------------------------------
# contact decomposition


@dataclass(frozen=True)
class ContactDecomposition:
    """Thresholded partition of the open face, per recording level.

    contact: u - phi <= tol_contact; free: the rest; edge: contact nodes
    with a free tangential neighbor. The initial level is all False in
    every mask: it carries data, not scheme output.
    """

    contact: np.ndarray
    free: np.ndarray
    edge: np.ndarray
    tol_contact: float

    def __post_init__(self):
        if (self.contact & self.free).any():
            raise PreconditionError("contact and free sets overlap")
        if (self.edge & ~self.contact).any():
            raise PreconditionError("edge set escapes the contact set")


def decompose_contact(result: SolveResult, tol_contact: float = None
                      ) -> ContactDecomposition:
    if tol_contact is None:
        tol_contact = result.spec.tol_contact
    fld = result.field
    grid = fld.grid
    q = grid.q
    sel = (slice(None),) + (_INNER,) * q
    face = fld.values[sel + (0,)]
    phi = face_obstacle_values(result.spec, grid)
    contact = (face - phi) <= tol_contact
    contact[0] = False
    free = ~contact
    free[0] = False
    edge = np.zeros_like(contact)
    for axis in range(1, 1 + q):
        for shift in (1, -1):
            neigh = np.zeros_like(free)
            src = [slice(None)] * free.ndim
            dst = [slice(None)] * free.ndim
            if shift == 1:
                src[axis] = slice(1, None)
                dst[axis] = slice(None, -1)
            else:
                src[axis] = slice(None, -1)
                dst[axis] = slice(1, None)
            neigh[tuple(dst)] = free[tuple(src)]
            edge |= contact & neigh
    return ContactDecomposition(contact=contact, free=free, edge=edge,
                                tol_contact=float(tol_contact))


@dataclass(frozen=True)
class ComplementarityResidual:
    max_min_form: float   # max |min(u - phi, -sigma)|
    max_product: float    # max |sigma * (u - phi)|


def complementarity_residual(result: SolveResult, sigma: SigmaField = None
                             ) -> ComplementarityResidual:
    """Either the gap or the slope should vanish at every face node, to O(h)."""
    if sigma is None:
        sigma = compute_sigma(result)
    grid = result.field.grid
    q = grid.q
    sel = (slice(1, None),) + (_INNER,) * q
    face = result.field.values[sel + (0,)]
    phi = face_obstacle_values(result.spec, grid)[1:]
    gap = face - phi
    s = sigma.values[1:]
    min_form = float(np.max(np.abs(np.minimum(gap, -s))))
    product = float(np.max(np.abs(s * gap)))
    return ComplementarityResidual(max_min_form=min_form, max_product=product)


def omega_gamma_set(sigma: SigmaField, gamma: float) -> np.ndarray:
    """Face nodes where the slope sits above -gamma; monotone in gamma."""
    if not (gamma > 0):
        raise PreconditionError("gamma must be positive, got %r" % (gamma,))
    return sigma.values > -gamma


# ---------------------------------------------------------------------------
# semiconcavity proxies


@dataclass(frozen=True)
class SemiconcavityReport:
    grad_max: float       # max |first difference| over all space axes
    tan_curv_min: float   # min second tangential difference
    time_diff_min: float  # min backward time difference
    normal_curv_max: float  # max second normal difference
    node_count: int
    delta: float


def semiconcavity_report(result, delta: float) -> SemiconcavityReport:
    """Difference-quotient extrema on the interior subcylinder.

    The subcylinder keeps |X| <= 1 - delta and the recording levels with
    t > t_end - (1 - delta)^2; the one-sided bounds (curvature below in
    tangential directions and time, above in the normal direction) are the
    quantities a refinement ladder is expected to keep stable.
    """
    if not (0 < delta <= 0.5):
        raise PreconditionError("delta=%r must lie in (0, 1/2]" % (delta,))
    fld = _field_of(result)
    grid = fld.grid
    h = grid.spec.h
    n = grid.spec.n
    r2 = sum(xg ** 2 for xg in grid.tangential) + grid.normal ** 2
    inside = r2 <= (1.0 - delta) ** 2 + 1e-12
    t = grid.t_levels
    lv_ok = t > t[-1] - (1.0 - delta) ** 2 - 1e-12
    lv_ok[0] = False
    if not (inside.any() and lv_ok.any()):
        raise PreconditionError(
            "subcylinder at delta=%g contains no recorded nodes" % delta)
    u = fld.values[lv_ok]
    h2 = h * h

    grad_max = 0.0
    for axis in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        pair = inside[tuple(lo)] & inside[tuple(hi)]
        if pair.any():
            d = np.abs(u[(slice(None),) + tuple(hi)] - u[(slice(None),) + tuple(lo)]) / h
            grad_max = max(grad_max, float(d[:, pair].max()))

    def second_diff_extreme(axis, want_min):
        lo = [slice(None)] * n
        mid = [slice(None)] * n
        hi = [slice(None)] * n
        lo[axis] = slice(None, -2)
        mid[axis] = slice(1, -1)
        hi[axis] = slice(2, None)
        ok = inside[tuple(mid)]
        if not ok.any():
            return None
        d = (u[(slice(None),) + tuple(hi)] - 2.0 * u[(slice(None),) + tuple(mid)]
             + u[(slice(None),) + tuple(lo)]) / h2
        block = d[:, ok]
        return float(block.min() if want_min else block.max())

    tan_vals = [second_diff_extreme(a, True) for a in range(n - 1)]
    tan_vals = [v for v in tan_vals if v is not None]
    tan_curv_min = min(tan_vals) if tan_vals else 0.0
    normal_curv_max = second_diff_extreme(n - 1, False)
    if normal_curv_max is None:
        normal_curv_max = 0.0

    lv_idx = np.nonzero(lv_ok)[0]
    time_diff_min = math.inf
    for lv in lv_idx:
        d = (fld.values[lv] - fld.values[lv - 1]) / (t[lv] - t[lv - 1])
        time_diff_min = min(time_diff_min, float(d[inside].min()))
    count = int(inside.sum()) * len(lv_idx)
    return SemiconcavityReport(grad_max=grad_max, tan_curv_min=tan_curv_min,
                               time_diff_min=time_diff_min,
                               normal_curv_max=normal_curv_max,
                               node_count=count, delta=float(delta))


def max_normal_curvature_near_contact_edge(result: SolveResult,
                                           decomposition: ContactDecomposition = None
                                           ) -> float:
    """Largest |second normal difference| one cell above the contact edge.

    The quantity the refinement ladder expects to grow when the solution
    bends like a 3/2-power across the contact edge.
    """
    if decomposition is None:
        decomposition = decompose_contact(result)
    edge = decomposition.edge
    if not edge.any():
        raise PreconditionError("the run has no contact-edge nodes")
    grid = result.field.grid
    q = grid.q
    h2 = grid.spec.h ** 2
    wide = edge.copy()
    for axis in range(1, 1 + q):
        for shift in (1, -1):
            rolled = np.zeros_like(edge)
            src = [slice(None)] * edge.ndim
            dst = [slice(None)] * edge.ndim
            if shift == 1:
                src[axis] = slice(1, None)
                dst[axis] = slice(None, -1)
            else:
                src[axis] = slice(None, -1)
                dst[axis] = slice(1, None)
            rolled[tuple(dst)] = edge[tuple(src)]
            wide |= rolled
    sel = (slice(None),) + (_INNER,) * q
    u0 = result.field.values[sel + (0,)]
    u1 = result.field.values[sel + (1,)]
    u2 = result.field.values[sel + (2,)]
    curv = (u0 - 2.0 * u1 + u2) / h2
    return float(np.max(np.abs(curv[wide])))


# ---------------------------------------------------------------------------
# even reflection across the face


def even_reflection(values: np.ndarray) -> np.ndarray:
    """Mirror a (levels,)+spatial array across y=0 (y the last axis)."""
    return np.concatenate([values[..., :0:-1], values], axis=-1)


def reflection_defect(op, doubled: np.ndarray, t_levels, h: float) -> np.ndarray:
    """F(D^2_h u*) - backward d_t u* at interior nodes of the doubled grid.

    doubled has shape (levels,)+spatial with the y axis already mirrored;
    returns one array per level >= 1 over strictly interior nodes.
    """
    t_levels = np.asarray(t_levels, dtype=float)
    levels = doubled.shape[0]
    n = doubled.ndim - 1
    inner = tuple(slice(1, -1) for _ in range(n))
    out = []
    for lv in range(1, levels):
        H = hessian_interior(doubled[lv], h, op.needs_mixed)
        fval = eval_operator_field(op, H)
        dudt = (doubled[lv][inner] - doubled[lv - 1][inner]) / (t_levels[lv] - t_levels[lv - 1])
        out.append(fval - dudt)
    return np.stack(out)


@dataclass(frozen=True)
class ReflectionReport:
    max_defect: float     # raw defect, informational
    margin: float         # max of defect minus the truncation estimate
    worst_level: int      # where the margin peaks
    worst_index: tuple
    tol: float
    passed: bool


def reflection_margin(op, doubled: np.ndarray, t_levels, h: float):
    """Worst defect in excess of a per-node scheme-truncation estimate.

    The truncation estimate at a node is max(2 * second time difference /
    (2 dt), |F drift across the recording step|): the first term tracks the
    (dt/2) u_tt error of the backward quotient, the second bounds the gap
    between F at the recorded level and the substep average the explicit
    march actually integrated. Returns (max_defect, margin, worst) where
    worst = (level, interior index...) locates the margin peak.
    """
    t_levels = np.asarray(t_levels, dtype=float)
    levels = doubled.shape[0]
    n = doubled.ndim - 1
    inner = tuple(slice(1, -1) for _ in range(n))
    max_defect = -np.inf
    best = (-np.inf, (0,))
    F_prev = eval_operator_field(op, hessian_interior(doubled[0], h,
                                                      op.needs_mixed))
    for lv in range(1, levels):
        dt = t_levels[lv] - t_levels[lv - 1]
        F = eval_operator_field(op, hessian_interior(doubled[lv], h,
                                                     op.needs_mixed))
        defect = F - (doubled[lv][inner] - doubled[lv - 1][inner]) / dt
        if lv < levels - 1:
            second = doubled[lv + 1] - 2.0 * doubled[lv] + doubled[lv - 1]
        else:
            second = doubled[lv] - 2.0 * doubled[lv - 1] + doubled[lv - 2]
        tau = np.abs(second)[inner] / (2.0 * dt)
        excess = defect - np.maximum(2.0 * tau, np.abs(F - F_prev))
        max_defect = max(max_defect, float(defect.max()))
        value = float(excess.max())
        if value > best[0]:
            flat = np.unravel_index(int(np.argmax(excess)), excess.shape)
            best = (value, (lv,) + tuple(int(i) for i in flat))
        F_prev = F
    return max_defect, best[0], best[1]


def reflection_check(result: SolveResult, tol: float = None) -> ReflectionReport:
    """Supersolution defect of the even extension of a constrained solve.

    A nonpositive face slope makes the mirrored field a discrete
    supersolution up to scheme consistency error. The check estimates the
    truncation node by node (see reflection_margin) and passes when no
    defect exceeds it by more than tol, default 1% of the data scale.
    """
    if result.mode not in ("signorini", "penalized"):
        raise PreconditionError(
            "reflection check applies to constrained solves, not %r" % result.mode)
    grid = result.field.grid
    if tol is None:
        tol = 0.01 * max(1.0, result.spec.K)
    doubled = even_reflection(result.field.values)
    max_defect, margin, worst = reflection_margin(
        result.spec.operator, doubled, grid.t_levels, grid.spec.h)
    return ReflectionReport(max_defect=max_defect, margin=margin,
                            worst_level=int(worst[0]),
                            worst_index=tuple(worst[1:]),
                            tol=float(tol), passed=bool(margin <= tol))


# ---------------------------------------------------------------------------
# parabolic Hölder seminorms


_PAIR_CAP = 5000


def _flatten_nodes(values, coords, cap):
    f = np.asarray(values, dtype=float).ravel()
    cs = [np.asarray(c, dtype=float).ravel() for c in coords]
    if any(c.shape != f.shape for c in cs):
        raise PreconditionError("coordinate arrays must match the value array")
    if f.size == 0:
        raise PreconditionError("the node set is empty")
    if f.size > cap:
        stride = int(math.ceil(f.size / cap))
        keep = np.arange(0, f.size, stride)
        f = f[keep]
        cs = [c[keep] for c in cs]
    return f, cs


def holder_seminorm(values, coords, alpha: float, cap: int = _PAIR_CAP) -> float:
    """sup |f(P1)-f(P2)| / p(P1,P2)^alpha over node pairs.

    coords is a tuple of same-shape arrays, all spatial axes first and
    time last; p is the parabolic distance max(|X1-X2|, sqrt|t1-t2|).
    Above `cap` nodes a deterministic stride subsample keeps the pair
    count quadratic-but-bounded.
    """
    if not (0 < alpha <= 1):
        raise PreconditionError("alpha=%r must lie in (0, 1]" % (alpha,))
    f, cs = _flatten_nodes(values, coords, cap)
    if f.size == 1:
        return 0.0
    space, tcoord = cs[:-1], cs[-1]
    d2 = np.zeros((f.size, f.size))
    for c in space:
        d2 += (c[:, None] - c[None, :]) ** 2
    p = np.maximum(np.sqrt(d2), np.sqrt(np.abs(tcoord[:, None] - tcoord[None, :])))
    df = np.abs(f[:, None] - f[None, :])
    mask = p > 0
    if not mask.any():
        return 0.0
    return float(np.max(df[mask] / p[mask] ** alpha))


def holder_time_seminorm(values, coords, alpha: float, cap: int = _PAIR_CAP) -> float:
    """sup over same-space pairs of |f(x,t)-f(x,s)| / |t-s|^((1+alpha)/2)."""
    if not (0 < alpha <= 1):
        raise PreconditionError("alpha=%r must lie in (0, 1]" % (alpha,))
    f, cs = _flatten_nodes(values, coords, cap)
    if f.size == 1:
        return 0.0
    space, tcoord = cs[:-1], cs[-1]
    same = np.ones((f.size, f.size), dtype=bool)
    for c in space:
        same &= c[:, None] == c[None, :]
    dt = np.abs(tcoord[:, None] - tcoord[None, :])
    mask = same & (dt > 0)
    if not mask.any():
        return 0.0
    df = np.abs(f[:, None] - f[None, :])
    return float(np.max(df[mask] / dt[mask] ** (0.5 * (1.0 + alpha))))


def thin_node_set(result, values: np.ndarray = None):
    """(values, coords) on the open face across levels >= 1.

    values defaults to the solution trace; pass a SigmaField's array (or
    any (levels,)+face array) to take seminorms of a derived quantity.
    """
    fld = _field_of(result)
    grid = fld.grid
    q = grid.q
    sel = (_INNER,) * q
    if values is None:
        values = fld.values[(slice(None),) + sel + (0,)]
    levels = values.shape[0]
    x_int = tuple(xg[..., 0][sel] for xg in grid.tangential)
    coords = [np.broadcast_to(x[None], (levels,) + x.shape) for x in x_int]
    coords.append(np.zeros_like(coords[0]))
    tshape = (levels,) + (1,) * q
    coords.append(np.broadcast_to(grid.t_levels[:levels].reshape(tshape),
                                  coords[0].shape))
    return values[1:], tuple(c[1:] for c in coords)


# ---------------------------------------------------------------------------
# decay fits at free-boundary points


def _loglog_fit(r, m):
    x = np.log(np.asarray(r, dtype=float))
    y = np.log(np.asarray(m, dtype=float))
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(coef[0]), float(coef[1]), r2


def _check_radii(grid, point, radii):
    level, tidx = point
    h = grid.spec.h
    radii = sorted(float(r) for r in radii)
    if len(radii) < 3:
        raise PreconditionError("decay fits need at least 3 radii")
    t0 = float(grid.t_levels[level])
    x0 = tuple(float(grid.x_levels[i]) for i in tidx)
    for r in radii:
        if r < 4.0 * h - 1e-12:
            raise PreconditionError("radius %g is below 4h = %g" % (r, 4 * h))
        if any(abs(c) + r > 1.0 + 1e-12 for c in x0):
            raise PreconditionError(
                "ball of radius %g at x0=%r leaves the tangential box" % (r, x0))
        if t0 - r * r < grid.t_levels[0] - 1e-12:
            raise PreconditionError(
                "time window of radius %g reaches before the recorded span" % r)
    return radii, x0, t0


def _point_in_edge(decomposition, grid, point):
    level, tidx = point
    iidx = tuple(i - 1 for i in tidx)
    if level < 1 or level >= decomposition.edge.shape[0]:
        return False
    if any(i < 0 or i >= s for i, s in zip(iidx, decomposition.edge.shape[1:])):
        return False
    return bool(decomposition.edge[(level,) + iidx])


@dataclass(frozen=True)
class UDecayFit:
    A0: float
    B0: tuple
    alpha_u: float
    r2: float
    radii: tuple
    deviations: tuple
    degenerate: bool


def fit_u_decay(result: SolveResult, point, radii,
                decomposition: ContactDecomposition = None) -> UDecayFit:
    """Growth exponent of |u - affine tangent| around a contact-edge node.

    point is (level, full-grid tangential index). The tangent plane takes
    the nodal value, centered tangential slopes, and zero normal slope
    (the face slope vanishes at the contact edge). The exponent reported
    is the log-log slope of max|u - plane| over half-ball windows, minus 1.
    """
    grid = result.field.grid
    if decomposition is None:
        decomposition = decompose_contact(result)
    if not _point_in_edge(decomposition, grid, point):
        raise PreconditionError(
            "point %r is not on the discrete contact edge" % (point,))
    radii, x0, t0 = _check_radii(grid, point, radii)
    level, tidx = point
    u = result.field.values
    A0 = float(u[(level,) + tidx + (0,)])
    h = grid.spec.h
    B0 = []
    for a in range(grid.q):
        up = list(tidx)
        up[a] += 1
        dn = list(tidx)
        dn[a] -= 1
        B0.append(float((u[(level,) + tuple(up) + (0,)]
                         - u[(level,) + tuple(dn) + (0,)]) / (2.0 * h)))
    B0.append(0.0)
    plane = A0
    for a in range(grid.q):
        plane = plane + B0[a] * (grid.tangential[a] - x0[a])
    center = ParabolicPoint(x=x0, y=0.0, t=t0)
    devs = []
    for r in radii:
        mask = cylinder_nodes(grid, center, r, CylinderKind.HALF)
        dev = np.abs(u - plane[None])[mask]
        if dev.size == 0:
            raise PreconditionError("radius %g captures no grid nodes" % r)
        devs.append(float(dev.max()))
    scale = max(1.0, abs(A0))
    if max(devs) < 1e-12 * scale:
        return UDecayFit(A0=A0, B0=tuple(B0), alpha_u=float("nan"),
                         r2=float("nan"), radii=tuple(radii),
                         deviations=tuple(devs), degenerate=True)
    slope, _, r2 = _loglog_fit(radii, devs)
    return UDecayFit(A0=A0, B0=tuple(B0), alpha_u=slope - 1.0, r2=r2,
                     radii=tuple(radii), deviations=tuple(devs),
                     degenerate=False)


@dataclass(frozen=True)
class SigmaDecayFit:
    alpha_sigma: float
    c_sigma: float
    r2: float
    radii: tuple
    max_values: tuple
    unconstrained: bool


def fit_sigma_decay(sigma: SigmaField, point, radii,
                    decomposition: ContactDecomposition = None) -> SigmaDecayFit:
    """Log-log slope of max(-sigma) over face windows around the point.

    When a decomposition is supplied the point must lie on its contact
    edge; without one the membership check is skipped (synthetic fields).
    """
    grid = sigma.grid
    if decomposition is not None and not _point_in_edge(decomposition, grid, point):
        raise PreconditionError(
            "point %r is not on the discrete contact edge" % (point,))
    radii, x0, t0 = _check_radii(grid, point, radii)
    level, tidx = point
    q = grid.q
    x_int = tuple(xg[..., 0][(_INNER,) * q] for xg in grid.tangential)
    d2 = sum((x - c) ** 2 for x, c in zip(x_int, x0))
    t = grid.t_levels
    maxima = []
    for r in radii:
        in_ball = d2 < r * r
        in_time = (t > t0 - r * r) & (t <= t0 + 1e-12)
        window = (-sigma.values[in_time])[:, in_ball]
        if window.size == 0:
            raise PreconditionError("radius %g captures no face nodes" % r)
        maxima.append(float(max(window.max(), 0.0)))
    if min(maxima) <= 0.0:
        return SigmaDecayFit(alpha_sigma=float("nan"), c_sigma=0.0,
                             r2=float("nan"), radii=tuple(radii),
                             max_values=tuple(maxima), unconstrained=True)
    slope, intercept, r2 = _loglog_fit(radii, maxima)
    return SigmaDecayFit(alpha_sigma=slope, c_sigma=float(math.exp(intercept)),
                         r2=r2, radii=tuple(radii), max_values=tuple(maxima),
                         unconstrained=False)


def select_free_boundary_point(result: SolveResult, radii,
                               decomposition: ContactDecomposition = None):
    """Contact-edge node admitting the most of the requested radii.

    Ties break toward later times, then lexicographically smaller index,
    so the choice is deterministic. Returns (level, full-grid tangential
    index).
    """
    if decomposition is None:
        decomposition = decompose_contact(result)
    grid = result.field.grid
    h = grid.spec.h
    nodes = np.argwhere(decomposition.edge)
    if nodes.size == 0:
        raise PreconditionError("the run has no contact-edge nodes")
    best = None
    for row in nodes:
        level = int(row[0])
        tidx = tuple(int(i) + 1 for i in row[1:])
        t0 = float(grid.t_levels[level])
        x0 = tuple(float(grid.x_levels[i]) for i in tidx)
        count = 0
        for r in radii:
            r = float(r)
            if r < 4.0 * h - 1e-12:
                continue
            if any(abs(c) + r > 1.0 + 1e-12 for c in x0):
                continue
            if t0 - r * r < grid.t_levels[0] - 1e-12:
                continue
            count += 1
        key = (count, level, tuple(-i for i in tidx))
        if best is None or key > best[0]:
            best = (key, (level, tidx))
    return best[1]


# ---------------------------------------------------------------------------
# quadratic barrier


def barrier_threshold(n: int, lam: float, Lam: float) -> float:
    """Smallest admissible normal-curvature factor (n/lam)(Lam(n-1)+1)."""
    return (n / lam) * (Lam * (n - 1) + 1.0)


@dataclass(frozen=True)
class BarrierBox:
    """Index-space box: levels level_lo..level_hi, tangential window
    idx_lo..idx_hi (inclusive), y indices 0..j_hi."""

    level_lo: int
    level_hi: int
    idx_lo: tuple
    idx_hi: tuple
    j_hi: int


@dataclass(frozen=True)
class BarrierReport:
    C0: float
    K0: float
    threshold: float
    supersolution_value: float
    supersolution_passed: bool
    majorant_margin: float
    majorant_passed: bool
    boundary_margin: float
    boundary_passed: bool
    point: tuple
    box: BarrierBox


def default_barrier_box(grid, point, half_width: int = 4) -> BarrierBox:
    level, tidx = point
    m = grid.spec.m
    lo = tuple(max(0, i - half_width) for i in tidx)
    hi = tuple(min(2 * m, i + half_width) for i in tidx)
    return BarrierBox(level_lo=max(0, level - half_width), level_hi=level,
                      idx_lo=lo, idx_hi=hi, j_hi=min(m, half_width))


def barrier_h_check(result: SolveResult, point, C0: float, K0: float = None,
                    box: BarrierBox = None, tol_boundary: float = None
                    ) -> BarrierReport:
    """Three-part check of the quadratic barrier anchored at a free node.

    (supersolution) the extremal value on the barrier's constant Hessian
    plus its time slope stays at or below -K0; (majorant) the barrier's
    face trace dominates the obstacle strictly at all earlier face nodes;
    (boundary) the solution exceeds the barrier somewhere on the parabolic
    boundary of the supplied box.
    """
    spec = result.spec
    grid = result.field.grid
    n = spec.grid.n
    lam, Lam = spec.operator.ell.lam, spec.operator.ell.Lam
    thresh = barrier_threshold(n, lam, Lam)
    if not (C0 > thresh):
        raise PreconditionError(
            "C0=%g must exceed the threshold %g" % (C0, thresh))
    if K0 is None:
        K0 = 2.0 * spec.K
    if not (K0 > 0):
        raise PreconditionError("K0 must be positive")
    level, tidx = point
    m = grid.spec.m
    if level < 1 or not all(1 <= i <= 2 * m - 1 for i in tidx):
        raise PreconditionError("point %r is not an open face node" % (point,))
    u = result.field.values
    t0 = float(grid.t_levels[level])
    x0 = tuple(float(grid.x_levels[i]) for i in tidx)
    phi0 = float(np.asarray(spec.obstacle.value(tuple(np.array([c]) for c in x0), t0))[0])
    gap0 = float(u[(level,) + tidx + (0,)]) - phi0
    if gap0 <= spec.tol_contact:
        raise PreconditionError(
            "anchor node gap %g is inside the contact tolerance %g"
            % (gap0, spec.tol_contact))

    H = np.diag([2.0 * K0] * (n - 1) + [-2.0 * C0 * K0])
    extremal = pucci_plus(lam / n, Lam)
    sup_val = float(eval_operator_field(extremal, H)) + K0
    sup_ok = sup_val <= -K0 + 1e-12

    grad0 = tuple(float(np.asarray(g)[0] if np.ndim(g) else g) for g in
                  spec.obstacle.grad(tuple(np.array([c]) for c in x0), t0))
    q = grid.q
    x_int = tuple(xg[..., 0][(_INNER,) * q] for xg in grid.tangential)
    d2 = sum((x - c) ** 2 for x, c in zip(x_int, x0))
    lin = sum(g * (x - c) for g, x, c in zip(grad0, x_int, x0))
    majorant = math.inf
    for lv in range(0, level + 1):
        t = float(grid.t_levels[lv])
        trace = phi0 + lin - K0 * (t - t0) + K0 * d2
        diff = trace - np.broadcast_to(
            np.asarray(spec.obstacle.value(x_int, t), dtype=float), d2.shape)
        if lv == level:
            diff = diff.copy()
            diff[tuple(i - 1 for i in tidx)] = math.inf
        majorant = min(majorant, float(diff.min()))
    majorant_ok = majorant > 0.0

    if box is None:
        box = default_barrier_box(grid, point)
    if not (0 <= box.level_lo < box.level_hi == level):
        raise PreconditionError("box levels %r must end at the anchor level"
                                % ((box.level_lo, box.level_hi),))
    if not all(lo <= i <= hi for lo, i, hi in zip(box.idx_lo, tidx, box.idx_hi)):
        raise PreconditionError("box does not contain the anchor point")
    sl = tuple(slice(lo, hi + 1) for lo, hi in zip(box.idx_lo, box.idx_hi))
    margin = -math.inf
    for lv in range(box.level_lo, box.level_hi + 1):
        t = float(grid.t_levels[lv])
        xw = tuple(xg[sl + (slice(0, box.j_hi + 1),)] for xg in grid.tangential)
        yw = grid.normal[sl + (slice(0, box.j_hi + 1),)]
        bar = phi0 - K0 * (t - t0) - C0 * K0 * yw ** 2
        for g, x, c in zip(grad0, xw, x0):
            bar = bar + g * (x - c)
        bar = bar + K0 * sum((x - c) ** 2 for x, c in zip(xw, x0))
        uw = u[lv][sl + (slice(0, box.j_hi + 1),)]
        onb = np.zeros(uw.shape, dtype=bool)
        if lv == box.level_lo:
            onb[...] = True
        for a in range(q):
            ix = [slice(None)] * uw.ndim
            ix[a] = 0
            onb[tuple(ix)] = True
            ix[a] = uw.shape[a] - 1
            onb[tuple(ix)] = True
        ix = [slice(None)] * uw.ndim
        ix[-1] = uw.shape[-1] - 1
        onb[tuple(ix)] = True
        margin = max(margin, float((uw - bar)[onb].max()))
    if tol_boundary is None:
        tol_boundary = K0 * grid.spec.h
    boundary_ok = margin >= -tol_boundary
    return BarrierReport(C0=float(C0), K0=float(K0), threshold=thresh,
                         supersolution_value=sup_val, supersolution_passed=bool(sup_ok),
                         majorant_margin=majorant, majorant_passed=bool(majorant_ok),
                         boundary_margin=margin, boundary_passed=bool(boundary_ok),
                         point=(int(level), tuple(int(i) for i in tidx)), box=box)


# ---------------------------------------------------------------------------
# aggregated report


@dataclass(frozen=True)
class RegularityReport:
    """One solve's diagnostics bundle, ready for serialization."""

    sigma_max: float
    sigma_check: SigmaSignCheck
    complementarity: ComplementarityResidual
    semiconcavity: SemiconcavityReport
    contact_nodes: int
    edge_nodes: int
    u_fit: UDecayFit
    sigma_fit: SigmaDecayFit
    fit_point: tuple
    fit_note: str
    penalty_k: float
    iterations_max: int
    residual_max: float


def regularity_report(result: SolveResult, delta: float = 0.25,
                      radii=None) -> RegularityReport:
    """Run the whole diagnostic battery on one finished solve.

    Decay fits need a contact edge and admissible windows; when either is
    missing the fits are None and fit_note says why.
    """
    sigma = compute_sigma(result)
    sign = check_sigma_nonpositive(sigma)
    comp = complementarity_residual(result, sigma)
    semi = semiconcavity_report(result, delta)
    dec = decompose_contact(result)
    if radii is None:
        h = result.field.grid.spec.h
        radii = (8 * h, 16 * h, 32 * h)
    u_fit = sigma_fit = None
    point = None
    note = ""
    try:
        point = select_free_boundary_point(result, radii, dec)
        usable = [r for r in radii if _admissible(result.field.grid, point, r)]
        if len(usable) < 3:
            raise PreconditionError(
                "only %d of the requested radii fit around the best edge node"
                % len(usable))
        u_fit = fit_u_decay(result, point, usable, dec)
        sigma_fit = fit_sigma_decay(sigma, point, usable, dec)
    except PreconditionError as exc:
        note = str(exc)
    return RegularityReport(
        sigma_max=float(sigma.values.max()), sigma_check=sign,
        complementarity=comp, semiconcavity=semi,
        contact_nodes=int(dec.contact.sum()), edge_nodes=int(dec.edge.sum()),
        u_fit=u_fit, sigma_fit=sigma_fit, fit_point=point, fit_note=note,
        penalty_k=result.penalty_k,
        iterations_max=int(result.iterations.max()),
        residual_max=float(result.residuals.max()))


def _admissible(grid, point, r):
    level, tidx = point
    h = grid.spec.h
    t0 = float(grid.t_levels[level])
    x0 = tuple(float(grid.x_levels[i]) for i in tidx)
    if r < 4.0 * h - 1e-12:
        return False
    if any(abs(c) + r > 1.0 + 1e-12 for c in x0):
        return False
    return t0 - r * r >= grid.t_levels[0] - 1e-12
