"""Time-marching solvers for the thin-obstacle problem.

Three boundary treatments share one marching kernel:

* neumann: an inhomogeneous flux g on the y=0 face, enforced through the
  second-order ghost value u(x,-h) = u(x,h) - 2h g(x).
* penalized: flux g = -k (phi - u)^+ resolved implicitly per step by
  monotone scalar bisection at each face node. k=0 reproduces the neumann
  solver with zero flux bit for bit because both run the same code path.
* signorini: every face node first takes the zero-flux update (the
  neumann rule with g=0), then is projected to max(phi, candidate). The
  penalized solves increase pointwise with k toward exactly this scheme,
  because their per-node roots are capped by max(phi, candidate), so the
  penalty route converges to the signorini route monotonically from below.
  Where the obstacle is inactive the rule reduces to the neumann solve
  bit for bit.

Time integration is forward Euler under a CFL bound, or backward Euler
resolved by Jacobi sweeps with per-node bisection. The recording step is
grid.dt; cfg.substeps subdivides it for marching without storing the
intermediate slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import (
    BudgetError, CFLError, ConfigError, InputDataError, NumericsError,
    SweepConvergenceError,
)
from .geometry import NodeClass
from .operators import EllipticOperator, OperatorKind, eval_operator_field
from .problems import ProblemSpec, SpaceTimeField, sample_to_grid, validate_compatibility

EXPLICIT = "explicit"
IMPLICIT_SWEEP = "implicit_sweep"
_SCHEMES = (EXPLICIT, IMPLICIT_SWEEP)


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = EXPLICIT
    cfl_safety: float = 0.9
    tol_sweep: float = 1e-12
    max_sweeps: int = 200
    substeps: object = 1          # marching steps per recording step, or "auto"
    penalty_k: float = 0.0

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ConfigError("scheme must be one of %s, got %r" % (_SCHEMES, self.scheme))
        if not (0 < self.cfl_safety <= 1):
            raise ConfigError("cfl_safety must lie in (0, 1], got %r" % (self.cfl_safety,))
        if not (self.tol_sweep > 0):
            raise ConfigError("tol_sweep must be positive")
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be at least 1")
        if self.substeps != "auto":
            if not (isinstance(self.substeps, (int, np.integer)) and self.substeps >= 1):
                raise ConfigError('substeps must be a positive integer or "auto"')
        if self.penalty_k < 0:
            raise ConfigError("penalty parameter k must be nonnegative")


@dataclass
class SolveResult:
    """A finished run: the field plus per-step solver diagnostics."""

    field: SpaceTimeField
    spec: ProblemSpec
    cfg: SolverConfig
    mode: str
    penalty_k: float
    flux: np.ndarray         # per recording level, tangential-interior shape
    iterations: np.ndarray   # sweeps (implicit) or boundary passes (penalized)
    residuals: np.ndarray


def cfl_limit(spec: ProblemSpec) -> float:
    """Largest stable explicit step h^2 / (2 n Lambda)."""
    return spec.grid.h ** 2 / (2.0 * spec.grid.n * spec.operator.ell.Lam)


def resolve_substeps(spec: ProblemSpec, cfg: SolverConfig) -> int:
    if cfg.substeps == "auto":
        if cfg.scheme != EXPLICIT:
            return 1
        target = cfg.cfl_safety * cfl_limit(spec)
        return max(1, int(math.ceil(spec.grid.dt / target - 1e-12)))
    return int(cfg.substeps)


def _check_cfl(spec: ProblemSpec, cfg: SolverConfig, dt_m: float):
    lim = cfg.cfl_safety * cfl_limit(spec)
    if dt_m > lim * (1 + 1e-12):
        raise CFLError(
            "explicit marching step dt=%g exceeds the stability bound %g "
            "(= %g * h^2/(2 n Lambda)); shrink dt or raise substeps"
            % (dt_m, lim, cfg.cfl_safety))


def _inner(u: np.ndarray, offs) -> np.ndarray:
    """Interior block of u shifted by offs (one entry per axis, in {-1,0,1})."""
    return u[tuple(slice(1 + o, s - 1 + o) for s, o in zip(u.shape, offs))]


def hessian_interior(u: np.ndarray, h: float, need_mixed: bool) -> np.ndarray:
    """Centered-difference Hessian at every strictly interior node.

    Returns shape (interior shape) + (n, n). Mixed entries use the
    four-point cross formula and are filled only when the operator reads
    them.
    """
    n = u.ndim
    shape = tuple(s - 2 for s in u.shape)
    H = np.zeros(shape + (n, n))
    zero = (0,) * n
    c = _inner(u, zero)
    h2 = h * h
    for i in range(n):
        up = tuple(1 if a == i else 0 for a in range(n))
        dn = tuple(-1 if a == i else 0 for a in range(n))
        H[..., i, i] = (_inner(u, up) - 2.0 * c + _inner(u, dn)) / h2
    if need_mixed:
        for i in range(n):
            for j in range(i + 1, n):
                pp = tuple((1 if a == i else 0) + (1 if a == j else 0) for a in range(n))
                mm = tuple(-v for v in pp)
                pm = tuple((1 if a == i else 0) - (1 if a == j else 0) for a in range(n))
                mp = tuple(-v for v in pm)
                mix = (_inner(u, pp) + _inner(u, mm) - _inner(u, pm) - _inner(u, mp)) / (4.0 * h2)
                H[..., i, j] = mix
                H[..., j, i] = mix
    return H


def hessian_thin(u: np.ndarray, g_full: np.ndarray, h: float,
                 need_mixed: bool) -> np.ndarray:
    """Hessian on the y=0 face with the flux condition closing the stencil.

    The ghost value u(x,-h) = u(x,h) - 2h g collapses the normal second
    difference to 2(u1 - u0 - h g)/h^2 and the mixed normal entries to
    tangential differences of g. g_full covers the whole tangential grid
    (ring values included) so those differences have neighbors.
    """
    n = u.ndim
    q = n - 1
    face = u[..., 0]
    u1 = u[..., 1]
    innerq = (slice(1, -1),) * q
    shape = tuple(s - 2 for s in face.shape)
    H = np.zeros(shape + (n, n))
    h2 = h * h
    zero = (0,) * q
    c = _inner(face, zero)
    for i in range(q):
        up = tuple(1 if a == i else 0 for a in range(q))
        dn = tuple(-1 if a == i else 0 for a in range(q))
        H[..., i, i] = (_inner(face, up) - 2.0 * c + _inner(face, dn)) / h2
    H[..., q, q] = (2.0 * u1[innerq] - 2.0 * face[innerq] - 2.0 * h * g_full[innerq]) / h2
    if need_mixed:
        for i in range(q):
            for j in range(i + 1, q):
                pp = tuple((1 if a == i else 0) + (1 if a == j else 0) for a in range(q))
                mm = tuple(-v for v in pp)
                pm = tuple((1 if a == i else 0) - (1 if a == j else 0) for a in range(q))
                mp = tuple(-v for v in pm)
                mix = (_inner(face, pp) + _inner(face, mm)
                       - _inner(face, pm) - _inner(face, mp)) / (4.0 * h2)
                H[..., i, j] = mix
                H[..., j, i] = mix
        for i in range(q):
            up = tuple(1 if a == i else 0 for a in range(q))
            dn = tuple(-1 if a == i else 0 for a in range(q))
            mix = (_inner(g_full, up) - _inner(g_full, dn)) / (2.0 * h)
            H[..., i, q] = mix
            H[..., q, i] = mix
    return H


def discrete_operator_apply(op: EllipticOperator, u: np.ndarray, idx: tuple,
                            h: float) -> float:
    """F evaluated on the centered-difference Hessian at one interior node."""
    u = np.asarray(u, dtype=float)
    n = u.ndim
    idx = tuple(int(i) for i in idx)
    if len(idx) != n:
        raise InputDataError("index arity %d does not match slice rank %d" % (len(idx), n))
    for a, i in enumerate(idx):
        if not (1 <= i <= u.shape[a] - 2):
            raise InputDataError(
                "node %r is not interior along axis %d; the full stencil is "
                "missing a neighbor" % (idx, a))
    H = np.zeros((n, n))
    h2 = h * h

    def at(off):
        return u[tuple(i + o for i, o in zip(idx, off))]

    for i in range(n):
        e = tuple(1 if a == i else 0 for a in range(n))
        em = tuple(-v for v in e)
        H[i, i] = (at(e) - 2.0 * at((0,) * n) + at(em)) / h2
    if op.needs_mixed:
        for i in range(n):
            for j in range(i + 1, n):
                pp = tuple((1 if a == i else 0) + (1 if a == j else 0) for a in range(n))
                pm = tuple((1 if a == i else 0) - (1 if a == j else 0) for a in range(n))
                H[i, j] = H[j, i] = (at(pp) + at(tuple(-v for v in pp))
                                     - at(pm) - at(tuple(-v for v in pm))) / (4.0 * h2)
    return float(eval_operator_field(op, H))


def _edge_replicate(a: np.ndarray) -> np.ndarray:
    for ax in range(a.ndim):
        first = [slice(None)] * a.ndim
        second = [slice(None)] * a.ndim
        first[ax], second[ax] = 0, 1
        a[tuple(first)] = a[tuple(second)]
        first[ax], second[ax] = -1, -2
        a[tuple(first)] = a[tuple(second)]
    return a


def _normalize_flux(g, tang_shape):
    if g is None:
        def gf(tang, t):
            return np.zeros(tang_shape)
        return gf
    if np.isscalar(g):
        val = float(g)

        def gf(tang, t):
            return np.full(tang_shape, val)
        return gf
    if callable(g):
        def gf(tang, t):
            out = np.asarray(g(tang, t), dtype=float)
            return np.broadcast_to(out, tang_shape).copy()
        return gf
    raise InputDataError("flux must be None, a scalar, or a callable g(x, t)")


def _face_update_explicit(op, u, g_ext_full, phi_new, k, h, dt_m,
                          tol, max_passes, g_pen_full):
    """Forward-Euler face row with flux g_ext - k (phi - s)^+ implicit in s.

    Neighbor values (tangential and y=h) come from the old slice; only the
    penalty is resolved implicitly. The scalar map s -> u0 + dt F(...) minus
    s is strictly decreasing, so each node has one root, bracketed by the
    penalty-free candidate and phi. Mixed normal entries couple neighbors
    through g; they are lagged and iterated only for operators that read
    them.
    """
    q = u.ndim - 1
    innerq = (slice(1, -1),) * q
    h2 = h * h
    u0_old = u[innerq + (0,)]
    u1 = u[..., 1][innerq]
    hyy_free = (2.0 * u1 - 2.0 * u0_old - 2.0 * h * g_ext_full[innerq]) / h2
    passes = 0
    while True:
        passes += 1
        g_total = g_ext_full + g_pen_full
        H = hessian_thin(u, g_total, h, op.needs_mixed)
        H[..., q, q] = hyy_free
        c_free = u0_old + dt_m * eval_operator_field(op, H)
        s = c_free.copy()
        if k > 0:
            active = (phi_new - c_free) > 0
            if active.any():
                Ha = H[active]
                base = hyy_free[active]
                pa = phi_new[active]
                u0a = u0_old[active]
                lo = c_free[active]
                hi = pa.copy()
                while float(np.max(hi - lo)) > tol:
                    mid = 0.5 * (lo + hi)
                    Ha[..., q, q] = base + 2.0 * k * np.clip(pa - mid, 0.0, None) / h
                    G = u0a + dt_m * eval_operator_field(op, Ha) - mid
                    take = G >= 0
                    lo = np.where(take, mid, lo)
                    hi = np.where(take, hi, mid)
                s[active] = 0.5 * (lo + hi)
            g_new_int = -k * np.clip(phi_new - s, 0.0, None)
        else:
            g_new_int = np.zeros_like(s)
        g_next = np.zeros_like(g_pen_full)
        g_next[innerq] = g_new_int
        _edge_replicate(g_next)
        delta = float(np.max(np.abs(g_next - g_pen_full)))
        g_pen_full = g_next
        if not (op.needs_mixed and k > 0) or delta <= tol * max(1.0, k):
            return s, g_pen_full, passes
        if passes >= max_passes:
            raise SweepConvergenceError(
                "penalized face coupling did not settle in %d passes "
                "(last change %g)" % (max_passes, delta))


def _face_update_implicit(op, cur, rhs, g_ext_full, phi_new, k, h, dt_m,
                          tol, max_passes, g_pen_full):
    """Backward-Euler face row: the node value s sits in every diagonal
    Hessian entry and, for k > 0, in the penalty flux. Neighbors are taken
    from the current sweep iterate; the monotone scalar equation is solved
    by bisection with the slope <= -1 bracket.
    """
    q = cur.ndim - 1
    innerq = (slice(1, -1),) * q
    h2 = h * h
    face = cur[..., 0]
    u1 = cur[..., 1][innerq]
    sums = []
    for i in range(q):
        up = tuple(1 if a == i else 0 for a in range(q))
        dn = tuple(-1 if a == i else 0 for a in range(q))
        sums.append(_inner(face, up) + _inner(face, dn))
    passes = 0
    c0 = face[innerq].copy()
    while True:
        passes += 1
        g_total = g_ext_full + g_pen_full
        H = hessian_thin(cur, g_total, h, op.needs_mixed)
        gext_int = g_ext_full[innerq]

        def G(s):
            for i in range(q):
                H[..., i, i] = (sums[i] - 2.0 * s) / h2
            gval = gext_int - k * np.clip(phi_new - s, 0.0, None) if k > 0 else gext_int
            H[..., q, q] = (2.0 * u1 - 2.0 * s - 2.0 * h * gval) / h2
            return rhs + dt_m * eval_operator_field(op, H) - s

        g0 = G(c0)
        lo = c0 - np.abs(g0)
        hi = c0 + np.abs(g0)
        while float(np.max(hi - lo)) > tol:
            mid = 0.5 * (lo + hi)
            take = G(mid) >= 0
            lo = np.where(take, mid, lo)
            hi = np.where(take, hi, mid)
        s = 0.5 * (lo + hi)
        g_new_int = -k * np.clip(phi_new - s, 0.0, None) if k > 0 else np.zeros_like(s)
        g_next = np.zeros_like(g_pen_full)
        g_next[innerq] = g_new_int
        _edge_replicate(g_next)
        delta = float(np.max(np.abs(g_next - g_pen_full)))
        g_pen_full = g_next
        if not (op.needs_mixed and k > 0) or delta <= tol * max(1.0, k):
            return s, g_pen_full, passes
        if passes >= max_passes:
            raise SweepConvergenceError(
                "penalized face coupling did not settle in %d passes "
                "(last change %g)" % (max_passes, delta))
        c0 = s


def _bisect_jacobi(op, Hvar, diag_sums, rhs, c0, h2, dt_m, tol):
    """Solve s = rhs + dt F(H(s)) per node, all diagonal entries carrying s.

    Hvar is the Hessian stack with mixed entries already frozen;
    diag_sums[i] holds the two-neighbor sum along axis i. The residual at
    the current iterate bounds the root distance because the map has slope
    at most -1, which gives the bracket.
    """
    n = Hvar.shape[-1]

    def G(s):
        for i in range(n):
            Hvar[..., i, i] = (diag_sums[i] - 2.0 * s) / h2
        return rhs + dt_m * eval_operator_field(op, Hvar) - s

    g0 = G(c0)
    lo = c0 - np.abs(g0)
    hi = c0 + np.abs(g0)
    while float(np.max(hi - lo)) > tol:
        mid = 0.5 * (lo + hi)
        take = G(mid) >= 0
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    return 0.5 * (lo + hi)


class _March:
    """Shared marching state for one solve."""

    def __init__(self, spec: ProblemSpec, cfg: SolverConfig, mode: str,
                 g_ext=None, k: float = 0.0):
        validate_compatibility(spec)
        self.spec = spec
        self.cfg = cfg
        self.mode = mode
        self.k = float(k)
        self.grid = spec.built_grid
        self.data = sample_to_grid(spec)
        self.op = spec.operator
        self.h = spec.grid.h
        self.n = spec.grid.n
        self.q = self.n - 1
        self.substeps = resolve_substeps(spec, cfg)
        self.dt_m = spec.grid.dt / self.substeps
        if cfg.scheme == EXPLICIT:
            _check_cfl(spec, cfg, self.dt_m)
        g = self.grid
        self.tang = tuple(xg[..., 0] for xg in g.tangential)
        self.innerq = (slice(1, -1),) * self.q
        self.tang_int = tuple(x[self.innerq] for x in self.tang)
        self.bmask = self.data.data_mask
        self.xb = tuple(xg[self.bmask] for xg in g.tangential)
        self.yb = g.normal[self.bmask]
        self.inner = (slice(1, -1),) * self.n
        self.thin_idx = self.innerq + (0,)
        self.row1_idx = self.innerq + (1,)
        self.gfun = _normalize_flux(g_ext, self.tang[0].shape)
        self.g_pen_full = np.zeros(self.tang[0].shape)

    def phi_at(self, t):
        val = np.asarray(self.spec.obstacle.value(self.tang_int, t), dtype=float)
        return np.broadcast_to(val, self.tang_int[0].shape).copy()

    def dirichlet(self, un, t):
        un[self.bmask] = self.spec.boundary.value(self.xb, self.yb, t)

    def run(self) -> SolveResult:
        g = self.grid
        levels = len(g.t_levels)
        out = np.empty((levels,) + g.spatial_shape)
        u = self.data.u0[0].copy()
        out[0] = u
        tint_shape = self.tang_int[0].shape
        flux = np.zeros((levels,) + tint_shape)
        iterations = np.zeros(levels, dtype=int)
        residuals = np.zeros(levels)
        step = self._explicit_step if self.cfg.scheme == EXPLICIT else self._implicit_step
        for level in range(1, levels):
            t_base = g.t_levels[level - 1]
            for j in range(self.substeps):
                t_old = t_base + j * self.dt_m
                t_new = g.t_levels[level] if j == self.substeps - 1 \
                    else t_base + (j + 1) * self.dt_m
                u, g_row, its, res = step(u, t_old, t_new)
                iterations[level] = max(iterations[level], its)
                residuals[level] = max(residuals[level], res)
            if not np.isfinite(u).all():
                raise NumericsError(
                    "non-finite values appeared at recording level %d (t=%g)"
                    % (level, g.t_levels[level]))
            out[level] = u
            flux[level] = g_row
        return SolveResult(field=SpaceTimeField(grid=g, values=out),
                           spec=self.spec, cfg=self.cfg, mode=self.mode,
                           penalty_k=self.k, flux=flux, iterations=iterations,
                           residuals=residuals)

    # explicit scheme -------------------------------------------------

    def _explicit_step(self, u, t_old, t_new):
        op, h, dt_m = self.op, self.h, self.dt_m
        un = u.copy()
        Hint = hessian_interior(u, h, op.needs_mixed)
        un[self.inner] = u[self.inner] + dt_m * eval_operator_field(op, Hint)
        passes = 0
        g_ext_full = self.gfun(self.tang, t_old)
        phi_new = self.phi_at(t_new) if self.mode != "neumann" else np.zeros(self.tang_int[0].shape)
        s, self.g_pen_full, passes = _face_update_explicit(
            op, u, g_ext_full, phi_new, self.k, h, dt_m,
            self.cfg.tol_sweep, self.cfg.max_sweeps, self.g_pen_full)
        if self.mode == "signorini":
            un[self.thin_idx] = np.maximum(phi_new, s)
            g_row = (un[self.row1_idx] - un[self.thin_idx]) / h
        else:
            un[self.thin_idx] = s
            g_row = (g_ext_full + self.g_pen_full)[self.innerq].copy()
        self.dirichlet(un, t_new)
        return un, g_row, passes, 0.0

    # implicit scheme -------------------------------------------------

    def _implicit_step(self, u, t_old, t_new):
        op, h, dt_m = self.op, self.h, self.dt_m
        h2 = h * h
        tol = self.cfg.tol_sweep
        cur = u.copy()
        self.dirichlet(cur, t_new)
        phi_new = self.phi_at(t_new) if self.mode != "neumann" \
            else np.zeros(self.tang_int[0].shape)
        g_ext_full = self.gfun(self.tang, t_new)
        rhs_int = u[self.inner]
        rhs_thin = u[self.thin_idx]
        g_row = None
        for sweep in range(1, self.cfg.max_sweeps + 1):
            nxt = cur.copy()
            Hint = hessian_interior(cur, h, op.needs_mixed)
            sums = []
            for i in range(self.n):
                up = tuple(1 if a == i else 0 for a in range(self.n))
                dn = tuple(-1 if a == i else 0 for a in range(self.n))
                sums.append(_inner(cur, up) + _inner(cur, dn))
            nxt[self.inner] = _bisect_jacobi(op, Hint, sums, rhs_int,
                                             cur[self.inner], h2, dt_m, tol)
            s, self.g_pen_full, _ = _face_update_implicit(
                op, nxt, rhs_thin, g_ext_full, phi_new, self.k, h, dt_m,
                tol, self.cfg.max_sweeps, self.g_pen_full)
            if self.mode == "signorini":
                nxt[self.thin_idx] = np.maximum(phi_new, s)
                g_row = (nxt[self.row1_idx] - nxt[self.thin_idx]) / h
            else:
                nxt[self.thin_idx] = s
                g_row = (g_ext_full + self.g_pen_full)[self.innerq].copy()
            Hchk = hessian_interior(nxt, h, op.needs_mixed)
            res = float(np.max(np.abs(
                rhs_int + dt_m * eval_operator_field(op, Hchk) - nxt[self.inner])))
            Hface = hessian_thin(nxt, g_ext_full + self.g_pen_full, h, op.needs_mixed)
            defect = rhs_thin + dt_m * eval_operator_field(op, Hface) - nxt[self.thin_idx]
            if self.mode == "signorini":
                # complementarity form: each node is either at the obstacle
                # or satisfies the zero-flux backward-Euler equation
                res_face = float(np.max(np.minimum(
                    nxt[self.thin_idx] - phi_new, np.abs(defect))))
            else:
                res_face = float(np.max(np.abs(defect)))
            res = max(res, res_face)
            cur = nxt
            scale = max(1.0, float(np.max(np.abs(cur))))
            if res <= tol * scale:
                return cur, g_row, sweep, res
        raise SweepConvergenceError(
            "implicit sweeps did not reach residual %g in %d sweeps (last %g)"
            % (tol, self.cfg.max_sweeps, res))


def solve_neumann(spec: ProblemSpec, g=None, cfg: SolverConfig = None) -> SolveResult:
    """March with a prescribed face flux (zero by default)."""
    cfg = cfg or SolverConfig()
    return _March(spec, cfg, "neumann", g_ext=g, k=0.0).run()


def solve_penalized(spec: ProblemSpec, k: float = None,
                    cfg: SolverConfig = None) -> SolveResult:
    """March with the penalty flux -k (phi - u)^+ on the face."""
    cfg = cfg or SolverConfig()
    if k is None:
        k = cfg.penalty_k
    if k < 0:
        raise ConfigError("penalty parameter k must be nonnegative")
    return _March(spec, cfg, "penalized", g_ext=None, k=k).run()


def solve_signorini(spec: ProblemSpec, cfg: SolverConfig = None) -> SolveResult:
    """March with the projection face rule; complementarity is exact."""
    cfg = cfg or SolverConfig()
    return _March(spec, cfg, "signorini").run()


# ----------------------------------------------------------------------
# brute-force oracle


def _oracle_eval(op: EllipticOperator, H: np.ndarray) -> float:
    """Operator evaluation along an independent route (LAPACK eigenvalues)."""
    n = H.shape[0]
    if op.kind == OperatorKind.TRACE:
        return float(sum(H[i, i] for i in range(n)))
    if op.kind == OperatorKind.MAX_LINEAR:
        best = -math.inf
        for row in op.coeffs:
            best = max(best, sum(row[i] * H[i, i] for i in range(n)))
        return float(best)
    w = np.linalg.eigvalsh(H)
    pos = float(sum(x for x in w if x > 0))
    neg = float(sum(x for x in w if x < 0))
    if op.kind == OperatorKind.PUCCI_MINUS:
        return op.ell.lam * pos + op.ell.Lam * neg
    return op.ell.Lam * pos + op.ell.lam * neg


def brute_force_oracle(spec: ProblemSpec, cfg: SolverConfig = None) -> SpaceTimeField:
    """Slow reference solve with per-node loops and pattern enumeration.

    Marches the same explicit scheme as solve_signorini but through plain
    Python loops: Hessians assembled entry by entry, Pucci values from LAPACK,
    zero-flux face candidates rebuilt node by node, and the complementarity
    resolved by trying contact patterns (all 2^m of them when the face has at
    most 12 free nodes, projected fixed-point iteration otherwise) instead of
    the closed-form projection.
    """
    cfg = cfg or SolverConfig()
    if cfg.scheme != EXPLICIT:
        raise ConfigError("the oracle only marches the explicit scheme")
    validate_compatibility(spec)
    grid = spec.built_grid
    n = spec.grid.n
    h = spec.grid.h
    slice_nodes = int(np.prod(grid.spatial_shape))
    if slice_nodes > 512:
        raise BudgetError(
            "oracle budget is 512 unknowns per slice, grid has %d" % slice_nodes)
    substeps = resolve_substeps(spec, cfg)
    dt_m = spec.grid.dt / substeps
    lim = cfg.cfl_safety * spec.grid.h ** 2 / (2.0 * n * spec.operator.ell.Lam)
    if dt_m > lim * (1 + 1e-12):
        raise CFLError("oracle marching step %g exceeds the explicit bound %g"
                       % (dt_m, lim))
    op = spec.operator
    q = n - 1
    shape = grid.spatial_shape
    tang = tuple(xg[..., 0] for xg in grid.tangential)

    xa = tuple(xg.ravel() for xg in grid.tangential)
    ya = grid.normal.ravel()
    u = np.asarray(spec.boundary.value(xa, ya, grid.t_levels[0]),
                   dtype=float).reshape(shape).copy()
    bnodes = [tuple(idx) for idx in np.argwhere(
        grid.spatial_mask(NodeClass.LATERAL) | grid.spatial_mask(NodeClass.EDGE_RING))]
    xb = tuple(np.array([grid.x_levels[idx[a]] for idx in bnodes]) for a in range(q))
    yb = np.array([grid.y_levels[idx[q]] for idx in bnodes])

    thin_nodes = [tuple(idx) + (0,) for idx in
                  product(*[range(1, s - 1) for s in shape[:q]])]
    m = len(thin_nodes)

    levels = len(grid.t_levels)
    out = np.empty((levels,) + shape)
    out[0] = u
    interior_ranges = [range(1, s - 1) for s in shape]
    h2 = h * h

    for level in range(1, levels):
        t_base = grid.t_levels[level - 1]
        for j in range(substeps):
            t_new = grid.t_levels[level] if j == substeps - 1 \
                else t_base + (j + 1) * dt_m
            un = u.copy()
            for idx in product(*interior_ranges):
                H = np.zeros((n, n))
                for i in range(n):
                    up = list(idx)
                    up[i] += 1
                    dn = list(idx)
                    dn[i] -= 1
                    H[i, i] = (u[tuple(up)] - 2.0 * u[idx] + u[tuple(dn)]) / h2
                for i in range(n):
                    for jj in range(i + 1, n):
                        pp = list(idx); pp[i] += 1; pp[jj] += 1
                        mm = list(idx); mm[i] -= 1; mm[jj] -= 1
                        pm = list(idx); pm[i] += 1; pm[jj] -= 1
                        mp = list(idx); mp[i] -= 1; mp[jj] += 1
                        val = (u[tuple(pp)] + u[tuple(mm)] - u[tuple(pm)]
                               - u[tuple(mp)]) / (4.0 * h2)
                        H[i, jj] = H[jj, i] = val
                un[idx] = u[idx] + dt_m * _oracle_eval(op, H)
            # face complementarity: per node, either the obstacle value or
            # the zero-flux candidate built from the old slice
            phis = []
            cands = []
            for node in thin_nodes:
                x_here = tuple(np.array(grid.x_levels[node[a]]) for a in range(q))
                phis.append(float(np.asarray(spec.obstacle.value(x_here, t_new))))
                H = np.zeros((n, n))
                for i in range(q):
                    up = list(node)
                    up[i] += 1
                    dn = list(node)
                    dn[i] -= 1
                    H[i, i] = (u[tuple(up)] - 2.0 * u[node] + u[tuple(dn)]) / h2
                H[q, q] = (2.0 * u[node[:q] + (1,)] - 2.0 * u[node]) / h2
                for i in range(q):
                    for jj in range(i + 1, q):
                        pp = list(node); pp[i] += 1; pp[jj] += 1
                        mm = list(node); mm[i] -= 1; mm[jj] -= 1
                        pm = list(node); pm[i] += 1; pm[jj] -= 1
                        mp = list(node); mp[i] -= 1; mp[jj] += 1
                        val = (u[tuple(pp)] + u[tuple(mm)] - u[tuple(pm)]
                               - u[tuple(mp)]) / (4.0 * h2)
                        H[i, jj] = H[jj, i] = val
                cands.append(float(u[node] + dt_m * _oracle_eval(op, H)))
            chosen = None
            if m <= 12:
                for pattern in range(2 ** m):
                    ok = True
                    for i in range(m):
                        contact = (pattern >> i) & 1
                        if contact and cands[i] > phis[i]:
                            ok = False
                            break
                        if not contact and cands[i] < phis[i]:
                            ok = False
                            break
                    if ok:
                        chosen = [(pattern >> i) & 1 for i in range(m)]
                        break
            if chosen is None:
                # projected fixed point; decouples node-wise, so it settles fast
                vals = [max(phis[i], cands[i]) for i in range(m)]
                for _ in range(100):
                    nxt = [max(phis[i], cands[i]) for i in range(m)]
                    if max(abs(a - b) for a, b in zip(vals, nxt)) <= 1e-12:
                        vals = nxt
                        break
                    vals = nxt
                for i, node in enumerate(thin_nodes):
                    un[node] = vals[i]
            else:
                for i, node in enumerate(thin_nodes):
                    un[node] = phis[i] if chosen[i] else cands[i]
            bvals = np.asarray(spec.boundary.value(xb, yb, t_new), dtype=float)
            for bi, node in enumerate(bnodes):
                un[node] = bvals[bi]
            u = un
        if not np.isfinite(u).all():
            raise NumericsError("oracle produced non-finite values at level %d" % level)
        out[level] = u
    return SpaceTimeField(grid=grid, values=out)
