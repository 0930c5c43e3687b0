"""Flat key-value run configuration: parsing, validation, rendering.

The grammar is one `dotted.key = value` assignment per line, values in
JSON (numbers, strings, booleans, nested lists) plus bare integer
rationals like 1/32 for scalar numerics. Full-line comments start with
'#'. Validation is total: every diagnostic carries the offending line
number, unknown keys get a closest-match suggestion, and range checks
name the values involved.
"""

import difflib
import json
from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .geometry import GridSpec
from .operators import max_linear, pucci_minus, pucci_plus, trace_operator
from .problems import (BoundaryData, Obstacle, ProblemSpec, make_problem,
                       problem_names)
from .solvers import SolverConfig

OPERATOR_KINDS = ("trace", "pucci_minus", "pucci_plus", "max_linear")
SOLVER_MODES = ("signorini", "penalized", "neumann")
CHECK_NAMES = ("sigma_nonpositive", "complementarity", "semiconcavity",
               "reflection", "barrier", "u_decay", "sigma_decay",
               "penalty_convergence")
DEFAULT_CHECKS = CHECK_NAMES[:-1]
AUTO = "auto"


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; tuples throughout so instances hash."""

    problem: str = None
    n: int = 2
    h: float = 1.0 / 32
    dt: float = None
    t_span: tuple = None
    op_kind: str = None
    lam: float = None
    Lam: float = None
    coeffs: tuple = None
    obstacle_poly: tuple = None
    boundary_poly: tuple = None
    rho: float = None
    tol_contact: float = None
    mode: str = "signorini"
    scheme: str = "explicit"
    substeps: object = AUTO
    cfl_safety: float = 0.9
    tol_sweep: float = 1e-12
    max_sweeps: int = 200
    penalty_k: float = 0.0
    sweep_penalty_k: tuple = None
    sweep_mesh_h: tuple = None
    checks: tuple = DEFAULT_CHECKS
    delta: float = 0.25
    radii: object = AUTO
    point: object = AUTO
    barrier_c0: object = AUTO
    boxes: int = 10
    negative_control: bool = False
    tol_sigma: object = AUTO
    tol_reflection: object = AUTO
    seed: int = 0
    out_dir: str = "out"

    def build_spec(self) -> ProblemSpec:
        """Materialize the problem this config describes."""
        if self.problem is not None:
            return make_problem(self.problem, h=self.h, dt=self.dt,
                                t_span=self.t_span, n=self.n)
        span = self.t_span if self.t_span is not None else (-1.0, 0.0)
        dt = self.dt if self.dt is not None else (span[1] - span[0]) / 256
        gs = GridSpec(n=self.n, h=self.h, dt=dt, t_span=span)
        q = self.n - 1
        if self.op_kind == "trace":
            op = trace_operator()
        elif self.op_kind == "pucci_plus":
            op = pucci_plus(self.lam, self.Lam)
        elif self.op_kind == "pucci_minus":
            op = pucci_minus(self.lam, self.Lam)
        else:
            op = max_linear(self.coeffs, self.lam, self.Lam)
        kwargs = {}
        if self.rho is not None:
            kwargs["rho"] = self.rho
        if self.tol_contact is not None:
            kwargs["tol_contact"] = self.tol_contact
        return ProblemSpec(
            name="custom", operator=op,
            obstacle=Obstacle.from_poly(self.obstacle_poly, q=q),
            boundary=BoundaryData.from_poly(self.boundary_poly, q=q),
            grid=gs, **kwargs)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(scheme=self.scheme, cfl_safety=self.cfl_safety,
                            tol_sweep=self.tol_sweep, max_sweeps=self.max_sweeps,
                            substeps=self.substeps, penalty_k=self.penalty_k)


def _as_tuple(value):
    if isinstance(value, list):
        return tuple(_as_tuple(v) for v in value)
    return value


def _scalar_number(raw, line_no):
    """JSON number or a bare a/b rational."""
    if "/" in raw:
        parts = raw.split("/")
        if len(parts) == 2:
            try:
                num, den = int(parts[0].strip()), int(parts[1].strip())
            except ValueError:
                raise ConfigError("line %d: malformed rational %r" % (line_no, raw))
            if den == 0:
                raise ConfigError("line %d: rational %r divides by zero"
                                  % (line_no, raw))
            return num / den
    try:
        value = json.loads(raw)
    except ValueError:
        raise ConfigError("line %d: cannot parse value %r" % (line_no, raw))
    return value


def _parse_value(raw, line_no):
    raw = raw.strip()
    if not raw:
        raise ConfigError("line %d: missing value" % line_no)
    if raw[0] in "[{\"tfn":
        try:
            return _as_tuple(json.loads(raw))
        except ValueError:
            raise ConfigError("line %d: invalid JSON value %r" % (line_no, raw))
    return _scalar_number(raw, line_no)


def _want(kind, value, line_no, key):
    def bad(expected):
        raise ConfigError("line %d: key %r expects %s, got %r"
                          % (line_no, key, expected, value))

    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            bad("a number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value == int(value):
                return int(value)
            bad("an integer")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            bad("true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            bad("a string")
        return value
    if kind == "list":
        if not isinstance(value, tuple):
            bad("a list")
        return value
    raise AssertionError(kind)


def _number_list(value, line_no, key):
    out = []
    for v in _want("list", value, line_no, key):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("line %d: key %r expects a list of numbers"
                              % (line_no, key))
        out.append(float(v))
    return tuple(out)


def _poly_rows(value, line_no, key, width):
    rows = _want("list", value, line_no, key)
    if not rows:
        raise ConfigError("line %d: key %r needs at least one row" % (line_no, key))
    out = []
    for row in rows:
        if not isinstance(row, tuple) or len(row) != width:
            raise ConfigError(
                "line %d: key %r rows need %d entries (degrees then "
                "coefficient), got %r" % (line_no, key, width, row))
        for v in row[:-1]:
            if isinstance(v, bool) or not isinstance(v, (int, float)) \
                    or v < 0 or v != int(v):
                raise ConfigError(
                    "line %d: key %r degrees must be nonnegative integers"
                    % (line_no, key))
        if not isinstance(row[-1], (int, float)) or isinstance(row[-1], bool):
            raise ConfigError("line %d: key %r coefficients must be numbers"
                              % (line_no, key))
        out.append(tuple(float(v) for v in row))
    return tuple(out)


# key -> (value kind, RunConfig field); finer validation happens afterwards
_KEYS = {
    "problem": ("str", "problem"),
    "grid.n": ("int", "n"),
    "grid.h": ("number", "h"),
    "grid.dt": ("number", "dt"),
    "grid.t_span": ("list", "t_span"),
    "operator.kind": ("str", "op_kind"),
    "operator.lambda": ("number", "lam"),
    "operator.Lambda": ("number", "Lam"),
    "operator.coeffs": ("list", "coeffs"),
    "obstacle.poly": ("list", "obstacle_poly"),
    "boundary.poly": ("list", "boundary_poly"),
    "rho": ("number", "rho"),
    "tol_contact": ("number", "tol_contact"),
    "solver.mode": ("str", "mode"),
    "solver.scheme": ("str", "scheme"),
    "solver.substeps": (None, "substeps"),
    "solver.cfl_safety": ("number", "cfl_safety"),
    "solver.tol_sweep": ("number", "tol_sweep"),
    "solver.max_sweeps": ("int", "max_sweeps"),
    "solver.penalty_k": ("number", "penalty_k"),
    "sweep.penalty_k": ("list", "sweep_penalty_k"),
    "sweep.mesh_h": ("list", "sweep_mesh_h"),
    "verify.checks": ("list", "checks"),
    "verify.delta": ("number", "delta"),
    "verify.radii": (None, "radii"),
    "verify.point": (None, "point"),
    "verify.barrier_c0": (None, "barrier_c0"),
    "verify.boxes": ("int", "boxes"),
    "verify.negative_control": ("bool", "negative_control"),
    "verify.tol_sigma": (None, "tol_sigma"),
    "verify.tol_reflection": (None, "tol_reflection"),
    "seed": ("int", "seed"),
    "output.dir": ("str", "out_dir"),
}

_FIELD_TO_KEY = {f: k for k, (_, f) in _KEYS.items()}


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate one configuration document."""
    seen = {}
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError("line %d: expected 'key = value', got %r"
                              % (line_no, stripped))
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _KEYS:
            hint = difflib.get_close_matches(key, _KEYS, n=1, cutoff=0.5)
            suffix = " (did you mean %r?)" % hint[0] if hint else ""
            raise ConfigError("line %d: unknown key %r%s" % (line_no, key, suffix))
        if key in seen:
            raise ConfigError("line %d: duplicate key %r (first set on line %d)"
                              % (line_no, key, seen[key]))
        seen[key] = line_no
        kind, field_name = _KEYS[key]
        value = _parse_value(raw, line_no)
        if kind is not None:
            value = _want(kind, value, line_no, key)
        values[field_name] = (value, line_no)
    return _validate(values)


def _err(values, field_name, message):
    key = _FIELD_TO_KEY[field_name]
    if field_name in values:
        raise ConfigError("line %d: key %r %s"
                          % (values[field_name][1], key, message))
    raise ConfigError("key %r %s" % (key, message))


def _validate(values) -> RunConfig:
    def get(field_name, default=None):
        return values[field_name][0] if field_name in values else default

    def line_of(field_name):
        return values.get(field_name, (None, 0))[1]

    cfg = {}
    problem = get("problem")
    custom_fields = [f for f in ("op_kind", "lam", "Lam", "coeffs",
                                 "obstacle_poly", "boundary_poly")
                     if f in values]
    if problem is not None:
        if problem not in problem_names():
            _err(values, "problem", "must be one of %s, got %r"
                 % (", ".join(problem_names()), problem))
        if custom_fields:
            _err(values, custom_fields[0],
                 "cannot be combined with a library problem name")
    else:
        if "op_kind" not in values:
            raise ConfigError(
                "config needs either 'problem' or a full custom description "
                "('operator.kind', 'obstacle.poly', 'boundary.poly')")
    cfg["problem"] = problem

    n = get("n", 2)
    if n not in (2, 3):
        _err(values, "n", "must be 2 or 3, got %r" % n)
    cfg["n"] = n

    h = get("h", 1.0 / 32)
    if not h > 0:
        _err(values, "h", "must be positive, got %r" % h)
    cfg["h"] = h

    dt = get("dt")
    if dt is not None and not dt > 0:
        _err(values, "dt", "must be positive, got %r" % dt)
    cfg["dt"] = dt

    span = get("t_span")
    if span is not None:
        span = _number_list(span, line_of("t_span"), "grid.t_span")
        if len(span) != 2 or not span[0] < span[1]:
            _err(values, "t_span",
                 "must be [t_start, t_end] with t_start < t_end, got %r"
                 % (list(span),))
    cfg["t_span"] = span

    op_kind = get("op_kind")
    lam, Lam = get("lam"), get("Lam")
    coeffs = get("coeffs")
    if op_kind is not None:
        if op_kind not in OPERATOR_KINDS:
            _err(values, "op_kind", "must be one of %s, got %r"
                 % (", ".join(OPERATOR_KINDS), op_kind))
        if op_kind == "trace":
            if lam is not None or Lam is not None:
                _err(values, "lam" if lam is not None else "Lam",
                     "is fixed at 1 for the trace operator; drop the key")
            lam = Lam = 1.0
        else:
            if lam is None or Lam is None:
                _err(values, "op_kind",
                     "needs both 'operator.lambda' and 'operator.Lambda'")
            if not 0 < lam <= Lam:
                _err(values, "lam",
                     "and 'operator.Lambda' must satisfy 0 < lambda <= Lambda, "
                     "got lambda=%g, Lambda=%g" % (lam, Lam))
        if op_kind == "max_linear":
            if coeffs is None:
                _err(values, "op_kind", "needs 'operator.coeffs' diagonals")
            rows = _want("list", coeffs, line_of("coeffs"), "operator.coeffs")
            if not rows:
                _err(values, "coeffs", "needs at least one diagonal")
            for row in rows:
                if not isinstance(row, tuple) or len(row) != n:
                    _err(values, "coeffs",
                         "rows must be %d-entry diagonals, got %r" % (n, row))
            coeffs = rows
        elif coeffs is not None:
            _err(values, "coeffs", "only applies to the max_linear operator")
        if "obstacle_poly" not in values or "boundary_poly" not in values:
            _err(values, "op_kind",
                 "custom runs need 'obstacle.poly' and 'boundary.poly'")
    cfg["op_kind"], cfg["lam"], cfg["Lam"], cfg["coeffs"] = op_kind, lam, Lam, coeffs

    cfg["obstacle_poly"] = (
        _poly_rows(values["obstacle_poly"][0], line_of("obstacle_poly"),
                   "obstacle.poly", n + 1)
        if "obstacle_poly" in values else None)
    cfg["boundary_poly"] = (
        _poly_rows(values["boundary_poly"][0], line_of("boundary_poly"),
                   "boundary.poly", n + 2)
        if "boundary_poly" in values else None)

    rho = get("rho")
    if rho is not None and not 0 < rho < 1:
        _err(values, "rho", "must lie in (0, 1), got %r" % rho)
    cfg["rho"] = rho

    tol_contact = get("tol_contact")
    if tol_contact is not None and not tol_contact > 0:
        _err(values, "tol_contact", "must be positive, got %r" % tol_contact)
    cfg["tol_contact"] = tol_contact

    mode = get("mode", "signorini")
    if mode not in SOLVER_MODES:
        _err(values, "mode", "must be one of %s, got %r"
             % (", ".join(SOLVER_MODES), mode))
    cfg["mode"] = mode

    scheme = get("scheme", "explicit")
    if scheme not in ("explicit", "implicit_sweep"):
        _err(values, "scheme",
             "must be 'explicit' or 'implicit_sweep', got %r" % scheme)
    cfg["scheme"] = scheme

    substeps = get("substeps", AUTO)
    if substeps != AUTO and (isinstance(substeps, bool)
                             or not isinstance(substeps, int) or substeps < 1):
        _err(values, "substeps", 'must be a positive integer or "auto", got %r'
             % (substeps,))
    cfg["substeps"] = substeps

    cfl = get("cfl_safety", 0.9)
    if not 0 < cfl <= 1:
        _err(values, "cfl_safety", "must lie in (0, 1], got %r" % cfl)
    cfg["cfl_safety"] = cfl

    tol_sweep = get("tol_sweep", 1e-12)
    if not tol_sweep > 0:
        _err(values, "tol_sweep", "must be positive, got %r" % tol_sweep)
    cfg["tol_sweep"] = tol_sweep

    max_sweeps = get("max_sweeps", 200)
    if max_sweeps < 1:
        _err(values, "max_sweeps", "must be at least 1, got %r" % max_sweeps)
    cfg["max_sweeps"] = max_sweeps

    penalty_k = get("penalty_k", 0.0)
    if penalty_k < 0:
        _err(values, "penalty_k", "must be nonnegative, got %r" % penalty_k)
    cfg["penalty_k"] = penalty_k

    for field_name, key in (("sweep_penalty_k", "sweep.penalty_k"),
                            ("sweep_mesh_h", "sweep.mesh_h")):
        seq = get(field_name)
        if seq is not None:
            seq = _number_list(seq, line_of(field_name), key)
            if not seq:
                _err(values, field_name, "schedule must be nonempty")
            if any(v <= 0 for v in seq) and field_name == "sweep_mesh_h":
                _err(values, field_name, "mesh widths must be positive")
            if any(v < 0 for v in seq):
                _err(values, field_name, "penalty values must be nonnegative")
        cfg[field_name] = seq

    checks = get("checks", DEFAULT_CHECKS)
    if "checks" in values:
        checks = tuple(_want("str", c, line_of("checks"), "verify.checks")
                       for c in _want("list", checks, line_of("checks"),
                                      "verify.checks"))
        for c in checks:
            if c not in CHECK_NAMES:
                hint = difflib.get_close_matches(c, CHECK_NAMES, n=1, cutoff=0.5)
                suffix = " (did you mean %r?)" % hint[0] if hint else ""
                _err(values, "checks", "lists unknown check %r%s" % (c, suffix))
        if len(set(checks)) != len(checks):
            _err(values, "checks", "lists a check twice")
    cfg["checks"] = checks

    delta = get("delta", 0.25)
    if not 0 < delta < 1:
        _err(values, "delta", "must lie in (0, 1), got %r" % delta)
    cfg["delta"] = delta

    radii = get("radii", AUTO)
    if radii != AUTO:
        radii = _number_list(radii, line_of("radii"), "verify.radii")
        if len(radii) < 3 or any(r <= 0 for r in radii):
            _err(values, "radii", "needs at least 3 positive radii")
    cfg["radii"] = radii

    point = get("point", AUTO)
    if point != AUTO:
        point = _want("list", point, line_of("point"), "verify.point")
        ok = (len(point) == n and
              all(isinstance(v, int) and not isinstance(v, bool) and v >= 0
                  for v in point))
        if not ok:
            _err(values, "point",
                 "must be \"auto\" or [level, tangential index...] with %d "
                 "nonnegative integers" % n)
    cfg["point"] = point

    c0 = get("barrier_c0", AUTO)
    if c0 != AUTO:
        c0 = _want("number", c0, line_of("barrier_c0"), "verify.barrier_c0")
        if not c0 > 0:
            _err(values, "barrier_c0", "must be positive, got %r" % c0)
    cfg["barrier_c0"] = c0

    boxes = get("boxes", 10)
    if boxes < 1:
        _err(values, "boxes", "must be at least 1, got %r" % boxes)
    cfg["boxes"] = boxes

    cfg["negative_control"] = get("negative_control", False)

    for field_name, key in (("tol_sigma", "verify.tol_sigma"),
                            ("tol_reflection", "verify.tol_reflection")):
        tol = get(field_name, AUTO)
        if tol != AUTO:
            tol = _want("number", tol, line_of(field_name), key)
            if not tol > 0:
                _err(values, field_name, "must be positive, got %r" % tol)
        cfg[field_name] = tol

    seed = get("seed", 0)
    if seed < 0:
        _err(values, "seed", "must be nonnegative, got %r" % seed)
    cfg["seed"] = seed

    cfg["out_dir"] = get("out_dir", "out")

    run = RunConfig(**cfg)
    # grid-level coupling checks reuse the geometry validator
    try:
        span = run.t_span if run.t_span is not None else (-1.0, 0.0)
        dt = run.dt if run.dt is not None else (span[1] - span[0]) / 256
        GridSpec(n=run.n, h=run.h, dt=dt, t_span=span)
    except ConfigError as exc:
        raise ConfigError("line %d: %s" % (line_of("h"), exc))
    if run.mode != "penalized" and run.penalty_k > 0:
        _err(values, "penalty_k", "only applies to solver.mode = \"penalized\"")
    return run


def render_config(cfg: RunConfig) -> str:
    """Canonical text for a RunConfig; parse_config inverts it exactly."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if cfg.op_kind == "trace" and f.name in ("lam", "Lam"):
            continue
        if value == f.default and f.name not in (
                "problem", "h", "op_kind", "obstacle_poly", "boundary_poly"):
            continue
        key = _FIELD_TO_KEY[f.name]

        def show(v):
            if isinstance(v, tuple):
                return [show(x) for x in v]
            return v

        lines.append("%s = %s" % (key, json.dumps(show(value))))
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError("%s: %s" % (path, exc))
