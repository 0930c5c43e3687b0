"""Grid machinery for the upper half cylinder.

The computational domain is the box [-1,1]^(n-1) x [0,1] in space crossed
with a half-open time interval (t_start, t_end]. The face y=0 carries the
unilateral constraint, so its nodes get their own classes: THIN_BOUNDARY
for the open face, EDGE_RING for its rim. Everything is uniform-mesh
numpy; the y axis is always the last spatial axis and time is axis 0 of
space-time fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigError, InputDataError


class NodeClass(IntEnum):
    INTERIOR = 0
    THIN_BOUNDARY = 1
    LATERAL = 2
    EDGE_RING = 3
    INITIAL = 4


class CylinderKind(IntEnum):
    HALF = 0
    THIN = 1


@dataclass(frozen=True)
class ParabolicPoint:
    """A point (x, y, t) with x the tangential coordinates."""

    x: tuple
    y: float
    t: float

    def __post_init__(self):
        xs = tuple(float(v) for v in self.x)
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "t", float(self.t))
        coords = xs + (self.y, self.t)
        if not all(math.isfinite(c) for c in coords):
            raise InputDataError("non-finite coordinate in %r" % (coords,))
        if self.y < 0:
            raise InputDataError("normal coordinate y=%g is negative" % self.y)

    @property
    def space(self):
        return np.array(self.x + (self.y,))


def parabolic_distance(p1: ParabolicPoint, p2: ParabolicPoint) -> float:
    """max(|X1-X2|, sqrt|t1-t2|), the anisotropic distance of the problem."""
    dx = float(np.linalg.norm(p1.space - p2.space))
    return max(dx, math.sqrt(abs(p1.t - p2.t)))


@dataclass(frozen=True)
class GridSpec:
    """Mesh parameters. dt is the recording step; solvers may subdivide it."""

    n: int = 2
    h: float = 1.0 / 16
    dt: float = 1.0 / 1024
    t_span: tuple = (-1.0, 0.0)

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ConfigError("spatial dimension n=%r unsupported, use 2 or 3" % (self.n,))
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError("mesh width h=%r must be positive" % (self.h,))
        m = 1.0 / self.h
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ConfigError("1/h must be an integer, got 1/h=%r" % (m,))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("time step dt=%r must be positive" % (self.dt,))
        t0, t1 = self.t_span
        if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
            raise ConfigError("t_span=%r must be a nonempty interval" % (self.t_span,))
        steps = (t1 - t0) / self.dt
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ConfigError(
                "t_span length %g is not an integer multiple of dt=%g" % (t1 - t0, self.dt)
            )
        object.__setattr__(self, "t_span", (float(t0), float(t1)))

    @property
    def m(self) -> int:
        return int(round(1.0 / self.h))

    @property
    def n_steps(self) -> int:
        t0, t1 = self.t_span
        return int(round((t1 - t0) / self.dt))


@dataclass(frozen=True)
class HalfCylinderGrid:
    """Node coordinates plus the per-node classification."""

    spec: GridSpec
    x_levels: np.ndarray
    y_levels: np.ndarray
    t_levels: np.ndarray
    spatial_class: np.ndarray  # class pattern for every time level after the first
    tangential: tuple = field(repr=False)  # coordinate arrays, each of spatial shape
    normal: np.ndarray = field(repr=False)  # y coordinates, spatial shape

    @property
    def q(self) -> int:
        """Number of tangential axes."""
        return self.spec.n - 1

    @property
    def spatial_shape(self) -> tuple:
        return self.spatial_class.shape

    @property
    def field_shape(self) -> tuple:
        return (self.spec.n_steps + 1,) + self.spatial_shape

    @property
    def node_count(self) -> int:
        return int(np.prod(self.field_shape))

    def class_masks(self, cls: NodeClass) -> np.ndarray:
        """Boolean mask of shape field_shape selecting one node class."""
        out = np.zeros(self.field_shape, dtype=bool)
        if cls == NodeClass.INITIAL:
            out[0] = True
        else:
            out[1:] = self.spatial_class == int(cls)
        return out

    def spatial_mask(self, cls: NodeClass) -> np.ndarray:
        """Spatial-only mask of the class pattern used for levels > 0."""
        return self.spatial_class == int(cls)

    @property
    def thin_slices(self) -> tuple:
        """Index tuple selecting the open thin face in a spatial array."""
        return (slice(1, -1),) * self.q + (0,)

    def point(self, level: int, idx: tuple) -> ParabolicPoint:
        xs = tuple(float(self.x_levels[i]) for i in idx[: self.q])
        return ParabolicPoint(x=xs, y=float(self.y_levels[idx[self.q]]),
                              t=float(self.t_levels[level]))


def build_grid(spec: GridSpec) -> HalfCylinderGrid:
    """Build the classified half-cylinder grid for a validated spec."""
    m = spec.m
    x_levels = np.linspace(-1.0, 1.0, 2 * m + 1)
    y_levels = np.linspace(0.0, 1.0, m + 1)
    t0, t1 = spec.t_span
    t_levels = t0 + spec.dt * np.arange(spec.n_steps + 1)
    t_levels[-1] = t1

    q = spec.n - 1
    shape = (2 * m + 1,) * q + (m + 1,)
    grids = np.meshgrid(*([x_levels] * q + [y_levels]), indexing="ij")
    tang = tuple(grids[:q])
    norm = grids[q]

    on_side = np.zeros(shape, dtype=bool)
    for xg in tang:
        on_side |= np.abs(xg) >= 1.0 - 1e-12
    on_top = norm >= 1.0 - 1e-12
    on_face = norm <= 1e-12

    cls = np.full(shape, int(NodeClass.INTERIOR), dtype=np.int8)
    cls[on_side | on_top] = int(NodeClass.LATERAL)
    cls[on_face & ~on_side] = int(NodeClass.THIN_BOUNDARY)
    cls[on_face & on_side] = int(NodeClass.EDGE_RING)

    return HalfCylinderGrid(spec=spec, x_levels=x_levels, y_levels=y_levels,
                            t_levels=t_levels, spatial_class=cls,
                            tangential=tang, normal=norm)


def cylinder_nodes(grid: HalfCylinderGrid, center: ParabolicPoint, r: float,
                   kind: CylinderKind) -> np.ndarray:
    """Mask of grid nodes in the parabolic cylinder of radius r at center.

    Space is the open ball |X - X0| < r, time the half-open window
    (t0 - r^2, t0]. kind THIN additionally restricts to the y=0 face.
    """
    if center.y != 0.0:
        raise InputDataError("cylinder center must sit on the thin face (y=0)")
    if not (r > 0 and math.isfinite(r)):
        raise InputDataError("cylinder radius must be positive, got %r" % (r,))
    d2 = grid.normal ** 2
    for xg, x0 in zip(grid.tangential, center.x):
        d2 = d2 + (xg - x0) ** 2
    in_ball = d2 < r * r
    if kind == CylinderKind.THIN:
        in_ball &= grid.normal <= 1e-12
    t = grid.t_levels
    in_time = (t > center.t - r * r) & (t <= center.t + 1e-12)
    out = np.zeros(grid.field_shape, dtype=bool)
    out[in_time] = in_ball
    return out
