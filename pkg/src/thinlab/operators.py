"""Uniformly elliptic operators on symmetric matrices.

Four kinds are implemented: the plain trace (heat), the two Pucci extremal
operators, and a finite max of linear operators with diagonal coefficient
matrices. The diagonal restriction on the max-linear family makes the
operator independent of mixed normal entries, which several diagnostics
rely on. Pucci evaluation goes through closed-form symmetric eigenvalues
in dimensions 2 and 3 so repeated field evaluation stays cheap and
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, InputDataError


class OperatorKind(Enum):
    TRACE = "trace"
    PUCCI_MINUS = "pucci_minus"
    PUCCI_PLUS = "pucci_plus"
    MAX_LINEAR = "max_linear"


@dataclass(frozen=True)
class EllipticityPair:
    lam: float
    Lam: float

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam and np.isfinite(self.Lam)):
            raise ConfigError(
                "ellipticity pair must satisfy 0 < lambda <= Lambda, "
                "got lambda=%r Lambda=%r" % (self.lam, self.Lam))


@dataclass(frozen=True)
class EllipticOperator:
    """Descriptor of F. coeffs holds the diagonal rows of the max-linear family."""

    kind: OperatorKind
    ell: EllipticityPair
    coeffs: tuple = None

    def __post_init__(self):
        if self.kind == OperatorKind.MAX_LINEAR:
            if self.coeffs is None or len(self.coeffs) == 0:
                raise ConfigError("max_linear needs a nonempty coefficient list")
            rows = tuple(tuple(float(c) for c in row) for row in self.coeffs)
            width = {len(r) for r in rows}
            if len(width) != 1:
                raise ConfigError("max_linear coefficient rows differ in length")
            flat = np.array(rows)
            if (flat < self.ell.lam - 1e-12).any() or (flat > self.ell.Lam + 1e-12).any():
                raise ConfigError(
                    "max_linear diagonal entries must lie in [lambda, Lambda]="
                    "[%g, %g]" % (self.ell.lam, self.ell.Lam))
            object.__setattr__(self, "coeffs", rows)
        elif self.coeffs is not None:
            raise ConfigError("coefficient list only applies to max_linear")

    @property
    def is_convex(self) -> bool:
        return self.kind != OperatorKind.PUCCI_MINUS

    @property
    def needs_mixed(self) -> bool:
        """Whether F reads off-diagonal Hessian entries."""
        return self.kind in (OperatorKind.PUCCI_MINUS, OperatorKind.PUCCI_PLUS)

    def coeff_array(self) -> np.ndarray:
        return np.array(self.coeffs)


def trace_operator() -> EllipticOperator:
    return EllipticOperator(OperatorKind.TRACE, EllipticityPair(1.0, 1.0))


def pucci_plus(lam: float, Lam: float) -> EllipticOperator:
    return EllipticOperator(OperatorKind.PUCCI_PLUS, EllipticityPair(lam, Lam))


def pucci_minus(lam: float, Lam: float) -> EllipticOperator:
    return EllipticOperator(OperatorKind.PUCCI_MINUS, EllipticityPair(lam, Lam))


def max_linear(rows, lam: float, Lam: float) -> EllipticOperator:
    return EllipticOperator(OperatorKind.MAX_LINEAR, EllipticityPair(lam, Lam),
                            coeffs=tuple(tuple(r) for r in rows))


def _check_symmetric(M: np.ndarray):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputDataError("expected a square matrix, got shape %r" % (M.shape,))
    if not np.array_equal(M, M.T):
        raise InputDataError("matrix is not exactly symmetric")
    return M


def eigenvalues_sym_field(H: np.ndarray) -> np.ndarray:
    """Eigenvalues of a stack of symmetric matrices, ascending along the last axis.

    Closed forms for n=2 (quadratic) and n=3 (trigonometric); LAPACK for
    anything larger. Input shape (..., n, n), output (..., n).
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[-1]
    if n == 1:
        return H[..., 0, :]
    if n == 2:
        a = H[..., 0, 0]
        b = H[..., 0, 1]
        c = H[..., 1, 1]
        mean = 0.5 * (a + c)
        rad = np.sqrt((0.5 * (a - c)) ** 2 + b * b)
        return np.stack([mean - rad, mean + rad], axis=-1)
    if n == 3:
        q = (H[..., 0, 0] + H[..., 1, 1] + H[..., 2, 2]) / 3.0
        b00 = H[..., 0, 0] - q
        b11 = H[..., 1, 1] - q
        b22 = H[..., 2, 2] - q
        b01 = H[..., 0, 1]
        b02 = H[..., 0, 2]
        b12 = H[..., 1, 2]
        p2 = b00 ** 2 + b11 ** 2 + b22 ** 2 + 2.0 * (b01 ** 2 + b02 ** 2 + b12 ** 2)
        p = np.sqrt(p2 / 6.0)
        detb = (b00 * (b11 * b22 - b12 ** 2)
                - b01 * (b01 * b22 - b12 * b02)
                + b02 * (b01 * b12 - b11 * b02))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(p > 0, detb / np.where(p > 0, 2.0 * p ** 3, 1.0), 0.0)
        r = np.clip(r, -1.0, 1.0)
        phi = np.arccos(r) / 3.0
        e_hi = q + 2.0 * p * np.cos(phi)
        e_lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
        e_mid = 3.0 * q - e_hi - e_lo
        return np.stack([e_lo, e_mid, e_hi], axis=-1)
    return np.linalg.eigvalsh(H)


def eigenvalues_sym(M: np.ndarray) -> np.ndarray:
    """Sorted eigenvalues of one symmetric matrix."""
    return eigenvalues_sym_field(_check_symmetric(M))


def eval_operator_field(op: EllipticOperator, H: np.ndarray) -> np.ndarray:
    """F applied to a stack of symmetric matrices of shape (..., n, n)."""
    H = np.asarray(H, dtype=float)
    n = H.shape[-1]
    if op.kind == OperatorKind.TRACE:
        return np.trace(H, axis1=-2, axis2=-1)
    if op.kind == OperatorKind.MAX_LINEAR:
        A = op.coeff_array()
        if A.shape[1] != n:
            raise InputDataError(
                "max_linear coefficients are %d-dimensional, matrix is %d"
                % (A.shape[1], n))
        diag = np.diagonal(H, axis1=-2, axis2=-1)
        return np.max(diag @ A.T, axis=-1)
    eig = eigenvalues_sym_field(H)
    pos = np.clip(eig, 0.0, None).sum(axis=-1)
    neg = np.clip(eig, None, 0.0).sum(axis=-1)
    lam, Lam = op.ell.lam, op.ell.Lam
    if op.kind == OperatorKind.PUCCI_MINUS:
        return lam * pos + Lam * neg
    return Lam * pos + lam * neg


def eval_operator(op: EllipticOperator, M: np.ndarray) -> float:
    return float(eval_operator_field(op, _check_symmetric(M)))


def reflect_matrix(M: np.ndarray) -> np.ndarray:
    """Flip the sign of the mixed normal entries m_in, m_ni (y axis last)."""
    M = _check_symmetric(M)
    out = M.copy()
    out[:-1, -1] *= -1.0
    out[-1, :-1] *= -1.0
    return out


@dataclass
class StructuralReport:
    """Worst-case violation magnitudes from randomized assumption checks."""

    samples: int
    convexity_checked: bool
    convexity_violation: float
    reflection_violation: float
    ellipticity_lower_violation: float
    ellipticity_upper_violation: float

    @property
    def worst(self) -> float:
        vals = [self.reflection_violation, self.ellipticity_lower_violation,
                self.ellipticity_upper_violation]
        if self.convexity_checked:
            vals.append(self.convexity_violation)
        return max(vals)


def check_structural_assumptions(op: EllipticOperator, samples: int = 200,
                                 seed: int = 0, n: int = None) -> StructuralReport:
    """Sample random symmetric matrices and measure assumption violations.

    Checks midpoint convexity (convex kinds only), invariance under
    reflection of the normal axis, and the uniform ellipticity sandwich
    lambda tr(N) <= F(M+N) - F(M) <= Lambda tr(N) for positive
    semidefinite N. Violations are reported, never raised.
    """
    if samples < 1:
        raise InputDataError("need at least one sample")
    if n is None:
        n = 2 if op.coeffs is None else len(op.coeffs[0])
    rng = np.random.default_rng(seed)
    conv = refl = lo = hi = 0.0
    lam, Lam = op.ell.lam, op.ell.Lam
    for _ in range(samples):
        G = rng.normal(size=(n, n))
        M = (G + G.T) / 2.0
        G2 = rng.normal(size=(n, n))
        N2 = (G2 + G2.T) / 2.0
        if op.is_convex:
            mid = eval_operator(op, (M + N2) / 2.0)
            conv = max(conv, mid - 0.5 * (eval_operator(op, M) + eval_operator(op, N2)))
        refl = max(refl, abs(eval_operator(op, reflect_matrix(M)) - eval_operator(op, M)))
        B = rng.normal(size=(n, n))
        N = B @ B.T
        N = (N + N.T) / 2.0
        diff = eval_operator(op, M + N) - eval_operator(op, M)
        tr = float(np.trace(N))
        lo = max(lo, lam * tr - diff)
        hi = max(hi, diff - Lam * tr)
    return StructuralReport(samples=samples, convexity_checked=op.is_convex,
                            convexity_violation=conv, reflection_violation=refl,
                            ellipticity_lower_violation=lo,
                            ellipticity_upper_violation=hi)


def linearization_coeffs(op: EllipticOperator, M: np.ndarray,
                         quad_points: int = 64) -> np.ndarray:
    """Averaged derivative matrix a_ij = int_0^1 F_ij(h M) dh.

    F_ij are central finite-difference derivatives in the matrix entries
    (symmetric pairs perturbed together), integrated by the midpoint rule.
    For 1-homogeneous F the result satisfies tr(A M) = F(M) - F(0).
    """
    M = _check_symmetric(M)
    if quad_points < 1:
        raise InputDataError("need at least one quadrature point")
    n = M.shape[0]
    eps = 1e-5 * (1.0 + float(np.linalg.norm(M)))
    A = np.zeros((n, n))
    hs = (np.arange(quad_points) + 0.5) / quad_points
    for hq in hs:
        base = hq * M
        for i in range(n):
            for j in range(i, n):
                P = np.zeros((n, n))
                P[i, j] = eps
                P[j, i] = eps
                d = eval_operator(op, base + P) - eval_operator(op, base - P)
                # diagonal perturbs one entry by eps, off-diagonal two entries
                grad = d / (2.0 * eps) if i == j else d / (4.0 * eps)
                A[i, j] += grad
                A[j, i] = A[i, j]
    return A / quad_points
