"""Differential operators, exact boundary enforcement, and the Rayleigh quotient.

A network becomes an admissible trial function by construction:

- Dirichlet: U(x) = phi(x) * N(x) + G(x), where phi vanishes exactly on the
  boundary and nowhere inside, and G extends the boundary data.  On the unit
  box the default is phi(x) = prod_i x_i (1 - x_i) and G = 0.
- Periodic: each coordinate is replaced by the features
  {sin(2 pi j x_i / P_i), cos(2 pi j x_i / P_i)} for j = 1..k before the
  first hidden layer, so U(x + P_i e_i) = U(x) holds identically.  With all
  d coordinates periodic the network input width is 2*d*k; the embedded
  vector is laid out as the sine block (coordinate-major, j fastest)
  followed by the matching cosine block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import network as nw
from .errors import DegeneracyError, ShapeError

NEG_LAPLACIAN = "neg_laplacian"
LAPLACIAN_PLUS_CONSTANT = "laplacian_plus_constant"
FOKKER_PLANCK = "fokker_planck"

_OPERATOR_KINDS = (NEG_LAPLACIAN, LAPLACIAN_PLUS_CONSTANT, FOKKER_PLANCK)


@dataclass(frozen=True)
class PotentialSpec:
    """V(x) = sin(sum_i c_i cos(x_i)) with coefficients c_i in [0.1, 1]."""

    coeffs: tuple

    def __post_init__(self):
        cs = tuple(float(c) for c in self.coeffs)
        if any(not 0.1 <= c <= 1.0 for c in cs):
            raise ShapeError(f"potential coefficients must lie in [0.1, 1], got {cs}")
        object.__setattr__(self, "coeffs", cs)

    @property
    def d(self):
        return len(self.coeffs)


def default_potential(d):
    """The documented default coefficients: c_i = 0.1 + 0.9*(i-1)/max(1, d-1)."""
    return PotentialSpec(tuple(0.1 + 0.9 * i / max(1, d - 1) for i in range(d)))


def potential_expr(pot, x):
    """Expression for V at the coordinate node x (width d)."""
    if x.width != pot.d:
        raise ShapeError(f"potential has {pot.d} coefficients, coordinates have width {x.width}")
    inner = ad.affine(ad.cos(x), np.asarray(pot.coeffs).reshape(1, -1), np.zeros(1))
    return ad.sin(inner)


def potential_values(pot, points):
    """V evaluated numerically at an (N, d) array."""
    pts = np.asarray(points, dtype=np.float64)
    return np.sin(np.cos(pts) @ np.asarray(pot.coeffs))


@dataclass(frozen=True)
class OperatorSpec:
    """The linear self-adjoint operator applied to trial functions.

    kind selects among -Delta, Delta + c*I, and the Fokker-Planck generator
    -Delta u - grad V . grad u - (Delta V) u.  A nonzero ``shift`` alpha turns
    the operator into L - alpha*I.
    """

    kind: str
    constant: float = 100.0
    potential: PotentialSpec | None = None
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in _OPERATOR_KINDS:
            raise ShapeError(f"unknown operator kind {self.kind!r}")
        if self.kind == FOKKER_PLANCK and self.potential is None:
            raise ShapeError("fokker_planck operator needs a potential")

    def shifted(self, alpha):
        """L - alpha*I; shifts compose additively."""
        return replace(self, shift=self.shift + float(alpha))


def neg_laplacian(shift=0.0):
    return OperatorSpec(NEG_LAPLACIAN, shift=shift)


def laplacian_plus_constant(constant=100.0, shift=0.0):
    return OperatorSpec(LAPLACIAN_PLUS_CONSTANT, constant=constant, shift=shift)


def fokker_planck(potential, shift=0.0):
    return OperatorSpec(FOKKER_PLANCK, potential=potential, shift=shift)


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary handling baked into the trial function.

    Dirichlet uses ``phi`` and ``g`` builders (coordinate node -> Expr); both
    default to the homogeneous unit-box choice.  Periodic carries the period
    per coordinate and the mode count k of the trigonometric embedding.
    """

    kind: str
    phi: object = None
    g: object = None
    periods: tuple | None = None
    modes: int | None = None


def dirichlet_box():
    """Homogeneous Dirichlet data on the unit box [0, 1]^d."""
    return BoundarySpec("dirichlet")


def dirichlet(phi, g=None):
    """General Dirichlet wrap from a user distance function and extension."""
    return BoundarySpec("dirichlet", phi=phi, g=g)


def periodic(d, period=2.0 * math.pi, modes=3):
    """Periodic boundary with the same period along every coordinate."""
    periods = (float(period),) * d if np.isscalar(period) else tuple(map(float, period))
    return BoundarySpec("periodic", periods=periods, modes=int(modes))


def _unit_box_phi(x):
    phi = None
    for i in range(x.width):
        xi = ad.take(x, i)
        term = xi * (1.0 - xi)
        phi = term if phi is None else phi * term
    return phi


@dataclass(frozen=True)
class Trial:
    """A wrapped network: the coordinate leaf, the trial expression, and parts."""

    x: ad.Expr
    expr: ad.Expr
    mlp: nw.Mlp
    bc: BoundarySpec
    d: int

    def values(self, points, params):
        return ad.evaluate_many(self.expr, np.asarray(points, dtype=np.float64), params)


def wrap_trial(mlp, bc):
    """Compose the network with the boundary machinery of ``bc``."""
    if bc.kind == "dirichlet":
        d = mlp.input_width
        x = ad.inputs(d)
        phi = (bc.phi or _unit_box_phi)(x)
        u = phi * nw.forward_expr(mlp, x)
        if bc.g is not None:
            u = u + bc.g(x)
        return Trial(x, u, mlp, bc, d)
    if bc.kind == "periodic":
        d = len(bc.periods)
        k = bc.modes
        expected = 2 * d * k
        if mlp.input_width != expected:
            raise ShapeError(
                f"periodic trial with d={d}, k={k} needs network input width "
                f"{expected}, got {mlp.input_width}")
        x = ad.inputs(d)
        freq = np.zeros((d * k, d))
        for i in range(d):
            for j in range(1, k + 1):
                freq[i * k + (j - 1), i] = 2.0 * math.pi * j / bc.periods[i]
        angles = ad.affine(x, freq, np.zeros(d * k))
        embedded = ad.stack([ad.sin(angles), ad.cos(angles)])
        return Trial(x, nw.forward_expr(mlp, embedded), mlp, bc, d)
    raise ShapeError(f"unknown boundary kind {bc.kind!r}")


def operator_expr(op, trial):
    """(L - shift*I) applied to the trial function, as an expression."""
    return operator_on(op, trial.expr, trial.x)


def operator_on(op, u, x):
    """(L - shift*I) u for any scalar jet expression u over coordinates x."""
    if op.kind == NEG_LAPLACIAN:
        out = -ad.laplacian(u)
    elif op.kind == LAPLACIAN_PLUS_CONSTANT:
        out = ad.laplacian(u) + op.constant * u
    else:
        v = potential_expr(op.potential, x)
        advect = None
        for i in range(x.width):
            term = ad.grad_component(v, i) * ad.grad_component(u, i)
            advect = term if advect is None else advect + term
        out = -ad.laplacian(u) - advect - ad.laplacian(v) * u
    if op.shift != 0.0:
        out = out - op.shift * u
    return out


def apply_operator(op, trial, points, params):
    """(L - shift*I)U at each point, as a flat array."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    lu = operator_expr(op, trial)
    sess = ad.Session([lu], pts)
    sess.forward(params)
    return sess.value(lu)[:, 0].copy()


def rayleigh_quotient(op, trial, samples, params):
    """sum_i LU(x_i) U(x_i) / sum_i U(x_i)^2 over the sample set."""
    pts = getattr(samples, "points", samples)
    pts = np.asarray(pts, dtype=np.float64)
    if pts.size == 0:
        raise ShapeError("rayleigh_quotient needs a non-empty sample set")
    lu = operator_expr(op, trial)
    sess = ad.Session([trial.expr, lu], pts)
    sess.forward(params)
    uv = sess.value(trial.expr)[:, 0]
    lv = sess.value(lu)[:, 0]
    denom = float(uv @ uv)
    if denom < 1e-300:
        raise DegeneracyError("rayleigh_quotient of a (numerically) zero trial")
    return float(lv @ uv) / denom
