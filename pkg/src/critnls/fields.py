"""Radial grids, sampled fields and the integral functionals of the model.

Everything here is radially symmetric: a field on ``R^N`` is stored as its
profile on the half-line, sampled at the cell centres ``r_j = (j + 1/2) dr``.
The origin is never a node, so the weight ``|x|^{-b}`` is finite everywhere
on the grid.

The gradient functional and the radial Laplacian are built from the same
interface differences, so ``grad_norm_sq(f) == -<f, L f>`` holds exactly in
the discrete inner product.  That identity is what makes the Crank-Nicolson
step in :mod:`critnls.evolution` exactly mass conserving.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, GridMismatch

__all__ = [
    "ModelParams",
    "RadialGrid",
    "Field",
    "RealField",
    "ComplexField",
    "surface_measure",
    "mass_sq",
    "grad_norm_sq",
    "interface_gradients",
    "potential_I",
    "energy",
    "weinstein_J",
    "l2_scale",
    "h1_distance_sq",
    "sup_norm",
    "moment_sq",
    "tail_mass_fraction",
    "profile_interpolator",
    "field_to_json",
    "field_from_json",
    "save_field",
    "load_field",
]


def surface_measure(N: int) -> float:
    """Area of the unit sphere in ``R^N`` (2 for N=1, 2*pi for N=2, ...)."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True)
class ModelParams:
    """Dimension, inhomogeneity, nonlinearity power and frequency.

    ``sigma`` defaults to the L2-critical power ``(2 - b)/N``.  With
    ``critical_mode`` set (the default) any other value is rejected.
    ``b = 0`` is accepted as the classical equation, which has closed-form
    ground states in one dimension and serves as a validation case.
    """

    N: int
    b: float
    sigma: float | None = None
    omega: float = 1.0
    critical_mode: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        b = float(self.b)
        object.__setattr__(self, "b", b)
        if not (0.0 <= b < min(2, self.N)):
            raise DomainError(f"need 0 <= b < min(2, N) = {min(2, self.N)}, got b={b}")
        crit = (2.0 - b) / self.N
        sigma = crit if self.sigma is None else float(self.sigma)
        object.__setattr__(self, "sigma", sigma)
        if not sigma > 0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        if self.N >= 3 and not sigma < (2.0 - b) / (self.N - 2):
            raise DomainError(
                f"sigma={sigma} is not below the energy-subcritical bound "
                f"{(2.0 - b) / (self.N - 2)}"
            )
        if self.critical_mode and not math.isclose(sigma, crit, rel_tol=1e-14, abs_tol=0.0):
            raise DomainError(f"critical mode requires sigma = (2-b)/N = {crit}, got {sigma}")
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def critical_sigma(self) -> float:
        return (2.0 - self.b) / self.N

    @property
    def is_critical(self) -> bool:
        return math.isclose(self.sigma, self.critical_sigma, rel_tol=1e-14)

    def with_omega(self, omega: float) -> "ModelParams":
        return ModelParams(self.N, self.b, self.sigma, omega, self.critical_mode)

    def to_dict(self) -> dict:
        return {"N": self.N, "b": self.b, "sigma": self.sigma, "omega": self.omega}

    @classmethod
    def from_dict(cls, d: dict, critical_mode: bool | None = None) -> "ModelParams":
        sigma = d.get("sigma")
        if critical_mode is None:
            critical_mode = sigma is None or math.isclose(
                float(sigma), (2.0 - float(d["b"])) / int(d["N"]), rel_tol=1e-14
            )
        return cls(int(d["N"]), float(d["b"]), sigma, float(d.get("omega", 1.0)), critical_mode)


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred radial grid on ``[0, r_max]`` with ``M`` cells.

    ``weights[j]`` is the N-dimensional volume of the spherical shell
    ``j*dr < |x| < (j+1)*dr``; for N <= 2 it coincides with the midpoint
    weight ``s_{N-1} r_j^{N-1} dr``.  Fields vanish at ``r_max``.
    """

    r_max: float
    M: int
    N: int = 1

    def __post_init__(self):
        if not self.r_max > 0:
            raise DomainError("r_max must be positive")
        if int(self.M) != self.M or self.M < 2:
            raise DomainError("need at least two cells")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError("dimension must be a positive integer")
        object.__setattr__(self, "r_max", float(self.r_max))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))

    @property
    def dr(self) -> float:
        return self.r_max / self.M

    @property
    def surface(self) -> float:
        return surface_measure(self.N)

    @cached_property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) * self.dr

    @cached_property
    def edges(self) -> np.ndarray:
        """Cell boundaries ``0, dr, ..., r_max`` (M + 1 values)."""
        return np.arange(self.M + 1) * self.dr

    @cached_property
    def weights(self) -> np.ndarray:
        e = self.edges
        return self.surface * np.diff(e**self.N) / self.N

    @cached_property
    def interface_weights(self) -> np.ndarray:
        """Quadrature weights for the gradient at the interfaces ``r = j*dr``, j=1..M.

        The last interface is the Dirichlet wall; it only owns half a cell.
        """
        r = self.edges[1:]
        c = self.surface * r ** (self.N - 1) * self.dr
        c[-1] *= 0.5
        return c

    def potential_weights(self, b: float) -> np.ndarray:
        """Shell integrals of ``|x|^{-b}``; exact even where the weight is singular."""
        e = self.edges
        p = self.N - b
        return self.surface * np.diff(e**p) / p

    def potential(self, b: float) -> np.ndarray:
        """Cell average of ``|x|^{-b}``, the discrete inhomogeneity."""
        if b == 0:
            return np.ones(self.M)
        return self.potential_weights(b) / self.weights

    def volume(self) -> float:
        return self.surface * self.r_max**self.N / self.N

    def scaled(self, factor: float) -> "RadialGrid":
        """Same number of cells, radius multiplied by ``factor``."""
        return RadialGrid(self.r_max * factor, self.M, self.N)

    @cached_property
    def laplacian_bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stiffness matrix ``A`` (symmetric tridiagonal) with ``L = -W^{-1} A``.

        Returns ``(off, diag, w)``: ``off[i] = A[i, i+1]``, ``diag[i] = A[i, i]``
        and the mass weights ``w``.
        """
        c = self.interface_weights
        k = c[:-1] / self.dr**2          # interior interfaces 1..M-1
        diag = np.zeros(self.M)
        diag[1:] += k
        diag[:-1] += k
        diag[-1] += 4.0 * c[-1] / self.dr**2
        return -k, diag, self.weights

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        """Conservative radial Laplacian of sampled values."""
        off, diag, w = self.laplacian_bands
        v = np.asarray(values)
        out = diag * v
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
        return -out / w


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a radial profile at the nodes of ``grid``."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    _dtype = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if self._dtype is not None:
            v = v.astype(self._dtype, copy=False)
        elif not np.iscomplexobj(v):
            v = v.astype(float, copy=False)
        if v.shape != (self.grid.M,):
            raise GridMismatch(f"expected {self.grid.M} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field contains non-finite samples")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def _new(self, values):
        if np.iscomplexobj(values):
            return ComplexField(self.grid, values)
        return RealField(self.grid, values)

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return self._new(self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return self._new(self.values - other.values)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return self._new(self.values * c)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.values)

    def __len__(self):
        return self.grid.M

    def abs(self) -> "RealField":
        return RealField(self.grid, np.abs(self.values))


class RealField(Field):
    _dtype = float


class ComplexField(Field):
    _dtype = complex


def _as_field(f) -> Field:
    if not isinstance(f, Field):
        raise TypeError(f"expected a Field, got {type(f).__name__}")
    return f


def mass_sq(f: Field) -> float:
    """Squared L2 norm."""
    f = _as_field(f)
    return float(np.dot(f.grid.weights, np.abs(f.values) ** 2))


def interface_gradients(f: Field) -> np.ndarray:
    """Difference quotients at ``r = j*dr`` for j = 1..M (last one at the wall)."""
    v = f.values
    g = np.empty(f.grid.M, dtype=v.dtype)
    g[:-1] = np.diff(v) / f.grid.dr
    g[-1] = -2.0 * v[-1] / f.grid.dr
    return g


def grad_norm_sq(f: Field) -> float:
    """Squared L2 norm of the gradient, from interface differences.

    The flux through the origin vanishes (by symmetry for N = 1, by the
    ``r^{N-1}`` factor otherwise), so there is no term at ``r = 0``.
    """
    f = _as_field(f)
    g = interface_gradients(f)
    return float(np.dot(f.grid.interface_weights, np.abs(g) ** 2))


def potential_I(f: Field, params: ModelParams) -> float:
    """``int |x|^{-b} |f|^{2 sigma + 2} dx``."""
    f = _as_field(f)
    w = f.grid.potential_weights(params.b)
    return float(np.dot(w, np.abs(f.values) ** (2 * params.sigma + 2)))


def energy(f: Field, params: ModelParams) -> float:
    return grad_norm_sq(f) - potential_I(f, params) / (params.sigma + 1)


def weinstein_J(f: Field, params: ModelParams) -> float:
    """``||grad f||^2 ||f||^{2 sigma} / I(f)``; scale invariant at critical sigma."""
    m = mass_sq(f)
    if m == 0:
        raise DomainError("Weinstein functional is undefined for the zero field")
    i = potential_I(f, params)
    if not i > 0:
        raise DomainError("Weinstein functional has a vanishing denominator")
    return grad_norm_sq(f) * m**params.sigma / i


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def moment_sq(f: Field) -> float:
    """``int |x|^2 |f|^2 dx`` (variance of the mass distribution about 0)."""
    f = _as_field(f)
    return float(np.dot(f.grid.weights * f.grid.nodes**2, np.abs(f.values) ** 2))


def tail_mass_fraction(f: Field, outer: float = 0.1) -> float:
    """Fraction of the mass sitting in the outer ``outer`` part of the grid."""
    total = mass_sq(f)
    if total == 0:
        return 0.0
    sel = f.grid.nodes >= (1.0 - outer) * f.grid.r_max
    return float(np.dot(f.grid.weights[sel], np.abs(f.values[sel]) ** 2) / total)


def h1_distance_sq(f: Field, g: Field) -> float:
    d = f - g
    return mass_sq(d) + grad_norm_sq(d)


def profile_interpolator(f: Field):
    """Monotone cubic interpolant of a field as a function of ``r >= 0``.

    The profile is extended evenly through the origin and brought to zero
    at ``r_max``; it is zero beyond.
    """
    grid = f.grid
    r = np.concatenate(([-grid.nodes[0]], grid.nodes, [grid.r_max]))
    v = np.concatenate(([f.values[0]], f.values, [0.0]))
    if f.is_real:
        parts = [PchipInterpolator(r, v, extrapolate=False)]
    else:
        parts = [
            PchipInterpolator(r, v.real, extrapolate=False),
            PchipInterpolator(r, v.imag, extrapolate=False),
        ]

    def evaluate(x):
        x = np.abs(np.asarray(x, dtype=float))
        out = [np.nan_to_num(p(x), nan=0.0) for p in parts]
        if len(out) == 1:
            return out[0]
        return out[0] + 1j * out[1]

    return evaluate


def l2_scale(f: Field, lam: float) -> Field:
    """``g(r) = lam^{N/2} f(lam r)`` resampled on the same grid."""
    if not lam > 0:
        raise DomainError("scaling factor must be positive")
    if lam == 1:
        return f._new(f.values)
    g = lam ** (f.grid.N / 2) * profile_interpolator(f)(lam * f.grid.nodes)
    return f._new(g)


def field_to_json(f: Field, params: ModelParams | None = None) -> dict:
    out = {}
    if params is not None:
        out["params"] = params.to_dict()
    out["grid"] = {"r_max": f.grid.r_max, "M": f.grid.M, "N": f.grid.N}
    out["re"] = [float(x) for x in np.real(f.values)]
    if not f.is_real:
        out["im"] = [float(x) for x in np.imag(f.values)]
    return out


def field_from_json(d: dict) -> tuple[Field, ModelParams | None]:
    params = ModelParams.from_dict(d["params"]) if "params" in d else None
    g = d["grid"]
    N = g.get("N", params.N if params is not None else 1)
    grid = RadialGrid(float(g["r_max"]), int(g["M"]), int(N))
    re = np.asarray(d["re"], dtype=float)
    if "im" in d:
        return ComplexField(grid, re + 1j * np.asarray(d["im"], dtype=float)), params
    return RealField(grid, re), params


def save_field(path, f: Field, params: ModelParams | None = None, extra: dict | None = None):
    d = field_to_json(f, params)
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d))


def load_field(path) -> tuple[Field, ModelParams | None]:
    return field_from_json(json.loads(Path(path).read_text()))
