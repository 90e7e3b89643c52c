"""Doubly periodic grids, fields, and spectral calculus.

Conventions
-----------
* Square box ``[0, L)^2`` sampled on an ``n x n`` lattice, row-major:
  ``values[i, j] = f(x_i, y_j)`` with axis 0 the first coordinate
  (direction "1") and axis 1 the second (direction "2").
* Forward transform is the unnormalized DFT (``numpy.fft.fft2``); the
  inverse carries the ``1/n^2`` factor.  A constant field ``c`` therefore
  has spectral zero mode ``c * n**2``.
* First derivatives zero the Nyquist mode (``k = -n/2``) so differentiation
  maps real fields to real fields and stays skew-symmetric; the Laplacian
  is built from the same zeroed multipliers for consistency.
* ``perp(v) = (-v2, v1)``, ``perp_gradient(s) = (-d2 s, d1 s)`` and
  ``curl(v) = d1 v2 - d2 v1``, matching the right-handed convention used
  throughout the solver.
* Nonlinear terms are formed pointwise in physical space; callers are
  expected to pass products through :func:`dealias` (2/3 rule: modes with
  ``|k_x|`` or ``|k_y|`` greater than ``n/3`` are dropped).

Norms reported by :func:`l2_norm` and :func:`inner` are integral-normalized,
i.e. ``l2_norm(f) == sqrt(integral of f^2 over the box)``.

Snapshot files
--------------
Fields are exchanged through a little-endian binary format: a header of
five 64-bit values (magic ``0x4F444446``, format version ``1``, ``n`` as
unsigned integers; box length ``L`` and time ``t`` as IEEE-754 doubles)
followed by row-major float64 planes in the order ``rho, u_x, u_y`` plus
optionally ``pi`` and/or ``U_x, U_y``.  The plane count (3, 4, 5 or 6)
is implied by the payload size and validated exactly on read.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonFiniteFieldError, SnapshotFormatError

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "transform_forward",
    "transform_backward",
    "derivative",
    "gradient",
    "divergence",
    "laplacian",
    "perp",
    "perp_gradient",
    "curl",
    "dealias",
    "gradient_matrix_identity_check",
    "l2_norm",
    "inner",
    "max_abs",
    "mean",
    "random_band_limited",
    "random_solenoidal",
    "Snapshot",
    "write_snapshot",
    "read_snapshot",
]

TWO_PI = 2.0 * np.pi


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with precomputed spectral machinery.

    Parameters
    ----------
    n : int
        Points per axis.  Must be even and at least 8; powers of two give
        the fastest transforms.
    length : float
        Box side length, default ``2*pi``.
    """

    n: int
    length: float = TWO_PI

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got n={self.n}")
        if not self.length > 0.0:
            raise ValueError(f"box length must be positive, got {self.length}")

        n, length = self.n, self.length
        k_int = np.fft.fftfreq(n, d=1.0 / n)  # ..., exact integers as floats
        scale = TWO_PI / length
        deriv_int = k_int.copy()
        deriv_int[n // 2] = 0.0  # Nyquist zeroed in all differentiation

        x1 = (length / n) * np.arange(n)
        mesh_x, mesh_y = np.meshgrid(x1, x1, indexing="ij")

        dx_mult = 1j * scale * deriv_int[:, None] * np.ones((1, n))
        dy_mult = 1j * scale * np.ones((n, 1)) * deriv_int[None, :]
        lap_mult = -((scale * deriv_int)[:, None] ** 2 + (scale * deriv_int)[None, :] ** 2)
        inv_lap = np.zeros_like(lap_mult)
        nz = lap_mult != 0.0
        inv_lap[nz] = 1.0 / lap_mult[nz]

        cutoff = n / 3.0
        keep = np.abs(k_int) <= cutoff
        dealias_mask = keep[:, None] & keep[None, :]

        put = object.__setattr__
        put(self, "spacing", length / n)
        put(self, "x", _frozen(x1))
        put(self, "mesh_x", _frozen(mesh_x))
        put(self, "mesh_y", _frozen(mesh_y))
        put(self, "k_int", _frozen(k_int))
        put(self, "dx_mult", _frozen(dx_mult))
        put(self, "dy_mult", _frozen(dy_mult))
        put(self, "lap_mult", _frozen(lap_mult))
        put(self, "inv_lap_mult", _frozen(inv_lap))
        put(self, "dealias_mask", _frozen(dealias_mask))

    @property
    def cell_area(self):
        return self.spacing ** 2

    def wavenumber_magnitude_int(self):
        """|k| lattice in integer (2*pi/L) units, shape (n, n)."""
        return np.hypot(self.k_int[:, None], self.k_int[None, :])


class ScalarField:
    """Real scalar field on a :class:`Grid` with a lazy spectral cache.

    The value array is exposed read-only; replacing it through the
    ``values`` setter invalidates the cached transform.
    """

    __slots__ = ("grid", "_values", "_hat")

    def __init__(self, grid, values, copy=True):
        arr = np.array(values, dtype=np.float64, copy=copy)
        if arr.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteFieldError("scalar field contains non-finite values")
        arr.setflags(write=False)
        self.grid = grid
        self._values = arr
        self._hat = None

    @classmethod
    def from_spectral(cls, grid, hat):
        """Build a field from spectral coefficients (imaginary residue discarded)."""
        vals = np.fft.ifft2(hat).real
        return cls(grid, vals, copy=False)

    @property
    def values(self):
        return self._values

    @values.setter
    def values(self, new):
        arr = np.array(new, dtype=np.float64, copy=True)
        if arr.shape != (self.grid.n, self.grid.n):
            raise ValueError("shape mismatch on assignment")
        if not np.isfinite(arr).all():
            raise NonFiniteFieldError("scalar field contains non-finite values")
        arr.setflags(write=False)
        self._values = arr
        self._hat = None

    @property
    def hat(self):
        """Spectral coefficients (unnormalized forward transform), cached."""
        if self._hat is None:
            self._hat = _frozen(np.fft.fft2(self._values))
        return self._hat

    def copy(self):
        return ScalarField(self.grid, self._values, copy=True)

    # -- pointwise arithmetic (results are new fields, never dealiased here) --

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid is not self.grid and other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other._values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self._values + self._coerce(other), copy=False)

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self._values - self._coerce(other), copy=False)

    def __rsub__(self, other):
        return ScalarField(self.grid, self._coerce(other) - self._values, copy=False)

    def __mul__(self, other):
        return ScalarField(self.grid, self._values * self._coerce(other), copy=False)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self._values / self._coerce(other), copy=False)

    def __rtruediv__(self, other):
        return ScalarField(self.grid, self._coerce(other) / self._values, copy=False)

    def __neg__(self):
        return ScalarField(self.grid, -self._values, copy=False)


class VectorField:
    """Pair of scalar components ``(x, y)`` on a shared grid."""

    __slots__ = ("x", "y")

    def __init__(self, x, y):
        if x.grid != y.grid:
            raise ValueError("vector components live on different grids")
        self.x = x
        self.y = y

    @classmethod
    def from_arrays(cls, grid, vx, vy, copy=True):
        return cls(ScalarField(grid, vx, copy=copy), ScalarField(grid, vy, copy=copy))

    @property
    def grid(self):
        return self.x.grid

    def copy(self):
        return VectorField(self.x.copy(), self.y.copy())

    def dot(self, other):
        return self.x * other.x + self.y * other.y

    def __add__(self, other):
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return VectorField(self.x - other.x, self.y - other.y)

    def __mul__(self, scalar):
        return VectorField(self.x * scalar, self.y * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(-self.x, -self.y)


# ---------------------------------------------------------------------------
# transforms and calculus
# ---------------------------------------------------------------------------

def transform_forward(field):
    """Spectral coefficients of a field (unnormalized forward DFT)."""
    return np.array(field.hat, copy=True)


def transform_backward(grid, coeffs):
    """Inverse of :func:`transform_forward`; imaginary residue is discarded."""
    coeffs = np.asarray(coeffs)
    if not np.isfinite(coeffs).all():
        raise NonFiniteFieldError("spectral coefficients contain non-finite values")
    return ScalarField.from_spectral(grid, coeffs)


def derivative(field, axis):
    """Spectral partial derivative along ``axis`` (0 or 1)."""
    g = field.grid
    mult = g.dx_mult if axis == 0 else g.dy_mult
    return ScalarField.from_spectral(g, mult * field.hat)


def gradient(field):
    return VectorField(derivative(field, 0), derivative(field, 1))


def divergence(v):
    g = v.grid
    return ScalarField.from_spectral(g, g.dx_mult * v.x.hat + g.dy_mult * v.y.hat)


def laplacian(field):
    g = field.grid
    return ScalarField.from_spectral(g, g.lap_mult * field.hat)


def perp(v):
    """Rotate a vector by +90 degrees: ``v_perp = (-v2, v1)``."""
    return VectorField(-v.y, v.x)


def perp_gradient(field):
    """``(-d2 s, d1 s)``; always divergence-free."""
    return VectorField(-derivative(field, 1), derivative(field, 0))


def curl(v):
    """Scalar vorticity ``d1 v2 - d2 v1``."""
    return derivative(v.y, 0) - derivative(v.x, 1)


def dealias(obj):
    """Zero all modes with ``|k_x|`` or ``|k_y|`` above ``n/3`` (idempotent)."""
    if isinstance(obj, VectorField):
        return VectorField(dealias(obj.x), dealias(obj.y))
    g = obj.grid
    return ScalarField.from_spectral(g, np.where(g.dealias_mask, obj.hat, 0.0))


def gradient_matrix_identity_check(v):
    """Max-norm residual of the matrix identity grad(v_perp) - perp_grad(v) = -curl(v) I.

    All four entries of ``grad(v_perp) - perp_grad(v) + curl(v) I`` are formed
    from spectral derivatives of the dealiased input; the return value is the
    largest absolute entry over the grid.  The off-diagonal entries equal
    ``+-div v``, so the residual is small only for solenoidal fields.
    """
    v = dealias(v)
    d1v1 = derivative(v.x, 0).values
    d1v2 = derivative(v.y, 0).values
    d2v1 = derivative(v.x, 1).values
    d2v2 = derivative(v.y, 1).values
    omega = d1v2 - d2v1
    r11 = -d1v2 + d2v1 + omega
    r12 = d1v1 + d2v2
    r21 = -d2v2 - d1v1
    r22 = d2v1 - d1v2 + omega
    return max(np.abs(r11).max(), np.abs(r12).max(), np.abs(r21).max(), np.abs(r22).max())


# ---------------------------------------------------------------------------
# norms and reductions
# ---------------------------------------------------------------------------

def l2_norm(obj):
    """Integral-normalized L2 norm of a scalar or vector field."""
    if isinstance(obj, VectorField):
        g = obj.grid
        s = np.sum(obj.x.values ** 2) + np.sum(obj.y.values ** 2)
        return float(np.sqrt(g.cell_area * s))
    g = obj.grid
    return float(np.sqrt(g.cell_area * np.sum(obj.values ** 2)))


def inner(a, b):
    """Integral-normalized L2 inner product of two scalar fields."""
    return float(a.grid.cell_area * np.sum(a.values * b.values))


def max_abs(obj):
    if isinstance(obj, VectorField):
        return max(np.abs(obj.x.values).max(), np.abs(obj.y.values).max())
    return float(np.abs(obj.values).max())


def mean(field):
    return float(field.values.mean())


# ---------------------------------------------------------------------------
# random field helpers (tests, randomized initial data)
# ---------------------------------------------------------------------------

def random_band_limited(grid, rng, kmax=None, rms=1.0, zero_mean=True):
    """Random smooth field with spectrum confined to ``|k|_inf <= kmax``.

    White noise is lowpass-filtered with a hard cutoff (default: the dealias
    band) and rescaled to the requested root-mean-square amplitude.
    """
    if kmax is None:
        kmax = grid.n / 3.0
    noise = rng.standard_normal((grid.n, grid.n))
    keep = np.abs(grid.k_int) <= kmax
    mask = keep[:, None] & keep[None, :]
    hat = np.where(mask, np.fft.fft2(noise), 0.0)
    if zero_mean:
        hat[0, 0] = 0.0
    vals = np.fft.ifft2(hat).real
    scale = np.sqrt(np.mean(vals ** 2))
    if scale > 0:
        vals *= rms / scale
    return ScalarField(grid, vals, copy=False)


def random_solenoidal(grid, rng, kmax=None, rms=1.0):
    """Random divergence-free vector field, built as a perp-gradient."""
    psi = random_band_limited(grid, rng, kmax=kmax, rms=1.0)
    v = perp_gradient(psi)
    scale = np.sqrt(np.mean(v.x.values ** 2 + v.y.values ** 2))
    if scale > 0:
        v = v * (rms / scale)
    return v


# ---------------------------------------------------------------------------
# binary snapshots

SNAPSHOT_MAGIC = 0x4F444446  # "ODDF"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<QQQdd")


@dataclass(frozen=True)
class Snapshot:
    """One stored time slice: density, velocity, optional pressure and
    carried effective velocity."""

    grid: Grid
    t: float
    rho: ScalarField
    u: VectorField
    pi: Optional[ScalarField] = None
    U: Optional[VectorField] = None


def write_snapshot(path, rho, u, t, pi=None, U=None):
    """Write fields to ``path`` in the binary snapshot layout.

    Planes are emitted in the documented order; ``pi`` and ``U`` are
    optional and independent, giving payloads of 3-6 planes.
    """
    grid = rho.grid
    if u.grid is not grid or (pi is not None and pi.grid is not grid) or (
        U is not None and U.grid is not grid
    ):
        raise ValueError("snapshot fields live on different grids")
    planes = [rho.values, u.x.values, u.y.values]
    if pi is not None:
        planes.append(pi.values)
    if U is not None:
        planes.extend([U.x.values, U.y.values])
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.n,
                              grid.length, float(t)))
        for plane in planes:
            fh.write(np.ascontiguousarray(plane, dtype="<f8").tobytes())


def read_snapshot(path):
    """Read a snapshot file, validating header and payload size exactly."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(f"snapshot header truncated in {path}")
    magic, version, n, length, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path} is not a snapshot file (bad magic)")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    payload = len(raw) - _HEADER.size
    plane_bytes = 8 * n * n
    if plane_bytes == 0 or payload % plane_bytes != 0:
        raise SnapshotFormatError(
            f"snapshot payload of {payload} bytes does not hold whole "
            f"{n}x{n} planes"
        )
    count = payload // plane_bytes
    if count not in (3, 4, 5, 6):
        raise SnapshotFormatError(
            f"snapshot holds {count} planes; expected 3-6 "
            "(rho, u_x, u_y [, pi] [, U_x, U_y])"
        )
    grid = Grid(n=int(n), length=float(length))
    planes = [
        np.frombuffer(raw, dtype="<f8", count=n * n,
                      offset=_HEADER.size + i * plane_bytes).reshape(n, n)
        for i in range(count)
    ]
    rho = ScalarField(grid, planes[0])
    u = VectorField.from_arrays(grid, planes[1], planes[2])
    pi = None
    U = None
    if count in (4, 6):
        pi = ScalarField(grid, planes[3])
    if count >= 5:
        U = VectorField.from_arrays(grid, planes[-2], planes[-1])
    return Snapshot(grid=grid, t=float(t), rho=rho, u=u, pi=pi, U=U)
