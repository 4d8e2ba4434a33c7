"""
Gaussian-wavelet multiresolution families and their basis/derivative matrices.

A family member (j, k) is psi_{j,k}(x) = 2**(j/2) * psi(2**j x - k) with the
Gaussian wavelet psi(x) = -x exp(-x**2 / 2). For every scale j in the
resolution set, k runs over floor(a 2**(j+1)) .. ceil(b 2**(j+1)).

Two-dimensional families are full tensor products. Their basis matrices are
stored in factored form (one per-axis matrix per derivative order); the
matrix-vector products never materialize the n_points x n_members matrix,
but ``BasisMatrices.dense`` will build it on request.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

MAX_ORDER = 2


def gaussian_wavelet(x, order: int = 0):
    """psi(x) = -x exp(-x^2/2) and its first two derivatives."""
    x = np.asarray(x, dtype=np.float64)
    g = np.exp(-0.5 * x * x)
    if order == 0:
        out = -x * g
    elif order == 1:
        out = (x * x - 1.0) * g
    elif order == 2:
        out = x * (3.0 - x * x) * g
    else:
        raise ConfigurationError(f"wavelet derivative order must be 0, 1 or 2, got {order!r}")
    return float(out) if out.ndim == 0 else out


def resolution_range(lo: int, hi: int) -> tuple[int, ...]:
    """Contiguous resolution set {lo, lo+1, ..., hi}."""
    return tuple(range(int(lo), int(hi) + 1))


@dataclass(frozen=True)
class WaveletFamily1D:
    domain: tuple[float, float]
    resolutions: tuple[int, ...]
    members: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def scales(self) -> np.ndarray:
        return np.array([j for j, _ in self.members], dtype=np.float64)

    @property
    def translations(self) -> np.ndarray:
        return np.array([k for _, k in self.members], dtype=np.float64)

    def descriptor(self) -> dict:
        return {"domain": list(self.domain), "resolutions": list(self.resolutions)}


@dataclass(frozen=True)
class WaveletFamily2D:
    x_family: WaveletFamily1D
    y_family: WaveletFamily1D

    @property
    def size(self) -> int:
        return self.x_family.size * self.y_family.size

    @property
    def members(self) -> list[tuple[int, int, int, int]]:
        # x-member is the outer index: member m = mx * ny + my
        return [(jx, kx, jy, ky) for jx, kx in self.x_family.members for jy, ky in self.y_family.members]

    @property
    def shape(self) -> tuple[int, int]:
        return self.x_family.size, self.y_family.size

    def descriptor(self) -> dict:
        return {"x": self.x_family.descriptor(), "y": self.y_family.descriptor()}


def translation_range(a: float, b: float, j: int) -> range:
    scale = 2.0 ** (j + 1)
    return range(math.floor(a * scale), math.ceil(b * scale) + 1)


def build_family_1d(domain, resolutions) -> WaveletFamily1D:
    a, b = float(domain[0]), float(domain[1])
    if not a < b:
        raise ConfigurationError(f"domain must satisfy a < b, got [{a}, {b}]")
    res = tuple(int(j) for j in resolutions)
    if not res:
        raise ConfigurationError("resolution set must not be empty")
    if any(r2 <= r1 for r1, r2 in zip(res, res[1:])):
        raise ConfigurationError(f"resolution set must be strictly increasing, got {list(res)}")
    members = tuple((j, k) for j in res for k in translation_range(a, b, j))
    return WaveletFamily1D((a, b), res, members)


def build_family_2d(x_domain, x_resolutions, y_domain, y_resolutions) -> WaveletFamily2D:
    return WaveletFamily2D(build_family_1d(x_domain, x_resolutions), build_family_1d(y_domain, y_resolutions))


def evaluate_1d(family: WaveletFamily1D, x, order: int = 0) -> np.ndarray:
    """Matrix [len(x), family.size] of d^order/dx^order psi_{j,k}(x)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    j, k = family.scales, family.translations
    scale = 2.0**j
    arg = scale[None, :] * x[:, None] - k[None, :]
    return (2.0 ** (j / 2) * scale**order)[None, :] * gaussian_wavelet(arg, order)


def _normalize_orders(orders, ndim):
    out = []
    for o in orders:
        o = (o,) if np.isscalar(o) else tuple(o)
        if len(o) != ndim:
            raise ConfigurationError(f"derivative order {o} does not match a {ndim}-D family")
        if any(d < 0 or d > MAX_ORDER for d in o):
            raise ConfigurationError(f"derivative order {o} unsupported; at most {MAX_ORDER} per dimension")
        out.append(tuple(int(d) for d in o))
    return tuple(dict.fromkeys(out))


class BasisMatrices:
    """Basis values and derivatives of a wavelet family at a fixed point set.

    For a 2-D family the matrix of order (dx, dy) has entries
    Px[i, mx] * Py[i, my] at column mx * ny + my, where Px and Py are the
    per-axis derivative matrices (chain-rule factors included).
    """

    def __init__(self, family, points, orders, truncate=None):
        self.family = family
        self.ndim = 2 if isinstance(family, WaveletFamily2D) else 1
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[1] != self.ndim:
            raise ConfigurationError(f"points have {pts.shape[1]} coordinates, family is {self.ndim}-D")
        self.points = pts
        self.orders = _normalize_orders(orders, self.ndim)
        self.truncate = truncate
        axes = (family.x_family, family.y_family) if self.ndim == 2 else (family,)
        self.factors = {}
        for dim, fam in enumerate(axes):
            for d in sorted({o[dim] for o in self.orders}):
                mat = evaluate_1d(fam, pts[:, dim], d)
                if truncate:
                    mat[np.abs(mat) < truncate] = 0.0
                self.factors[dim, d] = mat

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_members(self) -> int:
        return self.family.size

    def _order(self, order):
        o = (order,) if np.isscalar(order) else tuple(order)
        if o not in self.orders:
            raise ConfigurationError(f"derivative order {o} was not precomputed (have {list(self.orders)})")
        return o

    def dense(self, order=None) -> np.ndarray:
        o = self._order(order if order is not None else (0,) * self.ndim)
        if self.ndim == 1:
            return self.factors[0, o[0]].copy()
        px, py = self.factors[0, o[0]], self.factors[1, o[1]]
        return (px[:, :, None] * py[:, None, :]).reshape(self.n_points, -1)

    def matvec(self, order, c) -> np.ndarray:
        """Basis matrix of ``order`` times the coefficient vector ``c``."""
        o = self._order(order)
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (self.n_members,):
            raise ConfigurationError(f"coefficient vector has shape {c.shape}, expected ({self.n_members},)")
        if self.ndim == 1:
            return self.factors[0, o[0]] @ c
        px, py = self.factors[0, o[0]], self.factors[1, o[1]]
        return np.einsum("ij,ij->i", px @ c.reshape(self.family.shape), py)

    def rmatvec(self, order, w) -> np.ndarray:
        """Transposed product: basis matrix^T times a per-point vector ``w``."""
        o = self._order(order)
        w = np.asarray(w, dtype=np.float64)
        if self.ndim == 1:
            return self.factors[0, o[0]].T @ w
        px, py = self.factors[0, o[0]], self.factors[1, o[1]]
        return ((px * w[:, None]).T @ py).reshape(-1)

    def matmat(self, order, mat) -> np.ndarray:
        """Basis matrix times each column of ``mat`` (n_members x q)."""
        return np.stack([self.matvec(order, mat[:, q]) for q in range(mat.shape[1])], axis=1)

    def rowwise(self, order, coeffs) -> np.ndarray:
        """sum_m coeffs[i, m] * Basis[i, m] for per-point coefficient rows."""
        o = self._order(order)
        if self.ndim == 1:
            return np.einsum("im,im->i", self.factors[0, o[0]], coeffs)
        px, py = self.factors[0, o[0]], self.factors[1, o[1]]
        c = coeffs.reshape((-1,) + self.family.shape)
        return np.einsum("ia,iab,ib->i", px, c, py)

    def cache_key(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.family.descriptor()).encode())
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(repr(self.orders).encode())
        h.update(repr(self.truncate).encode())
        return h.hexdigest()


def basis_matrices(family, points, orders, truncate=None, cache_dir=None) -> BasisMatrices:
    """Precompute basis matrices; optionally reuse an exact-match on-disk cache."""
    if cache_dir is None:
        return BasisMatrices(family, points, orders, truncate)
    return BasisCache(cache_dir).get(family, points, orders, truncate)


class BasisCache:
    """Binary ``.npz`` cache of basis factors keyed by family, points and orders.

    A hit requires identical family descriptor, point bytes, orders and
    truncation; anything else is a miss and gets recomputed.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def get(self, family, points, orders, truncate=None) -> BasisMatrices:
        probe = BasisMatrices.__new__(BasisMatrices)
        probe.family = family
        probe.points = np.asarray(points, dtype=np.float64)
        if probe.points.ndim == 1:
            probe.points = probe.points[:, None]
        probe.ndim = 2 if isinstance(family, WaveletFamily2D) else 1
        probe.orders = _normalize_orders(orders, probe.ndim)
        probe.truncate = truncate
        path = self.directory / f"{probe.cache_key()}.npz"
        if path.exists():
            with np.load(path) as data:
                probe.factors = {tuple(int(v) for v in key.split("_")): data[key] for key in data.files}
            return probe
        basis = BasisMatrices(family, points, orders, truncate)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, **{f"{dim}_{d}": mat for (dim, d), mat in basis.factors.items()})
        tmp.replace(path)
        return basis
