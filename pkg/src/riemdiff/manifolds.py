"""Manifold primitives: points, tangent vectors, and three concrete geometries.

Every other module is written against the small surface defined here:
exponential map, logarithm map, geodesic distance, tangent inner product, and
tangent projection, on

* ``Euclidean(d)``   -- flat R^d, the sanity-check geometry,
* ``Sphere(d)``      -- unit sphere S^d embedded in R^{d+1}, curvature 1,
* ``Grassmann(d,p)`` -- p-dim subspaces of R^d as orthonormal d x p
  representatives with the canonical metric, curvature in [0, 2].

Points and tangent vectors are immutable value objects.  All operations are
pure.  Each manifold also exposes ``*_many`` array kernels operating on
stacked coordinates; the scalar API wraps them, and the simulator uses them
directly so that one iteration over n agents costs a handful of batched
linear-algebra calls instead of n Python round trips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ManifoldError", "BaseMismatch", "InjectivityViolation", "CutLocus",
    "DimensionMismatch", "DomainTooLarge",
    "Point", "TangentVector", "ManifoldSpec", "Manifold",
    "Euclidean", "Sphere", "Grassmann",
    "euclidean_spec", "sphere_spec", "grassmann_spec", "make_manifold",
    "sample_ball_point",
]


class ManifoldError(Exception):
    """Base class for geometric failures."""


class BaseMismatch(ManifoldError):
    """Tangent vector used at a point other than its base."""


class InjectivityViolation(ManifoldError):
    """Tangent vector norm at or beyond the injectivity radius."""


class CutLocus(ManifoldError):
    """Logarithm requested across (or numerically at) the cut locus."""


class DimensionMismatch(ManifoldError):
    """Array shape incompatible with the manifold's point shape."""


class DomainTooLarge(ManifoldError):
    """Configured diameter violates the curvature cap D < pi/(2 sqrt(K_max))."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Point:
    """Immutable manifold element: coordinates plus the owning manifold's id."""

    manifold_id: str
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _readonly(self.coords))


@dataclass(frozen=True)
class TangentVector:
    """Immutable tangent element at ``base``; same coordinate shape as the base."""

    base: Point
    vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vec", _readonly(self.vec))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))


@dataclass(frozen=True)
class ManifoldSpec:
    """Geometry descriptor: kind/dimensions, curvature range, injectivity, diameter cap.

    ``D`` is the user-configured diameter of the working domain (a geodesic
    ball); all comparison constants downstream are functions of
    (K_min, K_max, D).
    """

    kind: str            # "euclidean" | "sphere" | "grassmann"
    d: int
    p: int               # grassmann subspace dimension; 0 otherwise
    K_min: float
    K_max: float
    inj: float
    D: float

    def __post_init__(self):
        if self.kind not in ("euclidean", "sphere", "grassmann"):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.K_min > self.K_max:
            raise ValueError("K_min must not exceed K_max")
        if not self.D > 0:
            raise ValueError("diameter cap D must be positive")
        if not self.D < self.inj:
            raise ValueError("diameter cap D must be below the injectivity radius")
        if self.K_max > 0 and not self.D < math.pi / (2.0 * math.sqrt(self.K_max)):
            raise DomainTooLarge(
                f"D={self.D} must be < pi/(2 sqrt(K_max))={math.pi / (2 * math.sqrt(self.K_max)):.6f}"
            )

    @property
    def manifold_id(self) -> str:
        if self.kind == "grassmann":
            return f"grassmann({self.d},{self.p})"
        return f"{self.kind}({self.d})"


def euclidean_spec(d: int, D: float = 2.0) -> ManifoldSpec:
    return ManifoldSpec("euclidean", d, 0, 0.0, 0.0, math.inf, D)


def sphere_spec(d: int, D: float = math.pi / 4) -> ManifoldSpec:
    return ManifoldSpec("sphere", d, 0, 1.0, 1.0, math.pi, D)


def grassmann_spec(d: int, p: int, D: float = 1.1) -> ManifoldSpec:
    # Canonical-metric curvature range [0, 2]; injectivity radius pi/2.
    if not 1 <= p < d:
        raise ValueError("grassmann requires 1 <= p < d")
    return ManifoldSpec("grassmann", d, p, 0.0, 2.0, math.pi / 2, D)


class Manifold:
    """Shared scalar API; subclasses provide the array kernels."""

    spec: ManifoldSpec
    point_shape: tuple[int, ...]

    def __init__(self, spec: ManifoldSpec):
        self.spec = spec

    # -- array kernels (leading axes are batch) -------------------------------

    def exp_many(self, X: np.ndarray, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_many(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dist_many(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project_many(self, X: np.ndarray, W: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_point_coords(self, coords: np.ndarray) -> None:
        """Raise if coords violate the Point invariants of this manifold."""
        raise NotImplementedError

    # -- scalar API ------------------------------------------------------------

    @property
    def manifold_id(self) -> str:
        return self.spec.manifold_id

    def point(self, coords: np.ndarray) -> Point:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != self.point_shape:
            raise DimensionMismatch(
                f"expected coords of shape {self.point_shape}, got {coords.shape}")
        self.check_point_coords(coords)
        return Point(self.manifold_id, coords)

    def tangent(self, base: Point, vec: np.ndarray) -> TangentVector:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != self.point_shape:
            raise DimensionMismatch(
                f"expected tangent of shape {self.point_shape}, got {vec.shape}")
        return TangentVector(base, vec)

    def _require_same_point(self, x: Point, base: Point) -> None:
        if base.manifold_id != x.manifold_id or not np.array_equal(base.coords, x.coords):
            raise BaseMismatch("tangent vector base differs from the given point")

    def exp(self, x: Point, v: TangentVector) -> Point:
        self._require_same_point(x, v.base)
        n = float(np.linalg.norm(v.vec))
        if n >= self.spec.inj:
            raise InjectivityViolation(
                f"|v|={n:.6g} >= injectivity radius {self.spec.inj:.6g}")
        y = self.exp_many(x.coords[None], v.vec[None])[0]
        return Point(self.manifold_id, y)

    def log(self, x: Point, y: Point) -> TangentVector:
        if x.manifold_id != y.manifold_id:
            raise DimensionMismatch("log across different manifolds")
        v = self.log_many(x.coords[None], y.coords[None])[0]
        return TangentVector(x, v)

    def dist(self, x: Point, y: Point) -> float:
        if x.manifold_id != y.manifold_id:
            raise DimensionMismatch("dist across different manifolds")
        return float(self.dist_many(x.coords[None], y.coords[None])[0])

    def inner(self, x: Point, u: TangentVector, v: TangentVector) -> float:
        self._require_same_point(x, u.base)
        self._require_same_point(x, v.base)
        return float(np.sum(u.vec * v.vec))

    def project_tangent(self, x: Point, w: np.ndarray) -> TangentVector:
        w = np.asarray(w, dtype=float)
        if w.shape != self.point_shape:
            raise DimensionMismatch(
                f"expected shape {self.point_shape}, got {w.shape}")
        return TangentVector(x, self.project_many(x.coords[None], w[None])[0])

    def random_point(self, rng: np.random.Generator) -> Point:
        return Point(self.manifold_id, self._random_point_coords(rng))

    def random_tangent(self, x: Point, norm: float,
                       rng: np.random.Generator) -> TangentVector:
        if norm == 0.0:
            return TangentVector(x, np.zeros(self.point_shape))
        w = rng.standard_normal(self.point_shape)
        v = self.project_many(x.coords[None], w[None])[0]
        n = np.linalg.norm(v)
        if n == 0.0:  # measure-zero degenerate draw
            return self.random_tangent(x, norm, rng)
        return TangentVector(x, v * (norm / n))

    def _random_point_coords(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class Euclidean(Manifold):
    """Flat R^d; every map is affine arithmetic."""

    def __init__(self, spec: ManifoldSpec):
        super().__init__(spec)
        self.point_shape = (spec.d,)

    def check_point_coords(self, coords: np.ndarray) -> None:
        if not np.all(np.isfinite(coords)):
            raise ValueError("non-finite coordinates")

    def exp_many(self, X, V):
        return X + V

    def log_many(self, X, Y):
        return Y - X

    def dist_many(self, X, Y):
        return np.linalg.norm(Y - X, axis=-1)

    def project_many(self, X, W):
        return np.array(W, dtype=float, copy=True)

    def _random_point_coords(self, rng):
        return rng.standard_normal(self.point_shape)


class Sphere(Manifold):
    """Unit sphere S^d in R^{d+1} with the round metric (curvature 1).

    Closed forms: exp_x(v) = cos|v| x + sin|v| v/|v|; log via the angle
    theta = atan2(|y - <x,y>x|, <x,y>), which stays accurate for nearby points
    where arccos loses half the significant digits.
    """

    ANTIPODAL_TOL = 1e-12

    def __init__(self, spec: ManifoldSpec):
        super().__init__(spec)
        self.point_shape = (spec.d + 1,)

    def check_point_coords(self, coords: np.ndarray) -> None:
        n = np.linalg.norm(coords)
        if abs(n - 1.0) > 1e-10:
            raise ValueError(f"sphere point norm {n} differs from 1 by more than 1e-10")

    def exp_many(self, X, V):
        n = np.linalg.norm(V, axis=-1, keepdims=True)
        if np.any(n >= self.spec.inj):
            raise InjectivityViolation("tangent norm at or beyond pi")
        y = np.cos(n) * X + np.sinc(n / np.pi) * V
        return y / np.linalg.norm(y, axis=-1, keepdims=True)

    def log_many(self, X, Y):
        dot = np.sum(X * Y, axis=-1, keepdims=True)
        bad = dot < -1.0 + self.ANTIPODAL_TOL
        if np.any(bad):
            raise CutLocus(f"antipodal pair at batch index {int(np.argmax(bad))}")
        U = Y - dot * X
        nu = np.linalg.norm(U, axis=-1, keepdims=True)
        theta = np.arctan2(nu, dot)
        with np.errstate(invalid="ignore", divide="ignore"):
            V = np.where(nu > 0.0, (theta / nu) * U, 0.0)
        return V

    def dist_many(self, X, Y):
        dot = np.sum(X * Y, axis=-1)
        perp = np.linalg.norm(Y - dot[..., None] * X, axis=-1)
        return np.arctan2(perp, dot)

    def project_many(self, X, W):
        return W - np.sum(X * W, axis=-1, keepdims=True) * X

    def _random_point_coords(self, rng):
        g = rng.standard_normal(self.point_shape)
        return g / np.linalg.norm(g)


class Grassmann(Manifold):
    """Grassmann manifold G(d, p) of p-dim subspaces of R^d, canonical metric.

    Points are orthonormal d x p representatives; the tangent space at X is
    {V : X^T V = 0}.  Geodesics follow the thin-SVD closed form: for
    V = U diag(s) W^T,

        exp_X(V) = X W cos(s) W^T + U sin(s) W^T,

    and the log comes from the SVD of (I - X X^T) Y (X^T Y)^{-1} with the
    principal angles arctan of its singular values.  Both are invariant under
    the choice of representative of the target subspace.
    """

    CUT_TOL = 1e-6        # principal angle within this of pi/2 is a cut-locus failure
    ORTHO_DRIFT = 1e-12   # re-orthonormalize exp output beyond this drift

    def __init__(self, spec: ManifoldSpec):
        super().__init__(spec)
        self.point_shape = (spec.d, spec.p)

    def check_point_coords(self, coords: np.ndarray) -> None:
        gram = coords.T @ coords
        err = np.max(np.abs(gram - np.eye(self.spec.p)))
        if err > 1e-10:
            raise ValueError(f"grassmann representative not orthonormal (drift {err:.3g})")

    @staticmethod
    def _polar(Y):
        U, _, Vt = np.linalg.svd(Y, full_matrices=False)
        return U @ Vt

    def exp_many(self, X, V):
        n = np.linalg.norm(V, axis=(-2, -1))
        if np.any(n >= self.spec.inj):
            raise InjectivityViolation("tangent norm at or beyond pi/2")
        U, S, Wt = np.linalg.svd(V, full_matrices=False)
        W = np.swapaxes(Wt, -2, -1)
        cos = np.cos(S)[..., None, :]
        sin = np.sin(S)[..., None, :]
        Y = (X @ W * cos + U * sin) @ Wt
        gram = np.swapaxes(Y, -2, -1) @ Y
        drift = np.abs(gram - np.eye(self.spec.p))
        if np.max(drift) > self.ORTHO_DRIFT:
            Y = self._polar(Y)
        return Y

    def log_many(self, X, Y):
        M = np.swapaxes(X, -2, -1) @ Y
        sv = np.linalg.svd(M, compute_uv=False)
        # cos(theta) of the largest principal angle is the smallest singular value
        limit = math.sin(self.CUT_TOL)  # cos(pi/2 - CUT_TOL)
        bad = sv[..., -1] < limit
        if np.any(bad):
            raise CutLocus(
                f"principal angle within {self.CUT_TOL} of pi/2 at batch index "
                f"{int(np.argmax(bad))}")
        A = Y - X @ M
        L = np.swapaxes(np.linalg.solve(np.swapaxes(M, -2, -1), np.swapaxes(A, -2, -1)),
                        -2, -1)
        U, S, Wt = np.linalg.svd(L, full_matrices=False)
        return (U * np.arctan(S)[..., None, :]) @ Wt

    def dist_many(self, X, Y):
        M = np.swapaxes(X, -2, -1) @ Y
        sv = np.clip(np.linalg.svd(M, compute_uv=False), -1.0, 1.0)
        theta_cos = np.arccos(sv)                       # ascending angles
        # arccos loses half the digits near theta = 0; the residual's singular
        # values are sin(theta) exactly, so small angles come from arcsin
        sp = np.clip(np.linalg.svd(Y - X @ M, compute_uv=False), 0.0, 1.0)
        theta_sin = np.arcsin(sp[..., ::-1])            # reorder to ascending
        theta = np.where(theta_cos < np.pi / 4, theta_sin, theta_cos)
        return np.linalg.norm(theta, axis=-1)

    def project_many(self, X, W):
        return W - X @ (np.swapaxes(X, -2, -1) @ W)

    def _random_point_coords(self, rng):
        g = rng.standard_normal(self.point_shape)
        q, _ = np.linalg.qr(g)
        return q


def make_manifold(spec: ManifoldSpec) -> Manifold:
    return {"euclidean": Euclidean, "sphere": Sphere, "grassmann": Grassmann}[spec.kind](spec)


def sample_ball_point(man: Manifold, center: Point, radius: float,
                      rng: np.random.Generator) -> Point:
    """Point at distance uniform(0, radius) from ``center`` in a uniform tangent direction."""
    r = radius * float(rng.uniform())
    if r == 0.0:
        return center
    return man.exp(center, man.random_tangent(center, r, rng))
