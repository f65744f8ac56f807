"""Euclidean projections onto boxes and products of simplices, and onto their
tangent cones."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

ACTIVE_TOL = 1e-10


def project_simplex(v) -> np.ndarray:
    """Project the rows of ``v`` onto the probability simplex (sort and threshold).

    Works along the last axis. Ties in the sort keep the original index order.
    """
    v = np.asarray(v, dtype=float)
    d = v.shape[-1]
    if v.ndim == 1:
        if d == 2:
            a = min(max((v[0] - v[1] + 1.0) / 2.0, 0.0), 1.0)
            return np.array([a, 1.0 - a])
        u = -np.sort(-v, kind="stable")
        css = np.cumsum(u) - 1.0
        rho = np.flatnonzero(u - css / np.arange(1, d + 1) > 0)[-1]
        return np.maximum(v - css[rho] / (rho + 1), 0.0)
    order = np.argsort(-v, axis=-1, kind="stable")
    u = np.take_along_axis(v, order, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    j = np.arange(1, d + 1)
    cond = u - css / j > 0
    rho = d - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(v - theta, 0.0)


def project_simplex_tangent(x, v, tol: float = ACTIVE_TOL) -> np.ndarray:
    """Project ``v`` onto the tangent cone of the simplex at ``x``.

    The cone is ``{z : sum(z) = 0, z_j >= 0 where x_j = 0}``. The minimizer
    has the form ``z_j = v_j - mu`` on free coordinates and
    ``max(v_j - mu, 0)`` on active ones, with ``mu`` the root of a
    decreasing piecewise-linear function.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    active = x <= tol
    if not active.any():
        return v - v.mean()
    free = ~active
    if not free.any():
        raise ValueError("point is not on the simplex")
    vf = v[free]
    va = np.sort(v[active])[::-1]
    # g(mu) = sum(vf) - |F| mu + sum_k max(va_k - mu, 0); try each number of
    # positive active terms k and keep the consistent root.
    nf = vf.size
    prefix = np.concatenate([[0.0], np.cumsum(va)])
    mu = None
    for k in range(va.size + 1):
        cand = (vf.sum() + prefix[k]) / (nf + k)
        upper_ok = k == 0 or va[k - 1] > cand
        lower_ok = k == va.size or va[k] <= cand
        if upper_ok and lower_ok:
            mu = cand
            break
    if mu is None:  # pragma: no cover - the root always exists
        raise RuntimeError("tangent cone projection failed")
    z = np.empty_like(v)
    z[free] = vf - mu
    z[active] = np.maximum(v[active] - mu, 0.0)
    return z


@dataclass(frozen=True)
class FeasibleSet:
    """A box or a product of probability simplices."""

    kind: str
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sizes: tuple[int, ...] = ()

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if np.any(lower > upper):
            raise ValueError("box is empty")
        return cls("box", lower, upper, ())

    @classmethod
    def simplex_product(cls, sizes) -> "FeasibleSet":
        sizes = tuple(int(d) for d in sizes)
        if not sizes or min(sizes) < 1:
            raise ValueError("simplex sizes must be positive")
        return cls("simplex_product", None, None, sizes)

    @property
    def dim(self) -> int:
        return self.lower.size if self.kind == "box" else sum(self.sizes)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)

    @cached_property
    def slices(self) -> list[slice]:
        off = self.offsets
        return [slice(int(lo), int(hi)) for lo, hi in zip(off[:-1], off[1:])]

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.dim,):
            raise ValueError(f"expected dimension {self.dim}, got shape {v.shape}")
        return v

    def project(self, v) -> np.ndarray:
        v = self._check(v)
        if self.kind == "box":
            return np.clip(v, self.lower, self.upper)
        if v.ndim == 1:
            out = np.empty(v.size)
            for sl in self.slices:
                out[sl] = project_simplex(v[sl])
            return out
        return np.concatenate([project_simplex(v[..., sl]) for sl in self.slices], axis=-1)

    def contains(self, x, tol: float = 1e-9):
        x = self._check(x)
        if self.kind == "box":
            return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        off = self.offsets
        ok = np.all(x >= -tol, axis=-1) & np.all(x <= 1 + tol, axis=-1)
        for lo, hi in zip(off[:-1], off[1:]):
            ok &= np.abs(x[..., lo:hi].sum(axis=-1) - 1.0) <= tol
        return ok

    def active_constraints(self, x, tol: float = ACTIVE_TOL) -> list[tuple[int, str]]:
        """Tight inequality constraints at ``x`` as ``(coordinate, side)`` pairs."""
        x = self._check(x)
        if self.kind == "box":
            out = [(j, "lower") for j in np.flatnonzero(x - self.lower <= tol)]
            out += [(j, "upper") for j in np.flatnonzero(self.upper - x <= tol)]
            return sorted(out)
        return [(j, "lower") for j in np.flatnonzero(x <= tol)]

    def is_interior(self, x, tol: float = ACTIVE_TOL) -> bool:
        return not self.active_constraints(x, tol)

    def project_tangent_cone(self, x, v, tol: float = ACTIVE_TOL) -> np.ndarray:
        x = self._check(x)
        v = self._check(v)
        if not self.contains(x, tol=1e-9):
            raise ValueError("base point is not feasible")
        if self.kind == "box":
            z = v.copy()
            at_lo = x - self.lower <= tol
            at_hi = self.upper - x <= tol
            z[at_lo] = np.maximum(z[at_lo], 0.0)
            z[at_hi] = np.minimum(z[at_hi], 0.0)
            return z
        off = self.offsets
        return np.concatenate([
            project_simplex_tangent(x[lo:hi], v[lo:hi], tol) for lo, hi in zip(off[:-1], off[1:])
        ])

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal basis of the directions that keep every block sum fixed."""
        if self.kind == "box":
            return np.eye(self.dim)
        cols = []
        off = self.offsets
        for lo, d in zip(off[:-1], self.sizes):
            if d == 1:
                continue
            # orthonormal complement of the ones vector within this block
            q, _ = np.linalg.qr(np.column_stack([np.ones(d), np.eye(d)[:, : d - 1]]))
            for k in range(1, d):
                col = np.zeros(self.dim)
                col[lo:lo + d] = q[:, k]
                cols.append(col)
        return np.column_stack(cols) if cols else np.zeros((self.dim, 0))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform samples (Dirichlet(1) per simplex block)."""
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper, size=(n, self.dim))
        return np.concatenate([rng.dirichlet(np.ones(d), size=n) for d in self.sizes], axis=-1)

    def center(self) -> np.ndarray:
        if self.kind == "box":
            return (self.lower + self.upper) / 2
        return np.concatenate([np.full(d, 1.0 / d) for d in self.sizes])

    def vertices_per_block(self) -> list[np.ndarray]:
        return [np.eye(d) for d in self.sizes]


def project(feasible: FeasibleSet, v) -> np.ndarray:
    return feasible.project(v)


def project_tangent_cone(feasible: FeasibleSet, x, v) -> np.ndarray:
    return feasible.project_tangent_cone(x, v)
