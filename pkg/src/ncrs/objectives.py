"""Synthetic ridge objectives with known intrinsic dimension.

An objective is f(x) = g(U x) (+ optional nuisance), where U is a
row-orthonormal (k, d) basis of the active subspace.  All structure that
matters happens in k dimensions; the remaining d - k directions are flat
(exactly, or up to a small bounded nuisance term).  Each objective carries
certified constants: a smoothness bound L_f and a lower bound on its
infimum, both used by schedules and parameter recipes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import RngStream, Subspace, gaussian_vector, random_subspace

INNER_KINDS = ("pure_quadratic", "quadratic_cosine", "bounded_well")


@dataclass(frozen=True)
class InnerFunction:
    """Low-dimensional inner function g applied to the active coordinates.

    Kinds:
      pure_quadratic    g(z) = 0.5 ||z||^2
      quadratic_cosine  g(z) = 0.5 ||z||^2 + a * sum_i cos(w z_i)
      bounded_well      g(z) = sum_i z_i^2 / (1 + z_i^2)
    """

    kind: str
    amplitude: float = 1.0  # quadratic_cosine only
    frequency: float = 3.0  # quadratic_cosine only

    def __post_init__(self):
        if self.kind not in INNER_KINDS:
            raise ValueError(f"unknown inner function kind {self.kind!r}")
        if self.kind == "quadratic_cosine":
            if self.amplitude < 0 or self.frequency <= 0:
                raise ValueError("quadratic_cosine needs amplitude >= 0, frequency > 0")

    def value(self, z: np.ndarray) -> np.ndarray | float:
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "pure_quadratic":
            out = 0.5 * np.sum(z * z, axis=-1)
        elif self.kind == "quadratic_cosine":
            out = 0.5 * np.sum(z * z, axis=-1) + self.amplitude * np.sum(
                np.cos(self.frequency * z), axis=-1
            )
        else:
            zz = z * z
            out = np.sum(zz / (1.0 + zz), axis=-1)
        return out if out.ndim else float(out)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "pure_quadratic":
            return z.copy()
        if self.kind == "quadratic_cosine":
            return z - self.amplitude * self.frequency * np.sin(self.frequency * z)
        return 2.0 * z / (1.0 + z * z) ** 2

    @property
    def smoothness(self) -> float:
        """Certified Lipschitz constant of the gradient."""
        if self.kind == "pure_quadratic":
            return 1.0
        if self.kind == "quadratic_cosine":
            return 1.0 + self.amplitude * self.frequency**2
        # sup |d^2/dz^2 (z^2/(1+z^2))| is attained at z = 0 and equals 2
        return 2.0

    def lower_bound(self, k: int) -> float:
        """Certified lower bound on inf g over R^k."""
        if self.kind == "quadratic_cosine":
            return -self.amplitude * k
        return 0.0


@dataclass(frozen=True)
class NuisanceSpec:
    """Small bounded perturbation supported off the active subspace.

    eta(x) = (tau / sqrt(m)) * sum_j sin(<w_j, x>) with orthonormal rows w_j
    spanning a subspace orthogonal to the active one.  Its gradient lies in
    span(w_j) and has norm at most tau everywhere (equality at x = 0).
    """

    subspace: Subspace
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")

    @property
    def dim(self) -> int:
        return self.subspace.dim

    def value(self, x: np.ndarray) -> np.ndarray | float:
        phases = np.asarray(x, dtype=np.float64) @ self.subspace.basis.T
        out = (self.tau / math.sqrt(self.dim)) * np.sum(np.sin(phases), axis=-1)
        return out if out.ndim else float(out)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        phases = np.asarray(x, dtype=np.float64) @ self.subspace.basis.T
        return (self.tau / math.sqrt(self.dim)) * (np.cos(phases) @ self.subspace.basis)


@dataclass(frozen=True)
class RidgeObjective:
    """f(x) = g(U x) + eta(x), with certified smoothness and lower bound."""

    active: Subspace
    inner: InnerFunction
    nuisance: NuisanceSpec | None = None

    def __post_init__(self):
        if self.nuisance is not None:
            if self.nuisance.subspace.ambient_dim != self.active.ambient_dim:
                raise ValueError("nuisance and active subspaces disagree on ambient dim")

    @property
    def ambient_dim(self) -> int:
        return self.active.ambient_dim

    @property
    def intrinsic_dim(self) -> int:
        return self.active.dim

    @property
    def smoothness(self) -> float:
        """Certified L_f: inner smoothness plus tau when a nuisance is present."""
        if self.nuisance is None:
            return self.inner.smoothness
        return self.inner.smoothness + self.nuisance.tau

    @property
    def lower_bound(self) -> float:
        """Certified lower bound on inf f."""
        low = self.inner.lower_bound(self.intrinsic_dim)
        if self.nuisance is not None:
            low -= self.nuisance.tau * math.sqrt(self.nuisance.dim)
        return low

    def value(self, x: np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.ambient_dim:
            raise ValueError(
                f"point has dimension {x.shape[-1]}, objective lives in "
                f"R^{self.ambient_dim}"
            )
        out = self.inner.value(self.active.coordinates(x))
        if self.nuisance is not None:
            out = out + self.nuisance.value(x)
        return out

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.ambient_dim:
            raise ValueError(
                f"point has dimension {x.shape[-1]}, objective lives in "
                f"R^{self.ambient_dim}"
            )
        grad = self.inner.gradient(self.active.coordinates(x)) @ self.active.basis
        if self.nuisance is not None:
            grad = grad + self.nuisance.gradient(x)
        return grad


def random_ridge_objective(
    rng: RngStream,
    d: int,
    k: int,
    inner: InnerFunction,
    tau: float = 0.0,
    nuisance_dim: int = 0,
    nuisance_rng: RngStream | None = None,
) -> RidgeObjective:
    """Draw a rotation-invariant active subspace and assemble the objective.

    tau > 0 requires nuisance_dim >= 1; the nuisance basis is drawn
    orthogonal to the active subspace (from nuisance_rng when given, so the
    active geometry is unchanged by toggling the nuisance).
    """
    active = random_subspace(rng, d, k)
    nuisance = None
    if tau > 0:
        if nuisance_dim < 1:
            raise ValueError("tau > 0 requires nuisance_dim >= 1")
        w_rng = nuisance_rng if nuisance_rng is not None else rng
        w = random_subspace(w_rng, d, nuisance_dim, orthogonal_to=active)
        nuisance = NuisanceSpec(subspace=w, tau=tau)
    elif nuisance_dim:
        raise ValueError("nuisance_dim > 0 requires tau > 0")
    return RidgeObjective(active=active, inner=inner, nuisance=nuisance)


def initial_point(
    objective: RidgeObjective, rng: RngStream, radius_scale: float = 3.0
) -> np.ndarray:
    """Uniform point on the sphere of radius radius_scale * sqrt(k) inside the
    active subspace.  Keeps the initial gap f(x1) - inf f of order k across k."""
    k = objective.intrinsic_dim
    z = gaussian_vector(rng, k)
    norm = float(np.linalg.norm(z))
    while norm < 1e-12:  # astronomically unlikely; keeps the direction well defined
        z = gaussian_vector(rng, k)
        norm = float(np.linalg.norm(z))
    radius = radius_scale * math.sqrt(k)
    return (radius / norm) * (z @ objective.active.basis)
