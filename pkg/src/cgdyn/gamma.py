"""Geometry of underlying Bloch vectors ("gamma-space") under a coarse graining.

With psi(gamma) = 1/D + 1/2 sum_m gamma_m sigma_m the effective Bloch vector is
affine in gamma::

    alpha_k(gamma) = offset_k + <v_k, gamma>,
    (v_k)_m  = 1/2 Tr[L(sigma_m) sigma_k],   offset_k = Tr[L(1/D) sigma_k].

Each alpha_k = const is a hyperplane with normal v_k. Moving gamma inside the
span of the normals changes the effective state but keeps the effective map;
moving it orthogonally to that span keeps the effective state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel, apply
from .states import PSD_FLOOR, GellMannBasis, bloch_vector, min_eigenvalue, operator_from_bloch

MEMBER_TOL = 1e-9
MIN_STEP = 1e-8
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class HyperplaneSystem:
    normals: np.ndarray  # shape (d^2 - 1, D^2 - 1)
    offsets: np.ndarray
    basisD: GellMannBasis
    basisd: GellMannBasis

    @property
    def ambient_dim(self) -> int:
        return self.normals.shape[1]

    def gram(self) -> np.ndarray:
        return self.normals @ self.normals.T

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.normals, tol=RANK_TOL))

    def parallel_basis(self) -> np.ndarray:
        """Orthonormal rows spanning the orthogonal complement of the normals."""
        _, s, vh = np.linalg.svd(self.normals)
        r = int(np.count_nonzero(s > RANK_TOL))
        return vh[r:]

    def normal_basis(self) -> np.ndarray:
        _, s, vh = np.linalg.svd(self.normals)
        r = int(np.count_nonzero(s > RANK_TOL))
        return vh[:r]


def hyperplanes(ch: KrausChannel, basisD: GellMannBasis, basisd: GellMannBasis) -> HyperplaneSystem:
    if basisD.dim != ch.in_dim or basisd.dim != ch.out_dim:
        raise ValueError("basis dimensions do not match the channel")
    images = np.array([apply(ch, s) for s in basisD.elements])
    # N[k, m] = Tr[L(sigma_m) sigma_k] / 2
    normals = 0.5 * np.einsum("mij,kji->km", images, basisd.elements).real
    offsets = bloch_vector(apply(ch, np.eye(ch.in_dim) / ch.in_dim), basisd)
    return HyperplaneSystem(normals, offsets, basisD, basisd)


def effective_state_from_gamma(sys: HyperplaneSystem, gamma) -> np.ndarray:
    return sys.offsets + sys.normals @ np.asarray(gamma, dtype=float)


@dataclass(frozen=True)
class Move:
    gamma: np.ndarray
    min_eig: float

    @property
    def psd_ok(self) -> bool:
        return self.min_eig >= PSD_FLOOR


def underlying_min_eig(sys: HyperplaneSystem, gamma) -> float:
    return min_eigenvalue(operator_from_bloch(gamma, sys.basisD))


def perpendicular_move(sys: HyperplaneSystem, gamma0, coeffs) -> Move:
    """gamma0 + sum_k c_k v_k; the underlying operator may fail to be a state."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (sys.normals.shape[0],):
        raise ValueError(f"need {sys.normals.shape[0]} coefficients, got {c.size}")
    g = np.asarray(gamma0, dtype=float) + c @ sys.normals
    return Move(g, underlying_min_eig(sys, g))


def parallel_move(sys: HyperplaneSystem, gamma0, direction, step: float) -> Move:
    """Step along the part of ``direction`` orthogonal to every normal."""
    direction = np.asarray(direction, dtype=float)
    P = sys.parallel_basis()
    proj = P.T @ (P @ direction)
    n = np.linalg.norm(proj)
    if n <= RANK_TOL * max(1.0, np.linalg.norm(direction)):
        raise ValueError("direction lies inside the span of the normals")
    g = np.asarray(gamma0, dtype=float) + step * proj / n
    return Move(g, underlying_min_eig(sys, g))


@dataclass(frozen=True)
class Membership:
    member: bool
    residual: float
    psd_ok: bool
    coeffs: np.ndarray


def in_domain(sys: HyperplaneSystem, gamma0, gamma_query, tol: float = MEMBER_TOL) -> Membership:
    delta = np.asarray(gamma_query, dtype=float) - np.asarray(gamma0, dtype=float)
    coeffs, *_ = np.linalg.lstsq(sys.normals.T, delta, rcond=None)
    residual = float(np.linalg.norm(sys.normals.T @ coeffs - delta))
    psd_ok = underlying_min_eig(sys, gamma_query) >= PSD_FLOOR
    return Membership(residual < tol and psd_ok, residual, psd_ok, coeffs)


def max_feasible_step(sys: HyperplaneSystem, gamma0, direction, hi: float = 4.0, iters: int = 60) -> float:
    """Largest t in [0, hi] with psi(gamma0 + t * direction) PSD, by bisection.

    The feasible set along a line is an interval containing 0 when gamma0 is a
    state, so bisection on the PSD predicate is exact up to resolution.
    """
    g0 = np.asarray(gamma0, dtype=float)
    direction = np.asarray(direction, dtype=float)

    def ok(t):
        return underlying_min_eig(sys, g0 + t * direction) >= PSD_FLOOR

    if ok(hi):
        return hi
    if not ok(MIN_STEP):
        return 0.0
    lo = MIN_STEP
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def sample_member(sys: HyperplaneSystem, gamma0, rng, attempts: int = 50) -> tuple[np.ndarray, np.ndarray] | None:
    """Random (coeffs, gamma) with gamma = gamma0 + coeffs @ normals and a PSD state."""
    nb = sys.normals.shape[0]
    for _ in range(attempts):
        c = rng.normal(size=nb)
        c /= np.linalg.norm(c)
        tmax = max_feasible_step(sys, gamma0, c @ sys.normals)
        if tmax <= MIN_STEP:
            continue
        coeffs = rng.uniform(0.0, tmax) * c
        return coeffs, np.asarray(gamma0, dtype=float) + coeffs @ sys.normals
    return None


@dataclass(frozen=True)
class ConvexityReport:
    samples: int
    tested: int
    violations: int
    max_residual: float
    max_alpha_error: float


def convexity_probe(sys: HyperplaneSystem, ch: KrausChannel, gamma0, samples: int, seed=None) -> ConvexityReport:
    """Check that mixtures of domain members are again members.

    For members psi_a, psi_b and p in [0, 1], the mixture psi = p psi_a + (1-p) psi_b
    must be a domain member and must coarse-grain to p rho_a + (1-p) rho_b.
    """
    rng = np.random.default_rng(seed)
    tested = violations = 0
    max_res = max_alpha = 0.0
    for _ in range(samples):
        a = sample_member(sys, gamma0, rng)
        b = sample_member(sys, gamma0, rng)
        if a is None or b is None:
            continue
        (ca, ga), (cb, gb) = a, b
        p = rng.uniform()
        g = p * ga + (1 - p) * gb
        mem = in_domain(sys, gamma0, g)
        psi = operator_from_bloch(g, sys.basisD)
        rho = apply(ch, psi)
        rho_mix = p * apply(ch, operator_from_bloch(ga, sys.basisD)) + (1 - p) * apply(ch, operator_from_bloch(gb, sys.basisD))
        alpha_err = float(np.max(np.abs(rho - rho_mix)))
        coeff_err = float(np.max(np.abs(mem.coeffs @ sys.normals - (p * ca + (1 - p) * cb) @ sys.normals)))
        tested += 1
        max_res = max(max_res, mem.residual)
        max_alpha = max(max_alpha, alpha_err)
        if not mem.member or alpha_err > 1e-10 or coeff_err > 1e-9:
            violations += 1
    return ConvexityReport(samples, tested, violations, max_res, max_alpha)
