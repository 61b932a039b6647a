"""Effective dynamics induced on coarse-grained states.

Given a dilation V of the coarse graining L, an underlying state psi0 and an
underlying unitary U, the virtual state chi0 = V (psi0 (x) |0><0| (x) |0><0|) V^dagger
lives on (D r) (x) d. Splitting it as

    chi0 = omega0 (x) rho0 + C,      omega0 = Tr_d chi0,  rho0 = Tr_Dr chi0,

and evolving with W = V (U (x) 1 (x) 1) V^dagger gives the effective map

    Gamma(rho0) = sum_ij M_ij rho0 M_ij^dagger + zeta,
    M_ij = sqrt(p_j) (<phi_i| (x) 1) W (|phi_j> (x) 1),
    zeta = Tr_Dr(W C W^dagger) = sum_ij Theta_ij Tr_Dr(W sigma_i (x) sigma_j W^dagger),

where omega0 = sum_j p_j |phi_j><phi_j|. The first term is of Kraus form, the
second carries the correlations between the kept and discarded parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelError, Dilation, KrausChannel, apply, choi_of_map
from .linalg import Bipartition, as_matrix, dagger, eig_hermitian, is_unitary, partial_trace
from .states import GellMannBasis, gell_mann_basis, min_eigenvalue

PROB_FLOOR = 1e-12
PINV_CUTOFF = 1e-9


@dataclass(frozen=True, eq=False)
class VirtualState:
    split: Bipartition
    chi: np.ndarray


@dataclass(frozen=True, eq=False)
class Decomposition:
    split: Bipartition
    omega0: np.ndarray
    rho0: np.ndarray
    correlation: np.ndarray

    @property
    def chi(self) -> np.ndarray:
        return np.kron(self.omega0, self.rho0) + self.correlation


@dataclass(frozen=True, eq=False)
class EffectiveMapComponents:
    """Everything needed to evaluate Gamma_t for one time point."""

    split: Bipartition
    W: np.ndarray
    probabilities: np.ndarray
    eigenvectors: np.ndarray
    kraus: np.ndarray
    theta: np.ndarray
    zeta: np.ndarray
    basisA: GellMannBasis = field(repr=False)
    basisB: GellMannBasis = field(repr=False)

    def kraus_part(self, rho) -> np.ndarray:
        rho = as_matrix(rho)
        return np.einsum("nij,jk,nlk->il", self.kraus, rho, np.conj(self.kraus))

    def completeness_residual(self) -> float:
        s = np.einsum("nji,njk->ik", np.conj(self.kraus), self.kraus)
        return float(np.linalg.norm(s - np.eye(self.split.dimB), 2))


@dataclass(frozen=True)
class EvolveResult:
    state: np.ndarray
    min_eig: float


def build_virtual_state(dil: Dilation, psi0) -> VirtualState:
    psi0 = as_matrix(psi0)
    if psi0.shape != (dil.D, dil.D):
        raise ChannelError(f"state of shape {psi0.shape} does not match dilation input dimension {dil.D}")
    chi = dil.V @ dil.embed(psi0) @ dagger(dil.V)
    return VirtualState(dil.split, chi)


def decompose(vs: VirtualState) -> Decomposition:
    omega0 = partial_trace(vs.chi, vs.split, "B")
    rho0 = partial_trace(vs.chi, vs.split, "A")
    return Decomposition(vs.split, omega0, rho0, vs.chi - np.kron(omega0, rho0))


def intertwined_unitary(dil: Dilation, U) -> np.ndarray:
    """W = V (U (x) 1_r (x) 1_d) V^dagger."""
    U = as_matrix(U)
    if U.shape != (dil.D, dil.D):
        raise ChannelError(f"unitary of shape {U.shape} does not match dilation input dimension {dil.D}")
    if not is_unitary(U, 1e-8):
        raise ValueError("underlying evolution is not unitary")
    return dil.V @ np.kron(U, np.eye(dil.r * dil.d)) @ dagger(dil.V)


def spectral_data(omega0) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (clipped at zero) and eigenvector columns of omega0."""
    p, phi = eig_hermitian(omega0)
    return np.clip(p, 0.0, None), phi


def effective_kraus(dec: Decomposition, W, spectral=None) -> np.ndarray:
    """Array of M_ij, shape (n, d, d); i over the full eigenbasis, j over p_j >= 1e-12."""
    W = as_matrix(W)
    dA, d = dec.split.dimA, dec.split.dimB
    p, phi = spectral_data(dec.omega0) if spectral is None else spectral
    # W as a block matrix: Wb[a, :, b, :] is the d x d block between |a> and |b> of the Dr factor
    Wb = W.reshape(dA, d, dA, d)
    # rotate the Dr factor into the eigenbasis of omega0 on both sides
    Wphi = np.einsum("ai,ambn,bj->imjn", np.conj(phi), Wb, phi)
    ops = []
    for j in range(dA):
        if p[j] < PROB_FLOOR:
            continue
        for i in range(dA):
            ops.append(np.sqrt(p[j]) * Wphi[i, :, j, :])
    return np.array(ops)


def correlation_matrix(dec: Decomposition, basisA: GellMannBasis, basisB: GellMannBasis) -> np.ndarray:
    """Theta_ij = Tr[C (sigma_i (x) sigma_j)] / 4, so that C = sum Theta_ij sigma_i (x) sigma_j."""
    if basisA.dim != dec.split.dimA or basisB.dim != dec.split.dimB:
        raise ValueError("basis dimensions do not match the bipartition")
    C = dec.correlation.reshape(basisA.dim, basisB.dim, basisA.dim, basisB.dim)
    # Tr[C (sA (x) sB)] = sum C[a,m,b,n] sA[b,a] sB[n,m]
    theta = np.einsum("ambn,iba,jnm->ij", C, basisA.elements, basisB.elements) / 4.0
    return theta.real.copy()


def zeta(theta, W, basisA: GellMannBasis, basisB: GellMannBasis, split: Bipartition) -> np.ndarray:
    """sum_ij Theta_ij Tr_Dr(W sigma_i (x) sigma_j W^dagger)."""
    theta = np.asarray(theta)
    W = as_matrix(W)
    if theta.shape != (len(basisA), len(basisB)):
        raise ValueError(f"Theta has shape {theta.shape}, expected {(len(basisA), len(basisB))}")
    op = np.einsum("ij,iab,jmn->ambn", theta, basisA.elements, basisB.elements).reshape(split.total, split.total)
    return partial_trace(W @ op @ dagger(W), split, "A")


def effective_components(dil: Dilation, psi0, U, basisA=None, basisB=None) -> EffectiveMapComponents:
    """Assemble the effective map generated by (psi0, U) under the dilation's channel."""
    split = dil.split
    basisA = basisA or gell_mann_basis(split.dimA)
    basisB = basisB or gell_mann_basis(split.dimB)
    dec = decompose(build_virtual_state(dil, psi0))
    W = intertwined_unitary(dil, U)
    p, phi = spectral_data(dec.omega0)
    M = effective_kraus(dec, W, (p, phi))
    theta = correlation_matrix(dec, basisA, basisB)
    z = zeta(theta, W, basisA, basisB, split)
    return EffectiveMapComponents(split, W, p, phi, M, theta, z, basisA, basisB)


def effective_evolve(comp: EffectiveMapComponents, rho0) -> EvolveResult:
    """Gamma_t(rho0); positivity is reported, not enforced."""
    rho0 = as_matrix(rho0)
    if rho0.shape != (comp.split.dimB, comp.split.dimB):
        raise ValueError(f"state of shape {rho0.shape} does not match effective dimension {comp.split.dimB}")
    out = comp.kraus_part(rho0) + comp.zeta
    return EvolveResult(out, min_eigenvalue(out))


def effective_evolve_split(dec: Decomposition, W) -> np.ndarray:
    """Gamma_t(rho0) straight from the decomposition, without Gell-Mann coefficients."""
    split = dec.split
    W = as_matrix(W)
    prod = W @ np.kron(dec.omega0, dec.rho0) @ dagger(W)
    corr = W @ dec.correlation @ dagger(W)
    return partial_trace(prod + corr, split, "A")


# --- CP divisibility -------------------------------------------------------

def superoperator(fn, in_dim: int) -> np.ndarray:
    """Matrix of a linear map on row-major vectorized operators."""
    cols = []
    for k in range(in_dim * in_dim):
        e = np.zeros(in_dim * in_dim, dtype=np.complex128)
        e[k] = 1.0
        cols.append(as_matrix(fn(e.reshape(in_dim, in_dim))).ravel())
    return np.array(cols).T


def composite_superoperator(ch: KrausChannel, U) -> np.ndarray:
    """Superoperator of rho -> L(U rho U^dagger)."""
    U = as_matrix(U)
    return superoperator(lambda x: apply(ch, U @ x @ dagger(U)), ch.in_dim)


@dataclass(frozen=True, eq=False)
class IntermediateMap:
    status: str  # "CP", "NOT-CP" or "indeterminate"
    min_eig: float
    choi: np.ndarray | None
    superop: np.ndarray | None


def intermediate_map(ch: KrausChannel, U_grid, k: int, j: int, cutoff: float = PINV_CUTOFF, cp_floor: float = -1e-9) -> IntermediateMap:
    """Gamma_(t_k, t_j) = N_k o pinv(N_j) with N_t = L o U_t.

    ``indeterminate`` when N_j does not have full rank d^2 above ``cutoff``
    (relative to its largest singular value), since then N_j has no right inverse.
    """
    d = ch.out_dim
    Nj = composite_superoperator(ch, U_grid[j])
    Nk = composite_superoperator(ch, U_grid[k])
    sv = np.linalg.svd(Nj, compute_uv=False)
    if sv[0] == 0 or np.count_nonzero(sv > cutoff * sv[0]) < d * d:
        return IntermediateMap("indeterminate", float("nan"), None, None)
    G = Nk @ np.linalg.pinv(Nj, rcond=cutoff)
    J = choi_of_map(lambda x: (G @ x.ravel()).reshape(d, d), d)
    lo = float(np.linalg.eigvalsh(0.5 * (J + dagger(J)))[0])
    return IntermediateMap("CP" if lo >= cp_floor else "NOT-CP", lo, J, G)
