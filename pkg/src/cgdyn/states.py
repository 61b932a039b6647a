"""Quantum states, generalized Gell-Mann bases and Bloch coordinates.

Bloch convention used throughout the package::

    rho = 1/q + 1/2 * sum_k a_k sigma_k,     a_k = Tr(rho sigma_k),

with Tr(sigma_i sigma_j) = 2 delta_ij. Hence purity = 1/q + |a|^2 / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import as_matrix, dagger, is_hermitian, trace_norm

PSD_FLOOR = -1e-9
TRACE_TOL = 1e-10


class InvalidStateError(ValueError):
    """Raised when a matrix fails the density-matrix checks."""


@dataclass(frozen=True, eq=False)
class GellMannBasis:
    """Traceless Hermitian basis of q x q matrices, ``elements[k]`` is sigma_k.

    Order: symmetric pairs (j<k, row-major), antisymmetric pairs (same order),
    then the q-1 diagonal members.
    """

    dim: int
    elements: np.ndarray

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, k):
        return self.elements[k]


@lru_cache(maxsize=None)
def _gell_mann_elements(q: int) -> np.ndarray:
    pairs = [(j, k) for j in range(q) for k in range(j + 1, q)]
    out = []
    for j, k in pairs:
        m = np.zeros((q, q), dtype=np.complex128)
        m[j, k] = m[k, j] = 1.0
        out.append(m)
    for j, k in pairs:
        m = np.zeros((q, q), dtype=np.complex128)
        m[j, k] = -1j
        m[k, j] = 1j
        out.append(m)
    for l in range(1, q):
        diag = np.zeros(q)
        diag[:l] = 1.0
        diag[l] = -l
        out.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * diag).astype(np.complex128))
    arr = np.array(out)
    arr.setflags(write=False)
    return arr


def gell_mann_basis(q: int) -> GellMannBasis:
    if q < 2:
        raise ValueError(f"Gell-Mann basis needs q >= 2, got {q}")
    return GellMannBasis(q, _gell_mann_elements(q))


def validate_density(rho, tol: float = TRACE_TOL, psd_floor: float = PSD_FLOOR) -> np.ndarray:
    """Return ``rho`` as an array after checking Hermiticity, unit trace and PSD."""
    rho = as_matrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got {rho.shape}")
    if not is_hermitian(rho, tol):
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise InvalidStateError(f"density matrix has trace {tr.real:.3g}")
    lo = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0]
    if lo < psd_floor:
        raise InvalidStateError(f"density matrix has eigenvalue {lo:.3g}")
    return rho


def pure_state(amplitudes, normalize: bool = False) -> np.ndarray:
    """Unit ket from amplitudes; ``normalize`` rescales instead of raising."""
    psi = np.asarray(amplitudes, dtype=np.complex128).ravel()
    n = np.linalg.norm(psi)
    if n == 0:
        raise InvalidStateError("zero vector is not a state")
    if abs(n - 1.0) > TRACE_TOL:
        if not normalize:
            raise InvalidStateError(f"state vector has norm {n:.12g}")
        psi = psi / n
    return psi


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    return np.outer(psi, np.conj(psi))


def basis_state(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128) / dim


def bloch_vector(rho, basis: GellMannBasis) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape != (basis.dim, basis.dim):
        raise ValueError(f"state of shape {rho.shape} does not match basis dimension {basis.dim}")
    comps = np.einsum("ij,kji->k", rho, basis.elements)
    if np.max(np.abs(comps.imag), initial=0.0) > 1e-10:
        raise InvalidStateError("Bloch components have an imaginary part; input not Hermitian")
    return comps.real.copy()


def operator_from_bloch(v, basis: GellMannBasis) -> np.ndarray:
    """1/q + 1/2 sum v_k sigma_k without any positivity check."""
    v = np.asarray(v, dtype=float)
    if v.shape != (len(basis),):
        raise ValueError(f"Bloch vector of length {v.size} does not match basis size {len(basis)}")
    return np.eye(basis.dim, dtype=np.complex128) / basis.dim + 0.5 * np.einsum("k,kij->ij", v, basis.elements)


def from_bloch(v, basis: GellMannBasis) -> np.ndarray:
    rho = operator_from_bloch(v, basis)
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < PSD_FLOOR:
        raise InvalidStateError(f"Bloch vector lies outside the state space (min eigenvalue {lo:.3g})")
    return rho


def min_eigenvalue(m) -> float:
    m = as_matrix(m)
    return float(np.linalg.eigvalsh(0.5 * (m + dagger(m)))[0])


def purity(rho) -> float:
    rho = as_matrix(rho)
    return float(np.real(np.trace(rho @ rho)))


def trace_distance(a, b) -> float:
    """Unnormalized trace distance ||a - b||_1 (ranges over [0, 2] for states)."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return trace_norm(a - b)


def random_pure_state(dim: int, seed=None) -> np.ndarray:
    """Haar-random ket from normalized complex Gaussian amplitudes.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return z / np.linalg.norm(z)


def random_density(dim: int, seed=None, rank: int | None = None) -> np.ndarray:
    """Random mixed state: partial trace of a Haar-random purification."""
    rng = np.random.default_rng(seed)
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, seed=None, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (g + dagger(g))
