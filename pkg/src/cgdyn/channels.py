"""CPTP maps in Kraus, Choi and dilation form.

Choi convention: ``J = sum_ij E_ij (x) L(E_ij)`` with the input factor first,
so ``L(X) = Tr_in[(X^T (x) 1) J]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import Bipartition, as_matrix, complete_to_unitary, dagger, is_unitary, partial_trace
from .states import PSD_FLOOR

COMPLETENESS_TOL = 1e-10
KRAUS_CUTOFF = 1e-10


class ChannelError(ValueError):
    """Invalid channel data or a dimension mismatch at a channel boundary."""


class KrausChannel:
    """Linear map ``rho -> sum_i K_i rho K_i^dagger`` from D x D to d x d.

    Construction checks trace preservation unless ``check=False``; the
    unchecked form exists so diagnostics can be run on broken operator sets.
    """

    def __init__(self, kraus, check: bool = True):
        ops = np.array([as_matrix(k) for k in kraus], dtype=np.complex128)
        if ops.ndim != 3 or len(ops) == 0:
            raise ChannelError("need a non-empty list of equally shaped Kraus operators")
        ops.setflags(write=False)
        self.kraus = ops
        self.out_dim, self.in_dim = ops.shape[1:]
        if check:
            res = completeness_residual(ops)
            if res > COMPLETENESS_TOL:
                raise ChannelError(f"Kraus operators are not trace preserving (residual {res:.3g})")

    def __len__(self):
        return len(self.kraus)

    def __repr__(self):
        return f"KrausChannel(in_dim={self.in_dim}, out_dim={self.out_dim}, n={len(self)})"

    def __call__(self, rho):
        return apply(self, rho)

    def adjoint(self, obs) -> np.ndarray:
        """Heisenberg-picture action on a d x d observable."""
        obs = as_matrix(obs)
        return np.einsum("nji,jk,nkl->il", np.conj(self.kraus), obs, self.kraus)

    def to_json(self) -> str:
        return json.dumps(channel_to_dict(self))


@dataclass(frozen=True, eq=False)
class Dilation:
    """Unitary V on C^D (x) C^r (x) C^d with L(psi) = Tr_Dr[V (psi (x) |0><0| (x) |0><0|) V^dagger]."""

    D: int
    r: int
    d: int
    V: np.ndarray

    def __post_init__(self):
        n = self.D * self.r * self.d
        if self.V.shape != (n, n):
            raise ChannelError(f"V has shape {self.V.shape}, expected {(n, n)}")
        if not is_unitary(self.V, 1e-10):
            raise ChannelError("dilation operator is not unitary")

    @property
    def split(self) -> Bipartition:
        return Bipartition(self.D * self.r, self.d)

    def embed(self, psi) -> np.ndarray:
        """psi (x) |0><0|_r (x) |0><0|_d."""
        anc = np.zeros((self.r * self.d, self.r * self.d), dtype=np.complex128)
        anc[0, 0] = 1.0
        return np.kron(as_matrix(psi), anc)


def completeness_residual(kraus) -> float:
    ops = np.asarray(kraus)
    s = np.einsum("nji,njk->ik", np.conj(ops), ops)
    return float(np.linalg.norm(s - np.eye(ops.shape[2]), 2))


def _check_input(ch: KrausChannel, rho) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape != (ch.in_dim, ch.in_dim):
        raise ChannelError(f"input of shape {rho.shape} does not match channel input dimension {ch.in_dim}")
    return rho


def apply(ch: KrausChannel, rho) -> np.ndarray:
    rho = _check_input(ch, rho)
    return np.einsum("nij,jk,nlk->il", ch.kraus, rho, np.conj(ch.kraus))


@dataclass(frozen=True)
class CPTPReport:
    completeness_residual: float
    choi_min_eig: float

    def passed(self, residual_tol: float = 1e-12, eig_floor: float = -1e-10) -> bool:
        return self.completeness_residual < residual_tol and self.choi_min_eig >= eig_floor


def verify_cptp(ch: KrausChannel) -> CPTPReport:
    j = choi(ch)
    return CPTPReport(completeness_residual(ch.kraus), float(np.linalg.eigvalsh(j)[0]))


def choi_of_map(fn, in_dim: int) -> np.ndarray:
    """Choi matrix of an arbitrary linear map given as a Python callable."""
    blocks = []
    for i in range(in_dim):
        for j in range(in_dim):
            e = np.zeros((in_dim, in_dim), dtype=np.complex128)
            e[i, j] = 1.0
            blocks.append(np.kron(e, as_matrix(fn(e))))
    return np.sum(blocks, axis=0)


def choi(ch: KrausChannel) -> np.ndarray:
    # J[(i,m),(j,m')] = sum_n K_n[m,i] conj(K_n[m',j])
    vecs = np.transpose(ch.kraus, (0, 2, 1)).reshape(len(ch), -1)
    return vecs.T @ np.conj(vecs)


def apply_choi(j, rho, in_dim: int) -> np.ndarray:
    j = as_matrix(j)
    rho = as_matrix(rho)
    out_dim = j.shape[0] // in_dim
    return partial_trace(np.kron(rho.T, np.eye(out_dim)) @ j, Bipartition(in_dim, out_dim), "A")


def kraus_from_choi(j, in_dim: int, cutoff: float = KRAUS_CUTOFF) -> KrausChannel:
    j = as_matrix(j)
    if j.shape[0] % in_dim or j.shape[0] != j.shape[1]:
        raise ChannelError(f"Choi matrix of shape {j.shape} is incompatible with input dimension {in_dim}")
    out_dim = j.shape[0] // in_dim
    vals, vecs = np.linalg.eigh(0.5 * (j + dagger(j)))
    if vals[0] < PSD_FLOOR:
        raise ChannelError(f"Choi matrix has negative eigenvalue {vals[0]:.3g}; map is not CP")
    ops = [np.sqrt(lam) * vecs[:, k].reshape(in_dim, out_dim).T for k, lam in enumerate(vals) if lam >= cutoff]
    return KrausChannel(ops, check=False)


def kraus_equivalent(a: KrausChannel, b: KrausChannel, tol: float = 1e-9) -> bool:
    if (a.in_dim, a.out_dim) != (b.in_dim, b.out_dim):
        raise ChannelError("channels have different dimensions")
    return bool(np.max(np.abs(choi(a) - choi(b))) <= tol)


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """second o first."""
    if first.out_dim != second.in_dim:
        raise ChannelError("cannot compose: dimension mismatch")
    return KrausChannel([b @ a for b in second.kraus for a in first.kraus], check=False)


def dilation_from_kraus(ch: KrausChannel) -> Dilation:
    D, d, n = ch.in_dim, ch.out_dim, len(ch)
    r = math.ceil(n / D)
    ops = np.zeros((D * r, d, D), dtype=np.complex128)
    ops[:n] = ch.kraus
    # column for |k>|0>|0>: sum_n |n> (x) K_n|k>, entry n*d + m = K_n[m, k]
    cols = ops.reshape(D * r * d, D)
    positions = [k * r * d for k in range(D)]
    try:
        V = complete_to_unitary(cols, D * r * d, positions)
    except ValueError as exc:
        raise ChannelError(f"channel is not CPTP: {exc}") from exc
    return Dilation(D, r, d, V)


def apply_dilation(dil: Dilation, psi) -> np.ndarray:
    psi = as_matrix(psi)
    if psi.shape != (dil.D, dil.D):
        raise ChannelError(f"input of shape {psi.shape} does not match dilation input dimension {dil.D}")
    big = dil.V @ dil.embed(psi) @ dagger(dil.V)
    return partial_trace(big, dil.split, "A")


# --- built-in channels -----------------------------------------------------

def blurred_detector_channel() -> KrausChannel:
    """Two-qubit to one-qubit coarse graining of a detector that cannot tell
    the atoms apart and saturates on a single excitation."""
    a = 1 / np.sqrt(3)
    k1 = [[1, 0, 0, 0], [0, a, a, a]]
    k2 = [[0, 0, 0, 0], [0, a, 0, -a]]
    k3 = [[0, 0, 0, 0], [0, a, -a, 0]]
    k4 = [[0, 0, 0, 0], [0, 0, a, -a]]
    return KrausChannel([k1, k2, k3, k4])


def reference_detector_dilation() -> np.ndarray:
    """The 8 x 8 detector unitary (r = 1, ordering D (x) d) in its reference form."""
    a = 1 / np.sqrt(3)
    return np.array(
        [
            [1, 0, 0, 0, 0, 0, 0, 0],
            [0, 0, a, 0, a, 0, a, 0],
            [0, 1, 0, 0, 0, 0, 0, 0],
            [0, 0, a, -a, 0, 0, -a, 0],
            [0, 0, 0, 0, 0, 1, 0, 0],
            [0, 0, a, a, -a, 0, 0, 0],
            [0, 0, 0, 0, 0, 0, 0, 1],
            [0, 0, 0, a, a, 0, -a, 0],
        ],
        dtype=np.complex128,
    )


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel([np.eye(dim)])


def unitary_channel(u) -> KrausChannel:
    return KrausChannel([as_matrix(u)])


def partial_trace_channel(dimA: int, dimB: int, keep: str = "A") -> KrausChannel:
    """Channel tracing out one factor of C^dimA (x) C^dimB."""
    ops = []
    if keep == "A":
        for b in range(dimB):
            e = np.zeros((1, dimB))
            e[0, b] = 1.0
            ops.append(np.kron(np.eye(dimA), e))
    elif keep == "B":
        for a in range(dimA):
            e = np.zeros((1, dimA))
            e[0, a] = 1.0
            ops.append(np.kron(e, np.eye(dimB)))
    else:
        raise ValueError("keep must be 'A' or 'B'")
    return KrausChannel(ops)


# --- serialization ---------------------------------------------------------

def channel_to_dict(ch: KrausChannel) -> dict:
    return {
        "in_dim": ch.in_dim,
        "out_dim": ch.out_dim,
        "kraus": [[[float(z.real), float(z.imag)] for z in k.ravel()] for k in ch.kraus],
    }


def channel_from_dict(data: dict, check: bool = True) -> KrausChannel:
    try:
        D, d = int(data["in_dim"]), int(data["out_dim"])
        ops = []
        for raw in data["kraus"]:
            arr = np.asarray(raw, dtype=float)
            z = arr[..., 0] + 1j * arr[..., 1]
            ops.append(z.reshape(d, D))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ChannelError(f"malformed channel description: {exc}") from exc
    return KrausChannel(ops, check=check)


def channel_from_json(text: str, check: bool = True) -> KrausChannel:
    return channel_from_dict(json.loads(text), check=check)
