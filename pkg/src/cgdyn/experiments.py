"""Scenario runners behind the command line.

Everything here returns plain data; reading configs and writing files is the
CLI's job. A scenario is a JSON object::

    {
      "channel": {"builtin": "blurred_detector"} | {"in_dim": 4, "out_dim": 2, "kraus": [...]},
      "hamiltonian": {"builtin": "zz"} | {"builtin": "zz_transverse", "g": 3.0} | [[[re, im], ...], ...],
      "initial_states": [[[re, im], ...], {"density": [[[re, im], ...], ...]}],
      "time_grid": {"tau_start": 0.0, "tau_end": 3.14159, "steps": 101},
      "seed": 0
    }

``steps`` is the number of grid points. Time is dimensionless, tau = J t, and
Hamiltonians are in units of hbar J.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import channels as chn
from .effective import effective_components, effective_evolve, intermediate_map
from .gamma import HyperplaneSystem, convexity_probe, hyperplanes, in_domain, sample_member
from .linalg import dagger, is_hermitian, matrix_exp_hermitian_generator, trace_norm
from .states import (
    InvalidStateError,
    bloch_vector,
    gell_mann_basis,
    operator_from_bloch,
    projector,
    purity,
    trace_distance,
    validate_density,
)

log = logging.getLogger(__name__)

CONSISTENCY_TOL = 1e-9
BOUND_TOL = 1e-10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
SWAP = np.eye(4, dtype=np.complex128)[[0, 2, 1, 3]]


class ConfigError(ValueError):
    """Malformed or inconsistent scenario description."""


class ConsistencyError(RuntimeError):
    """The effective path disagreed with the direct coarse-grained path."""


def zz_hamiltonian() -> np.ndarray:
    return np.kron(PAULI_Z, PAULI_Z)


def zz_transverse_hamiltonian(g: float = 3.0) -> np.ndarray:
    eye = np.eye(2)
    return zz_hamiltonian() + g * (np.kron(PAULI_X, eye) + np.kron(eye, PAULI_X))


# Reference action of the detector coarse graining on |ab><cd|; keys are (ket, bra).
_S3 = 1 / np.sqrt(3)
DETECTOR_TABLE = {
    ("00", "00"): ((0, 0), 1.0),
    ("00", "01"): ((0, 1), _S3),
    ("00", "10"): ((0, 1), _S3),
    ("00", "11"): ((0, 1), _S3),
    ("01", "00"): ((1, 0), _S3),
    ("01", "01"): ((1, 1), 1.0),
    ("01", "10"): None,
    ("01", "11"): None,
    ("10", "00"): ((1, 0), _S3),
    ("10", "01"): None,
    ("10", "10"): ((1, 1), 1.0),
    ("10", "11"): None,
    ("11", "00"): ((1, 0), _S3),
    ("11", "01"): None,
    ("11", "10"): None,
    ("11", "11"): ((1, 1), 1.0),
}


def detector_table_expected(ket: str, bra: str) -> np.ndarray:
    out = np.zeros((2, 2), dtype=np.complex128)
    entry = DETECTOR_TABLE[(ket, bra)]
    if entry is not None:
        (i, j), val = entry
        out[i, j] = val
    return out


def matrix_unit(ket: str, bra: str) -> np.ndarray:
    e = np.zeros((4, 4), dtype=np.complex128)
    e[int(ket, 2), int(bra, 2)] = 1.0
    return e


def detector_table_error(action) -> float:
    """Largest entry deviation of ``action`` from the reference table."""
    return max(
        float(np.max(np.abs(action(matrix_unit(k, b)) - detector_table_expected(k, b)))) for k, b in DETECTOR_TABLE
    )


# --- config parsing -------------------------------------------------------

def _complex_array(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    raise ConfigError("complex numbers must be [re, im] pairs")


@dataclass
class Scenario:
    channel: chn.KrausChannel
    hamiltonian: np.ndarray
    initial_states: list
    taus: np.ndarray
    seed: int = 0
    builtin_channel: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def dilation(self) -> chn.Dilation:
        return chn.dilation_from_kraus(self.channel)

    def unitaries(self) -> list:
        return [matrix_exp_hermitian_generator(self.hamiltonian, t) for t in self.taus]


def parse_channel(spec, check: bool = True) -> tuple[chn.KrausChannel, str | None]:
    if not isinstance(spec, dict):
        raise ConfigError("channel must be an object")
    name = spec.get("builtin")
    if name is None:
        try:
            return chn.channel_from_dict(spec, check=check), None
        except chn.ChannelError as exc:
            raise ConfigError(str(exc)) from exc
    if name == "blurred_detector":
        return chn.blurred_detector_channel(), name
    if name == "identity":
        return chn.identity_channel(int(spec.get("dim", 4))), name
    if name == "partial_trace":
        dims = spec.get("dims", [2, 2])
        return chn.partial_trace_channel(int(dims[0]), int(dims[1]), spec.get("keep", "A")), name
    raise ConfigError(f"unknown builtin channel {name!r}")


def parse_hamiltonian(spec, dim: int) -> np.ndarray:
    if isinstance(spec, dict):
        name = spec.get("builtin")
        if name == "zz":
            h = zz_hamiltonian()
        elif name == "zz_transverse":
            h = zz_transverse_hamiltonian(float(spec.get("g", 3.0)))
        elif name == "swap":
            h = SWAP.copy()
        elif name == "zero":
            h = np.zeros((dim, dim), dtype=np.complex128)
        else:
            raise ConfigError(f"unknown builtin hamiltonian {name!r}")
    else:
        try:
            h = _complex_array(spec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed hamiltonian: {exc}") from exc
    if h.shape != (dim, dim):
        raise ConfigError(f"hamiltonian has shape {h.shape}, channel input dimension is {dim}")
    if not is_hermitian(h, 1e-10):
        raise ConfigError("hamiltonian is not Hermitian")
    return h


def parse_state(raw, dim: int) -> np.ndarray:
    """Density matrix from an amplitude list or ``{"density": matrix}``."""
    try:
        if isinstance(raw, dict):
            rho = _complex_array(raw["density"])
            return validate_density(rho)
        arr = np.asarray(raw, dtype=float)
        amps = arr[:, 0] + 1j * arr[:, 1] if arr.ndim == 2 else arr.astype(np.complex128)
    except (KeyError, TypeError, ValueError, IndexError, InvalidStateError) as exc:
        raise ConfigError(f"malformed initial state: {exc}") from exc
    if amps.shape != (dim,):
        raise ConfigError(f"initial state has {amps.size} amplitudes, expected {dim}")
    n = np.linalg.norm(amps)
    if n == 0:
        raise ConfigError("initial state is the zero vector")
    if abs(n - 1) > 1e-8:
        log.warning("renormalizing initial state with norm %.6g", n)
    return projector(amps / n)


def parse_config(data: dict, check_channel: bool = True) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    ch, builtin = parse_channel(data.get("channel", {"builtin": "blurred_detector"}), check=check_channel)
    h = parse_hamiltonian(data.get("hamiltonian", {"builtin": "zz"}), ch.in_dim)
    states = [parse_state(s, ch.in_dim) for s in data.get("initial_states", [])]
    grid = data.get("time_grid", {})
    try:
        taus = np.linspace(float(grid.get("tau_start", 0.0)), float(grid.get("tau_end", np.pi)), int(grid.get("steps", 101)))
        seed = int(data.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed time grid or seed: {exc}") from exc
    if len(taus) < 1:
        raise ConfigError("time grid needs at least one point")
    extra = {k: v for k, v in data.items() if k not in {"channel", "hamiltonian", "initial_states", "time_grid", "seed"}}
    return Scenario(ch, h, states, taus, seed, builtin, extra)


def state_to_json(rho) -> dict:
    return {"density": [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(rho)]}


# --- channel diagnostics ---------------------------------------------------

@dataclass
class ChannelCheck:
    completeness_residual: float
    choi_min_eig: float
    table_error: float | None
    passed: bool


def check_channel(ch: chn.KrausChannel, builtin: str | None = None) -> ChannelCheck:
    rep = chn.verify_cptp(ch)
    table_err = None
    ok = rep.passed()
    if builtin == "blurred_detector":
        table_err = detector_table_error(lambda x: chn.apply(ch, x))
        ok = ok and table_err < 1e-12
    return ChannelCheck(rep.completeness_residual, rep.choi_min_eig, table_err, ok)


# --- trajectories ----------------------------------------------------------

def evolve_pair_paths(scn: Scenario, dil, psi0, U):
    """(direct, effective result) for one time point."""
    direct = chn.apply(scn.channel, U @ psi0 @ dagger(U))
    comp = effective_components(dil, psi0, U)
    rho0 = chn.apply(scn.channel, psi0)
    return direct, comp, effective_evolve(comp, rho0)


def simulate(scn: Scenario) -> tuple[list[dict], float]:
    """Purity and Bloch trajectory of one initial state; returns (rows, max discrepancy)."""
    if len(scn.initial_states) != 1:
        raise ConfigError("simulate needs exactly one initial state")
    psi0 = scn.initial_states[0]
    dil = scn.dilation
    d = scn.channel.out_dim
    basis = gell_mann_basis(d) if d == 2 else None
    rows, worst = [], 0.0
    for tau, U in zip(scn.taus, scn.unitaries()):
        direct, comp, res = evolve_pair_paths(scn, dil, psi0, U)
        err = float(np.max(np.abs(direct - res.state)))
        worst = max(worst, err)
        if err > CONSISTENCY_TOL:
            raise ConsistencyError(f"effective and direct paths differ by {err:.3g} at tau={tau}")
        row = {"tau": float(tau), "purity": purity(res.state)}
        if basis is not None:
            row.update(zip(("bx", "by", "bz"), bloch_vector(res.state, basis)))
        row["zeta_norm"] = float(np.sum(np.linalg.svd(comp.zeta, compute_uv=False)))
        row["min_output_eig"] = res.min_eig
        rows.append(row)
    return rows, worst


def same_map_check(scn: Scenario, a, b):
    ch = scn.channel
    sys_ = hyperplanes(ch, gell_mann_basis(ch.in_dim), gell_mann_basis(ch.out_dim))
    ga, gb = bloch_vector(a, sys_.basisD), bloch_vector(b, sys_.basisD)
    return in_domain(sys_, ga, gb), in_domain(sys_, gb, ga)


class SameMapError(ValueError):
    """The two initial states do not generate the same effective map."""


def distance(scn: Scenario, override: bool = False) -> list[dict]:
    if len(scn.initial_states) != 2:
        raise ConfigError("distance needs exactly two initial states")
    a, b = scn.initial_states
    fwd, back = same_map_check(scn, a, b)
    if not (fwd.member and back.member):
        msg = f"initial states do not generate the same effective map (residual {fwd.residual:.3g})"
        if not override:
            raise SameMapError(msg)
        log.warning(msg)
    dil = scn.dilation
    under0 = trace_distance(a, b)
    rows, eff0 = [], None
    for tau, U in zip(scn.taus, scn.unitaries()):
        da, _, ra = evolve_pair_paths(scn, dil, a, U)
        db, _, rb = evolve_pair_paths(scn, dil, b, U)
        err = max(float(np.max(np.abs(da - ra.state))), float(np.max(np.abs(db - rb.state))))
        if err > CONSISTENCY_TOL:
            raise ConsistencyError(f"effective and direct paths differ by {err:.3g} at tau={tau}")
        eff = trace_distance(ra.state, rb.state)
        if eff0 is None:
            eff0 = trace_distance(chn.apply(scn.channel, a), chn.apply(scn.channel, b))
        if eff > under0 + BOUND_TOL:
            raise ConsistencyError(f"effective distance {eff} exceeds the underlying bound {under0} at tau={tau}")
        under = trace_distance(U @ a @ dagger(U), U @ b @ dagger(U))
        rows.append(
            {
                "tau": float(tau),
                "eff_distance": eff,
                "eff_distance_0": eff0,
                "underlying_distance_0": under0,
                "underlying_distance": under,
            }
        )
    return rows


def effective_distance_curve(ch: chn.KrausChannel, unitaries, a, b) -> np.ndarray:
    """||L(U a U^dag) - L(U b U^dag)||_1 along a grid, via the direct path."""
    diff = a - b
    return np.array([trace_norm(chn.apply(ch, U @ diff @ dagger(U))) for U in unitaries])


@dataclass
class PairSearch:
    seed_state: np.ndarray
    partner: np.ndarray
    excess: float
    candidates: int
    partner_gamma: np.ndarray
    system: HyperplaneSystem = field(repr=False)


def find_pair(scn: Scenario, budget: int, seed: int | None = None) -> PairSearch:
    """Random search over perpendicular moves of the seed for the largest distance excess.

    Excess is max_tau ||rho_tau - rho'_tau||_1 - ||rho_0 - rho'_0||_1.
    """
    if len(scn.initial_states) != 1:
        raise ConfigError("find-pair needs exactly one seed state")
    ch = scn.channel
    psi0 = scn.initial_states[0]
    sys_ = hyperplanes(ch, gell_mann_basis(ch.in_dim), gell_mann_basis(ch.out_dim))
    g0 = bloch_vector(psi0, sys_.basisD)
    rng = np.random.default_rng(scn.seed if seed is None else seed)
    Us = scn.unitaries()
    best = PairSearch(psi0, psi0, 0.0, 0, g0, sys_)
    found = 0
    for _ in range(budget):
        cand = sample_member(sys_, g0, rng, attempts=1)
        if cand is None:
            continue
        _, g = cand
        partner = operator_from_bloch(g, sys_.basisD)
        found += 1
        curve = effective_distance_curve(ch, Us, psi0, partner)
        excess = float(np.max(curve) - curve[0])
        if found == 1 or excess > best.excess:
            best = PairSearch(psi0, partner, excess, found, g, sys_)
    if budget > 0 and found == 0:
        raise ConfigError(f"no valid partner state found within {budget} attempts")
    best.candidates = found
    return best


def domain_probe(scn: Scenario, samples: int, seed: int | None = None):
    if not scn.initial_states:
        raise ConfigError("domain-probe needs a generating state")
    ch = scn.channel
    sys_ = hyperplanes(ch, gell_mann_basis(ch.in_dim), gell_mann_basis(ch.out_dim))
    g0 = bloch_vector(scn.initial_states[0], sys_.basisD)
    return convexity_probe(sys_, ch, g0, samples, scn.seed if seed is None else seed)


def divisibility(scn: Scenario) -> list[dict]:
    if np.any(np.diff(scn.taus) < 0):
        raise ConfigError("time grid must be monotone")
    Us = scn.unitaries()
    rows = []
    for j in range(len(Us)):
        for k in range(j, len(Us)):
            res = intermediate_map(scn.channel, Us, k, j)
            rows.append({"tau_j": float(scn.taus[j]), "tau_k": float(scn.taus[k]), "min_eig": res.min_eig, "status": res.status})
    return rows
