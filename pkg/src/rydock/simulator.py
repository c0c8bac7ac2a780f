"""State-vector emulation of the analog Rydberg dynamics.

The Hamiltonian is H(t) = Omega(t)/2 * sum_i sigma_x_i
                        - delta(t) * sum_i w_i n_i
                        + sum_{i<j} (c6 / R_ij^6) n_i n_j
with hbar = 1, energies in rad/us, times in ns, distances in um. The
number operator n = (1 + sigma_z)/2, so this differs from a sigma_z-based
writing only by a state-independent shift. Note the detuning sign: positive
delta *lowers* the energy of excited atoms.

Everything diagonal lives in a single length-2^N vector; the drive is one
sparse bit-flip operator. Each step applies the midpoint-rule propagator
psi <- exp(-i H(t + dt/2) dt) psi through a truncated power series (terms
until the increment norm falls below 1e-12), with the diagonal recentred
and the step split whenever the series would need a large spectral radius.
The state is never renormalised: norm drift is an error signal, and drift
beyond 1e-4 raises.

Basis convention: bit k of the state index is atom k, and rendered
bitstrings put atom 0 leftmost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .errors import InputError, NumericalError
from .histogram import Histogram
from .pulses import PulseSequence
from .register import DeviceParams, Register

ATOM_CAP = 16
SERIES_TOL = 1e-12
DRIFT_LIMIT = 1e-4
# Maximum allowed ||H|| * dt per series application; larger steps are split.
THETA_MAX = 6.0


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n_atoms: int

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _check_cap(n: int):
    if n > ATOM_CAP:
        raise InputError(f"{n} atoms exceeds the {ATOM_CAP}-atom state-vector cap")
    if n < 1:
        raise InputError("need at least one atom")


def bitstring_of(index: int, n: int) -> str:
    """Render a basis index: atom k = bit k, atom 0 leftmost."""
    return "".join("1" if (index >> k) & 1 else "0" for k in range(n))


def _half_flip_operator(n: int) -> csr_matrix:
    """Sparse 0.5 * sum_k sigma_x_k."""
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)
    rows = np.tile(idx, n)
    cols = np.concatenate([idx ^ (1 << k) for k in range(n)])
    data = np.full(n * dim, 0.5)
    return csr_matrix((data, (rows, cols)), shape=(dim, dim))


def _bit_table(n: int) -> np.ndarray:
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)
    return np.stack([(idx >> k) & 1 for k in range(n)]).astype(float)


def interaction_diagonal(reg: Register, dev: DeviceParams) -> np.ndarray:
    """sum_{i<j} U_ij n_i n_j over the register geometry, as a 2^N vector."""
    _check_cap(reg.n)
    bits = _bit_table(reg.n)
    pos = reg.positions()
    diag = np.zeros(1 << reg.n)
    for i in range(reg.n):
        for j in range(i + 1, reg.n):
            r = float(np.hypot(*(pos[i] - pos[j])))
            if r <= 0:
                raise InputError(f"coincident atoms {reg.atoms[i].id}, {reg.atoms[j].id}")
            diag += (dev.c6 / r**6) * bits[i] * bits[j]
    return diag


def occupation_diagonal(reg: Register) -> np.ndarray:
    """sum_i w_i n_i as a 2^N vector (w = per-atom detuning weights)."""
    _check_cap(reg.n)
    bits = _bit_table(reg.n)
    return reg.detuning_weights() @ bits


@dataclass(frozen=True)
class Hamiltonian:
    """Fixed-control Hamiltonian split into drive and diagonal parts."""

    n_atoms: int
    omega: float
    diagonal: np.ndarray
    half_flip: csr_matrix

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.diagonal * psi
        if self.omega != 0.0:
            out = out + self.omega * (self.half_flip @ psi)
        return out

    def to_dense(self) -> np.ndarray:
        if self.n_atoms > 12:
            raise InputError("dense form capped at 12 atoms")
        return self.omega * self.half_flip.toarray() + np.diag(self.diagonal)


def build_hamiltonian(reg: Register, omega: float, delta: float,
                      dev: DeviceParams) -> Hamiltonian:
    """H at fixed controls: (omega/2) sum sigma_x - delta sum w n + sum U nn."""
    _check_cap(reg.n)
    diag = interaction_diagonal(reg, dev) - delta * occupation_diagonal(reg)
    return Hamiltonian(
        n_atoms=reg.n,
        omega=float(omega),
        diagonal=diag,
        half_flip=_half_flip_operator(reg.n),
    )


def _series_step(psi, diag, omega, half_flip, tau):
    """psi <- exp(-i (omega * F + diag) tau) psi by power series."""
    acc = psi.copy()
    term = psi
    for k in range(1, 400):
        hterm = diag * term
        if omega != 0.0:
            hterm = hterm + omega * (half_flip @ term)
        term = (-1j * tau / k) * hterm
        acc = acc + term
        if np.linalg.norm(term) < SERIES_TOL:
            return acc
    raise NumericalError("propagator series failed to converge")


def evolve(reg: Register, seq: PulseSequence, dev: DeviceParams,
           dt: float = 4.0) -> StateVector:
    """Integrate the schedule from |00...0> with midpoint steps of `dt` ns.

    Steps never straddle segment boundaries. Raises NumericalError when the
    norm drifts by more than 1e-4 (the step size is too coarse); drift is
    never hidden by renormalising.
    """
    _check_cap(reg.n)
    if dt <= 0:
        raise InputError("dt must be positive")
    inter = interaction_diagonal(reg, dev)
    occ = occupation_diagonal(reg)
    half_flip = _half_flip_operator(reg.n)
    dim = 1 << reg.n
    psi = np.zeros(dim, dtype=np.complex128)
    psi[0] = 1.0

    for seg in seq.segments:
        if abs(seg.phase) > 1e-12:
            raise InputError("only phase-0 schedules are supported")
        steps = max(1, int(np.ceil(seg.duration / dt - 1e-9)))
        edges = np.linspace(0.0, seg.duration, steps + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        omegas = np.asarray(seg.omega.sample(mids), dtype=float).reshape(-1)
        deltas = np.asarray(seg.delta.sample(mids), dtype=float).reshape(-1)
        widths = np.diff(edges)
        for k in range(steps):
            om, de = float(omegas[k]), float(deltas[k])
            diag = inter - de * occ
            centre = 0.5 * (float(diag.max()) + float(diag.min()))
            diag = diag - centre
            tau = float(widths[k]) * 1e-3  # ns -> us
            bound = float(np.abs(diag).max()) + 0.5 * abs(om) * reg.n
            nsub = max(1, int(np.ceil(bound * tau / THETA_MAX)))
            sub = tau / nsub
            phase = np.exp(-1j * centre * sub)
            for _ in range(nsub):
                psi = phase * _series_step(psi, diag, om, half_flip, sub)

    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > DRIFT_LIMIT:
        raise NumericalError(
            f"norm drift {drift:.2e} exceeds {DRIFT_LIMIT}; reduce dt"
        )
    return StateVector(amplitudes=psi, n_atoms=reg.n)


def measure(state: StateVector, shots: int, seed) -> Histogram:
    """Draw `shots` independent basis samples from |amplitude|^2."""
    if shots <= 0:
        raise InputError("shots must be positive")
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    out = {}
    for idx in np.flatnonzero(counts):
        out[bitstring_of(int(idx), state.n_atoms)] = int(counts[idx])
    return Histogram(shots=shots, counts=out)


def exact_distribution(state: StateVector) -> dict:
    """Exact outcome probabilities keyed by bitstring (nonzero entries)."""
    probs = np.abs(state.amplitudes) ** 2
    out = {}
    for idx in np.flatnonzero(probs):
        out[bitstring_of(int(idx), state.n_atoms)] = float(probs[idx])
    return out
