"""Torus coherent states and open scar functions built on periodic orbits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .symbolic import SymbolicOrbit, orbit_points

logger = logging.getLogger(__name__)

# winding numbers kept in the periodized Gaussian; the next image is
# suppressed by exp(-pi N) which is below 1e-30 from N = 27 on
IMAGES = (-1, 0, 1)

DEGENERACY_TOL = 1e-10


class DegenerateModeError(ValueError):
    """Left and right scar vectors are (numerically) orthogonal."""


def position_grid(N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) / N


def coherent_states(q0, p0, N: int) -> np.ndarray:
    """Coherent states on the antiperiodic torus, one row per center.

    ``q0`` and ``p0`` broadcast against each other; the result has shape
    ``broadcast(q0, p0).shape + (N,)`` and each state has unit norm.

    The state is the Weyl translate of the Gaussian ground state, written in
    the symmetric gauge ``exp(2 pi i N p0 (x - q0/2))`` and periodized with the
    sign ``(-1)^nu`` required by the half-integer grid offsets.
    """
    q0, p0 = np.broadcast_arrays(np.asarray(q0, dtype=float), np.asarray(p0, dtype=float))
    x = position_grid(N)
    qe = q0[..., None]
    pe = p0[..., None]
    psi = np.zeros(q0.shape + (N,), dtype=complex)
    # far tails underflow to exactly zero, which is the intended value
    with np.errstate(under="ignore"):
        for nu in IMAGES:
            d = x + nu - qe
            psi += (-1) ** abs(nu) * np.exp(-np.pi * N * d**2 + 2j * np.pi * N * pe * (x + nu - qe / 2))
    psi /= np.linalg.norm(psi, axis=-1, keepdims=True)
    return psi


def coherent_state(q0: float, p0: float, N: int) -> np.ndarray:
    """Single normalized coherent state centered at ``(q0, p0)``."""
    return coherent_states(q0, p0, N)


def husimi(vec: np.ndarray, q_grid, p_grid) -> np.ndarray:
    """``|<q,p|vec>|^2`` on the outer product of ``q_grid`` and ``p_grid``."""
    N = len(vec)
    out = np.empty((len(q_grid), len(p_grid)))
    for a, q in enumerate(q_grid):
        cs = coherent_states(q, np.asarray(p_grid), N)
        out[a] = np.abs(cs.conj() @ vec) ** 2
    return out


def step_action(q, p_next, eps):
    """Generating function ``S(q, p') = 3 q p' - eps (q + p')`` of one map step.

    ``dS/dp' = 3q - eps = q'`` and ``dS/dq = 3p' - eps = p``.
    """
    return 3 * q * p_next - eps * (q + p_next)


def propagation_phase(q, p, q_next, p_next, eps):
    """Phase (in units of ``2 pi N``) carried by a coherent state over one step.

    The antiperiodic transform uses ``exp(-i ...)``, which reverses the sign of
    the generating function in the propagator; the ``(qp + q'p')/2`` term comes
    from writing coherent states in the symmetric gauge.
    """
    return (q * p + q_next * p_next) / 2 - step_action(q, p_next, eps)


@dataclass
class OrbitPhases:
    """Exact per-orbit quantities entering the periodic-orbit combinations."""

    orbit: SymbolicOrbit
    points: list
    # theta[j] = accumulated phase action on reaching point j (theta[0] = 0)
    theta: list
    total_action: Fraction


def orbit_phases(orbit: SymbolicOrbit) -> OrbitPhases:
    pts = orbit_points(orbit)
    L = len(pts)
    theta = [Fraction(0)]
    for j in range(L):
        a, b = pts[j], pts[(j + 1) % L]
        theta.append(theta[-1] + propagation_phase(a.q, a.p, b.q, b.p, orbit.symbols[j]))
    return OrbitPhases(orbit, pts, theta[:L], theta[L])


def bohr_phase(total_action, m: int, L: int, N: int) -> float:
    """``A^m = (N S + m) / L`` reduced modulo 1."""
    return float(((N * Fraction(total_action) + m) / L) % 1)


def po_combination(orbit: SymbolicOrbit, m: int, N: int, phases: OrbitPhases | None = None) -> np.ndarray:
    """Normalized ``sum_j exp(-2 pi i (j A^m - N theta_j)) |q_j, p_j> / sqrt(L)``."""
    L = orbit.L
    if not 0 <= m < L:
        raise ValueError(f"m must be in 0..{L - 1}, got {m}")
    phases = phases or orbit_phases(orbit)
    A = bohr_phase(phases.total_action, m, L, N)
    qs = np.array([float(pt.q) for pt in phases.points])
    ps = np.array([float(pt.p) for pt in phases.points])
    cs = coherent_states(qs, ps, N)
    # N theta_j is rational; reduce mod 1 exactly before converting to float
    n_theta = np.array([float((N * th) % 1) for th in phases.theta])
    coef = np.exp(-2j * np.pi * (np.arange(L) * A - n_theta)) / np.sqrt(L)
    phi = coef @ cs
    return phi / np.linalg.norm(phi)


def cosine_window(tau: int) -> np.ndarray:
    """Weights ``cos(pi t / (2 tau))`` for ``t = 0..tau``."""
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    return np.cos(np.pi * np.arange(tau + 1) / (2 * tau))


@dataclass
class ScarMode:
    """Right/left scar pair for one ``(orbit, m)``.

    Normalized so that ``<left|right> = 1`` and ``|right| = |left|``.
    """

    orbit: SymbolicOrbit
    m: int
    A: float
    right: np.ndarray
    left: np.ndarray
    norm_right: complex = 1.0
    norm_left: complex = 1.0
    tau: int = field(default=0)


def _propagate(U: np.ndarray, phi: np.ndarray, A: float, tau: int, adjoint: bool) -> np.ndarray:
    w = cosine_window(tau)
    op = U.conj().T if adjoint else U
    sign = 1.0 if adjoint else -1.0
    acc = np.zeros_like(phi)
    v = phi.copy()
    for t in range(tau + 1):
        acc += w[t] * np.exp(sign * 2j * np.pi * A * t) * v
        if t < tau:
            v = op @ v
    return acc


def scar_right(phi: np.ndarray, U: np.ndarray, A: float, tau: int) -> np.ndarray:
    """Unnormalized ``sum_t U^t exp(-2 pi i A t) cos(pi t / 2 tau) phi``."""
    return _propagate(U, phi, A, tau, adjoint=False)


def scar_left(phi: np.ndarray, U: np.ndarray, A: float, tau: int) -> np.ndarray:
    """Ket form of the row vector ``sum_t <phi| U^t exp(-2 pi i A t) cos(...)``."""
    return _propagate(U, phi, A, tau, adjoint=True)


def normalize_pair(right: np.ndarray, left: np.ndarray):
    """Rescale so that ``<left|right> = 1`` and the two norms coincide.

    Returns ``(right, left, alpha, beta)`` with ``right = alpha * r0`` and
    ``left = beta * l0``.
    """
    c = np.vdot(left, right)
    nr, nl = np.linalg.norm(right), np.linalg.norm(left)
    if abs(c) < DEGENERACY_TOL * nr * nl:
        raise DegenerateModeError(f"<L|R> = {abs(c):.3e} relative to norms")
    alpha = np.sqrt(nl / (nr * abs(c)))
    beta = 1.0 / (alpha * np.conj(c))
    return alpha * right, beta * left, alpha, beta


def scar_mode(orbit: SymbolicOrbit, m: int, U: np.ndarray, tau: int,
              phases: OrbitPhases | None = None) -> ScarMode:
    """Build and normalize the scar pair for ``(orbit, m)`` under propagator ``U``."""
    N = U.shape[0]
    phases = phases or orbit_phases(orbit)
    A = bohr_phase(phases.total_action, m, orbit.L, N)
    phi = po_combination(orbit, m, N, phases)
    r, lv, alpha, beta = normalize_pair(scar_right(phi, U, A, tau), scar_left(phi, U, A, tau))
    return ScarMode(orbit, m, A, r, lv, 1 / alpha, 1 / beta, tau)


def scar_modes(orbit: SymbolicOrbit, U: np.ndarray, tau: int) -> list:
    """All admissible modes ``m = 0..L-1`` of ``orbit``; degenerate ones are logged and dropped."""
    phases = orbit_phases(orbit)
    out = []
    for m in range(orbit.L):
        try:
            out.append(scar_mode(orbit, m, U, tau, phases))
        except DegenerateModeError as exc:
            logger.warning("dropping scar mode %s m=%d: %s", orbit.word, m, exc)
    return out
