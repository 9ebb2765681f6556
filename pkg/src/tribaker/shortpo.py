"""Short periodic orbit reconstruction of long-lived resonances."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .maps import MapSpec, open_map
from .scars import scar_modes
from .spectra import ResonanceSpectrum, sort_by_modulus
from .symbolic import orbits_for_count

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
DEFAULT_FLOOR = 1e-2
DEFAULT_RANK_TOL = 1e-8


class EmptyBasisError(ValueError):
    pass


@dataclass
class ScarBasis:
    modes: list
    spec: MapSpec
    n_pos: int
    tau: int

    @property
    def size(self) -> int:
        return len(self.modes)

    def right_matrix(self) -> np.ndarray:
        return np.array([m.right for m in self.modes]).T

    def left_matrix(self) -> np.ndarray:
        return np.array([m.left for m in self.modes]).T


def default_tau(spec: MapSpec) -> int:
    """Ehrenfest time ``ln N / ln 3 = l``."""
    return spec.l


def default_npos_sweep(l: int) -> list:
    """Orbit counts up to ``2**l``, the fractal-Weyl-law scaling of the basis."""
    step = max(1, 2 ** (l - 4))
    return list(range(step, 2**l + 1, step))


def build_basis(spec: MapSpec, n_pos: int, tau: int | None = None, U: np.ndarray | None = None) -> ScarBasis:
    """Scar modes of the first ``n_pos`` orbits (all ``m`` per orbit) under the open map."""
    tau = default_tau(spec) if tau is None else tau
    U = open_map(spec) if U is None else U
    modes = []
    for orbit in orbits_for_count(n_pos):
        modes.extend(scar_modes(orbit, U, tau))
    if not modes:
        raise EmptyBasisError(f"no admissible scar modes for {spec.label} with {n_pos} orbits")
    return ScarBasis(modes, spec, n_pos, tau)


def reduced_problem(basis: ScarBasis, U: np.ndarray) -> tuple:
    """``(U_red, S_ovl)`` with ``U_red[a,b] = <L_a|U|R_b>`` and ``S_ovl[a,b] = <L_a|R_b>``."""
    if basis.size == 0:
        raise EmptyBasisError("basis is empty")
    R = basis.right_matrix()
    Lm = basis.left_matrix()
    return Lm.conj().T @ (U @ R), Lm.conj().T @ R


@dataclass
class GeneralizedSolution:
    """Eigenvalues of ``U_red c = z S_ovl c`` on the retained subspace.

    ``coef_right[:, n]`` are basis coefficients of the right vectors and
    ``coef_left[:, n]`` those of the left vectors (so the full-space left ket
    is ``left_matrix @ coef_left[:, n]``).
    """

    eigenvalues: np.ndarray
    rank: int
    coef_right: np.ndarray | None = None
    coef_left: np.ndarray | None = None


def solve_generalized(U_red: np.ndarray, S_ovl: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL,
                      vectors: bool = False) -> GeneralizedSolution:
    """Generalized eigenproblem regularized by truncating small singular values of ``S_ovl``.

    With ``S = W diag(s) V^dagger`` and ``r`` singular values above
    ``rank_tol * s_max``, solves ``diag(1/s_r) W_r^dagger U_red V_r y = z y``.
    """
    if U_red.shape != S_ovl.shape or U_red.shape[0] != U_red.shape[1]:
        raise ValueError("U_red and S_ovl must be square with equal shapes")
    W, s, Vh = np.linalg.svd(S_ovl)
    if s.size == 0 or s[0] == 0:
        raise np.linalg.LinAlgError("overlap matrix has effective rank 0")
    r = int(np.sum(s > rank_tol * s[0]))
    Wr, sr, Vr = W[:, :r], s[:r], Vh[:r].conj().T
    M = (Wr.conj().T @ U_red @ Vr) / sr[:, None]
    if not vectors:
        z = np.linalg.eigvals(M)
        return GeneralizedSolution(z[sort_by_modulus(z)], r)
    z, yl, yr = scipy.linalg.eig(M, left=True, right=True)
    order = sort_by_modulus(z)
    z, yl, yr = z[order], yl[:, order], yr[:, order]
    coef_right = Vr @ yr
    # left row x^dagger M = z x^dagger lifts to w^dagger = x^dagger diag(1/s) W^dagger
    coef_left = Wr @ (yl / sr[:, None])
    return GeneralizedSolution(z, r, coef_right, coef_left)


def shortpo_spectrum(basis: ScarBasis, U: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> ResonanceSpectrum:
    """Approximate resonances with full-space right/left vectors."""
    U_red, S_ovl = reduced_problem(basis, U)
    sol = solve_generalized(U_red, S_ovl, rank_tol, vectors=True)
    R = basis.right_matrix() @ sol.coef_right
    Lk = basis.left_matrix() @ sol.coef_left
    R /= np.linalg.norm(R, axis=0)
    Lk /= np.linalg.norm(Lk, axis=0)
    return ResonanceSpectrum(sol.eigenvalues, R, Lk)


@dataclass
class PerformanceReport:
    P: float
    epsilon: float
    floor: float
    n_exact: int
    matched: list = field(default_factory=list)


def performance(exact, approx, epsilon: float = DEFAULT_EPSILON, floor: float = DEFAULT_FLOOR) -> PerformanceReport:
    """Fraction of exact eigenvalues with ``|z| > floor`` matched within ``epsilon``.

    Matching is one-to-one and greedy by globally increasing distance; ties
    are broken by (exact index, approximate index).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if floor < 0:
        raise ValueError(f"floor must be non-negative, got {floor}")
    z_ex = exact.eigenvalues if isinstance(exact, ResonanceSpectrum) else np.asarray(exact)
    z_ap = approx.eigenvalues if isinstance(approx, ResonanceSpectrum) else np.asarray(approx)
    z_ex = np.asarray(z_ex, dtype=complex)
    z_ap = np.asarray(z_ap, dtype=complex).ravel()
    targets = z_ex[np.abs(z_ex) > floor]
    if targets.size == 0:
        return PerformanceReport(float("nan"), epsilon, floor, 0)
    matched = []
    if z_ap.size:
        D = np.abs(targets[:, None] - z_ap[None, :])
        ii, jj = np.nonzero(D < epsilon)
        order = np.lexsort((jj, ii, D[ii, jj]))
        used_e, used_a = set(), set()
        for n in order:
            i, j = int(ii[n]), int(jj[n])
            if i in used_e or j in used_a:
                continue
            used_e.add(i)
            used_a.add(j)
            matched.append((complex(targets[i]), complex(z_ap[j])))
    return PerformanceReport(len(matched) / targets.size, epsilon, floor, int(targets.size), matched)


@dataclass
class SweepPoint:
    spec: MapSpec
    n_pos: int
    basis_size: int
    rank: int
    report: PerformanceReport


def performance_sweep(spec: MapSpec, n_pos_list, exact, tau: int | None = None,
                      epsilon: float = DEFAULT_EPSILON, floor: float = DEFAULT_FLOOR,
                      rank_tol: float = DEFAULT_RANK_TOL) -> list:
    """P against the number of orbits, growing one basis incrementally."""
    tau = default_tau(spec) if tau is None else tau
    U = np.asarray(open_map(spec))
    n_pos_list = sorted(set(int(n) for n in n_pos_list))
    orbits = orbits_for_count(max(n_pos_list))
    modes, out = [], []
    R_cols, L_cols = [], []
    for n, orbit in enumerate(orbits, 1):
        new = scar_modes(orbit, U, tau)
        modes.extend(new)
        R_cols.extend(m.right for m in new)
        L_cols.extend(m.left for m in new)
        if n not in n_pos_list:
            continue
        if not modes:
            logger.warning("%s: empty basis at N_POs=%d, point skipped", spec.label, n)
            continue
        R = np.array(R_cols).T
        Lm = np.array(L_cols).T
        sol = solve_generalized(Lm.conj().T @ (U @ R), Lm.conj().T @ R, rank_tol)
        out.append(SweepPoint(spec, n, len(modes), sol.rank, performance(exact, sol.eigenvalues, epsilon, floor)))
    return out
