"""Coherent-state fields of resonance projectors ``h_j`` and their partial sums ``Q_j``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .scars import coherent_states
from .spectra import ResonanceSpectrum

logger = logging.getLogger(__name__)

PAIRING_TOL = 1e-10
DEFAULT_GRID = 243


class NonNormalizableError(ValueError):
    """``<L|R>`` is too small to define the projector ``|R><L| / <L|R>``."""


@dataclass
class PhaseField:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def q_grid(self) -> np.ndarray:
        return grid_centers(self.values.shape[0])

    @property
    def p_grid(self) -> np.ndarray:
        return grid_centers(self.values.shape[1])


def grid_centers(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def _grid_shape(grid) -> tuple:
    if isinstance(grid, int):
        return grid, grid
    n_q, n_p = grid
    return int(n_q), int(n_p)


def h_field(right: np.ndarray, left: np.ndarray, grid=DEFAULT_GRID, **meta) -> PhaseField:
    """``|<q,p|R><L|q,p>| / |<L|R>|`` on a uniform grid of cell centers."""
    c = np.vdot(left, right)
    if abs(c) < PAIRING_TOL * np.linalg.norm(left) * np.linalg.norm(right):
        raise NonNormalizableError(f"|<L|R>| = {abs(c):.3e}")
    n_q, n_p = _grid_shape(grid)
    N = len(right)
    p_grid = grid_centers(n_p)
    out = np.empty((n_q, n_p))
    for a, q in enumerate(grid_centers(n_q)):
        cs = coherent_states(q, p_grid, N)
        out[a] = np.abs(cs.conj() @ right) * np.abs(cs @ left.conj()) / abs(c)
    return PhaseField(out, dict(meta))


def admissible_modes(spectrum: ResonanceSpectrum) -> list:
    """Indices (in decreasing-modulus order) whose ``<L|R>`` passes screening."""
    R, Lk = spectrum.right, spectrum.left
    overlap = np.abs(np.einsum("ij,ij->j", Lk.conj(), R))
    scale = np.linalg.norm(Lk, axis=0) * np.linalg.norm(R, axis=0)
    ok = overlap >= PAIRING_TOL * scale
    if not ok.all():
        bad = np.flatnonzero(~ok)
        logger.info("excluded %d mode(s) with near-zero <L|R> (largest |z| = %.3e)",
                    bad.size, np.abs(spectrum.eigenvalues[bad]).max())
    return [int(n) for n in np.flatnonzero(ok)]


def q_operator(spectrum: ResonanceSpectrum, j: int) -> np.ndarray:
    """``sum_{j' <= j} |R_j'><L_j'| / <L_j'|R_j'>`` over the leading admissible modes."""
    keep = admissible_modes(spectrum)
    if j > len(keep):
        raise ValueError(f"asked for {j} modes, only {len(keep)} admissible")
    idx = keep[:j]
    R = spectrum.right[:, idx]
    Lk = spectrum.left[:, idx]
    norms = np.einsum("ij,ij->j", Lk.conj(), R)
    return (R / norms) @ Lk.conj().T


def operator_field(op: np.ndarray, grid=DEFAULT_GRID, **meta) -> PhaseField:
    """``|<q,p|op|q,p>|`` on a uniform grid of cell centers."""
    n_q, n_p = _grid_shape(grid)
    N = op.shape[0]
    p_grid = grid_centers(n_p)
    out = np.empty((n_q, n_p))
    for a, q in enumerate(grid_centers(n_q)):
        cs = coherent_states(q, p_grid, N)
        out[a] = np.abs(np.sum((cs.conj() @ op) * cs, axis=1))
    return PhaseField(out, dict(meta))


def q_field(spectrum: ResonanceSpectrum, j: int, grid=DEFAULT_GRID, **meta) -> PhaseField:
    """Field of the cumulative projector ``Q_j`` (accumulated as an operator)."""
    meta.setdefault("j", j)
    return operator_field(q_operator(spectrum, j), grid, **meta)


def field_distance(a: PhaseField, b: PhaseField) -> float:
    """L2 distance between the two fields after normalizing each to unit L2 norm."""
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a.values), np.linalg.norm(b.values)
    if na == 0 or nb == 0:
        raise ValueError("cannot normalize a zero field")
    return float(np.linalg.norm(a.values / na - b.values / nb))
