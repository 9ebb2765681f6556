"""Quantum tribaker propagators: closed map, shift and intersection families.

All matrices are dense ``complex128`` arrays in the position representation,
with basis states ``|q_j>`` at ``q_j = (j + 1/2) / N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np


class Family(str, Enum):
    CLOSED = "closed"
    SHIFT = "shift"
    INTERSECTION = "intersection"


@dataclass(frozen=True)
class MapSpec:
    """Which member of which family, on ``l`` qutrits.

    ``k`` is ignored (and normalized to 0) for the closed map.
    """

    family: Family
    k: int
    l: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.l < 1:
            raise ValueError(f"qutrit count must be >= 1, got l={self.l}")
        if self.family is Family.CLOSED:
            object.__setattr__(self, "k", 0)
        elif not 1 <= self.k <= self.l:
            raise ValueError(f"opening index must satisfy 1 <= k <= l, got k={self.k}, l={self.l}")

    @property
    def N(self) -> int:
        return 3**self.l

    @property
    def hbar(self) -> float:
        return 1.0 / (2 * np.pi * self.N)

    @property
    def label(self) -> str:
        if self.family is Family.CLOSED:
            return f"closed_l{self.l}"
        return f"{self.family.value}_k{self.k}_l{self.l}"

    def as_dict(self) -> dict:
        return {"family": self.family.value, "k": self.k, "l": self.l, "N": self.N}


def _check_qutrits(l: int) -> int:
    if l < 1:
        raise ValueError(f"qutrit count must be >= 1, got {l}")
    return 3**l


def fourier_gn(N: int) -> np.ndarray:
    """Antiperiodic discrete Fourier transform ``<q_j'|p_j>``.

    ``G[j', j] = exp(-2 pi i (j' + 1/2)(j + 1/2) / N) / sqrt(N)``.
    """
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    j = np.arange(N) + 0.5
    # reduce the phase modulo 2N before exponentiating to keep it small
    phase = np.mod(np.outer(4 * j, j), 4 * N) / 4
    return np.exp(-2j * np.pi * phase / N) / np.sqrt(N)


def mixing_block(l: int) -> np.ndarray:
    """``B_mix = diag(G_{N/3}, G_{N/3}, G_{N/3})``."""
    N = _check_qutrits(l)
    M = N // 3
    g = fourier_gn(M)
    out = np.zeros((N, N), dtype=complex)
    for b in range(3):
        out[b * M:(b + 1) * M, b * M:(b + 1) * M] = g
    return out


def closed_tribaker(l: int) -> np.ndarray:
    """Unitary closed tribaker propagator ``G_N^dagger B_mix``."""
    N = _check_qutrits(l)
    return fourier_gn(N).conj().T @ mixing_block(l)


def qutrit_digit(j, i: int, l: int):
    """``i``-th ternary digit (``i = 1`` most significant) of index ``j`` on ``l`` trits."""
    return (np.asarray(j) // 3 ** (l - i)) % 3


def projector_diagonal(i: int, l: int) -> np.ndarray:
    """Diagonal of ``Pi_i`` as a 0/1 float vector."""
    if not 1 <= i <= l:
        raise ValueError(f"qutrit index must satisfy 1 <= i <= l, got i={i}, l={l}")
    return (qutrit_digit(np.arange(3**l), i, l) != 1).astype(float)


def qutrit_projector(i: int, l: int) -> np.ndarray:
    """``Pi_i = I x ... x (|0><0| + |2><2|) x ... x I`` on the ``i``-th qutrit."""
    return np.diag(projector_diagonal(i, l)).astype(complex)


def opening_diagonal(spec: MapSpec) -> np.ndarray:
    """Diagonal of the combined position projector for ``spec``."""
    if spec.family is Family.CLOSED:
        return np.ones(spec.N)
    if spec.family is Family.SHIFT:
        return projector_diagonal(spec.k, spec.l)
    d = np.ones(spec.N)
    for i in range(1, spec.k + 1):
        d = d * projector_diagonal(i, spec.l)
    return d


@lru_cache(maxsize=8)
def _open_map_cached(spec: MapSpec) -> np.ndarray:
    G = fourier_gn(spec.N)
    mix = mixing_block(spec.l)
    if spec.family is not Family.CLOSED:
        pi = opening_diagonal(spec)
        # Pi B_mix Pi with diagonal Pi; projectors are self-adjoint so Pi^dagger = Pi
        mix = pi[:, None] * mix * pi[None, :]
    out = G.conj().T @ mix
    out.setflags(write=False)
    return out


def open_map(spec: MapSpec) -> np.ndarray:
    """Propagator of the family member described by ``spec``.

    shift:        ``G_N^dagger Pi_k B_mix Pi_k``
    intersection: ``G_N^dagger (Pi_1...Pi_k) B_mix (Pi_k...Pi_1)``

    The returned array is read-only and may be shared.
    """
    return _open_map_cached(spec)


def parity_operator(N: int) -> np.ndarray:
    """``R |q_j> = |q_{N-1-j}>``."""
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    return np.eye(N, dtype=complex)[::-1].copy()
