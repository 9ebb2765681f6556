"""Non-normal eigendecomposition, decay factors and fractal Weyl law counting."""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

MAX_DIM = 3**7
CLUSTER_TOL = 1e-12
DEFECTIVE_TOL = 1e-8


class EigenSolverError(RuntimeError):
    pass


class FitError(ValueError):
    pass


def matrix_hash(B: np.ndarray) -> str:
    a = np.ascontiguousarray(B, dtype=np.complex128)
    return hashlib.sha256(a.tobytes()).hexdigest()


@dataclass
class ResonanceSpectrum:
    """Eigenvalues sorted by decreasing modulus with paired eigenvectors.

    ``right[:, n]`` and ``left[:, n]`` are unit vectors with
    ``B right_n = z_n right_n`` and ``left_n^dagger B = z_n left_n^dagger``.
    ``clusters`` lists index groups whose eigenvalues lie within
    ``CLUSTER_TOL`` of each other.
    """

    eigenvalues: np.ndarray
    right: np.ndarray | None = None
    left: np.ndarray | None = None
    residual_right: np.ndarray | None = None
    residual_left: np.ndarray | None = None
    clusters: list = field(default_factory=list)
    matrix_norm: float = 1.0

    def __len__(self):
        return len(self.eigenvalues)


def sort_by_modulus(z: np.ndarray) -> np.ndarray:
    """Indices ordering ``z`` by decreasing modulus, ties broken by angle."""
    return np.lexsort((np.angle(z), -np.round(np.abs(z), 14)))


def eigenvalues(B: np.ndarray, max_dim: int = MAX_DIM) -> np.ndarray:
    """Eigenvalues only, sorted by decreasing modulus."""
    B = np.asarray(B)
    _check_square(B, max_dim)
    try:
        z = scipy.linalg.eigvals(B, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigensolver failed for matrix {matrix_hash(B)[:16]}: {exc}") from exc
    return z[sort_by_modulus(z)]


def _check_square(B, max_dim):
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    if B.shape[0] > max_dim:
        raise ValueError(f"dimension {B.shape[0]} exceeds configured maximum {max_dim}")


def find_clusters(z: np.ndarray, tol: float = CLUSTER_TOL) -> list:
    """Groups (size >= 2) of eigenvalues connected by gaps smaller than ``tol``."""
    n = len(z)
    parent = list(range(n))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(z.real)
    zs = z[order]
    for a in range(n):
        b = a + 1
        while b < n and zs[b].real - zs[a].real < tol:
            if abs(zs[b] - zs[a]) < tol:
                parent[root(order[a])] = root(order[b])
            b += 1
    groups = {}
    for i in range(n):
        groups.setdefault(root(i), []).append(i)
    return sorted((sorted(g) for g in groups.values() if len(g) > 1), key=lambda g: g[0])


def _biorthogonalize(right, left, idx):
    # make left^dagger right = diag within a cluster when the cluster is diagonalizable
    Rc, Lc = right[:, idx], left[:, idx]
    G = Lc.conj().T @ Rc
    # columns are unit vectors, so an absolute floor on the singular values is meaningful
    if np.linalg.svd(G, compute_uv=False).min() < DEFECTIVE_TOL:
        return False
    Lnew = Lc @ np.linalg.inv(G).conj().T
    left[:, idx] = Lnew / np.linalg.norm(Lnew, axis=0)
    return True


def eig_full(B: np.ndarray, max_dim: int = MAX_DIM) -> ResonanceSpectrum:
    """Complete spectrum of ``B`` with paired right and left eigenvectors.

    The complex Schur form ``B = Z T Z^dagger`` is computed first and LAPACK
    ``zgeev`` is applied to the triangular factor ``T``, which returns left and
    right vectors for each eigenvalue in one pass.  Calling ``zgeev`` on ``B``
    directly lets its diagonal scaling step inflate the left residuals of
    strongly non-normal members to about 1e-8; on ``T`` that step reduces to
    a permutation.  Residual norms are computed for every pair.
    """
    B = np.asarray(B, dtype=complex)
    _check_square(B, max_dim)
    try:
        T, Z = scipy.linalg.schur(B, output="complex")
        z, vl, vr = scipy.linalg.eig(T, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigensolver failed for matrix {matrix_hash(B)[:16]}: {exc}") from exc
    vl, vr = Z @ vl, Z @ vr
    order = sort_by_modulus(z)
    z, vl, vr = z[order], vl[:, order], vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    clusters = find_clusters(z)
    for idx in clusters:
        if not _biorthogonalize(vr, vl, idx):
            logger.info("degenerate cluster of %d eigenvalues of modulus %.3g is defective", len(idx), abs(z[idx[0]]))
    res_r = np.linalg.norm(B @ vr - vr * z, axis=0)
    res_l = np.linalg.norm(vl.conj().T @ B - z[:, None] * vl.conj().T, axis=1)
    return ResonanceSpectrum(z, vr, vl, res_r, res_l, clusters, float(np.linalg.norm(B, 2)))


def decay_factors(spectrum) -> tuple:
    """``(mu, Gamma)`` sorted by decreasing ``mu = |z|``; ``Gamma = -2 ln mu`` (``inf`` at 0)."""
    z = spectrum.eigenvalues if isinstance(spectrum, ResonanceSpectrum) else np.asarray(spectrum)
    mu = np.sort(np.abs(z))[::-1]
    with np.errstate(divide="ignore"):
        gamma = -2 * np.log(mu)
    # unitary input gives mu = 1 +- 1e-16; clip the sign noise
    gamma = np.where(np.abs(gamma) < 1e-12, 0.0, gamma)
    return mu, gamma


def count_longlived(spectrum, gamma_c: float) -> int:
    """Number of resonances with decay rate ``Gamma <= gamma_c``."""
    if gamma_c <= 0:
        raise ValueError(f"decay-rate threshold must be positive, got {gamma_c}")
    _, gamma = decay_factors(spectrum)
    return int(np.sum(gamma <= gamma_c))


@dataclass
class FwlFit:
    samples: list
    exponent: float
    prefactor: float
    residual: float
    dropped: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "residual": self.residual,
            "samples": [[int(n), int(c)] for n, c in self.samples],
            "dropped": [[int(n), int(c)] for n, c in self.dropped],
        }


def fwl_fit(samples) -> FwlFit:
    """Least-squares slope of ``ln N_mu`` against ``ln N``.

    Samples with ``N_mu = 0`` are dropped with a warning; fewer than two
    remaining samples is a :class:`FitError`.
    """
    samples = [(n, c) for n, c in samples]
    kept = [(n, c) for n, c in samples if c > 0]
    dropped = [(n, c) for n, c in samples if c <= 0]
    if dropped:
        warnings.warn(f"dropping {len(dropped)} sample(s) with N_mu = 0: {dropped}", stacklevel=2)
    if len({n for n, _ in kept}) < 2:
        raise FitError(f"need at least two samples with N_mu > 0, got {kept}")
    x = np.log([n for n, _ in kept])
    y = np.log([c for _, c in kept])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return FwlFit(kept, float(slope), float(np.exp(intercept)), residual, dropped)


def parity_sector_eigenvalues(B: np.ndarray) -> tuple:
    """Eigenvalues of ``B`` restricted to the even and odd parity subspaces.

    Requires ``B`` to commute with ``R |q_j> = |q_{N-1-j}>``.
    """
    N = B.shape[0]
    e = np.eye(N)
    R = e[::-1]
    # columns j and N-1-j of (I +- R) coincide up to sign; keep the first half
    even = _span_basis(e + R)
    odd = _span_basis(e - R)
    z_even = scipy.linalg.eigvals(even.T @ B @ even) if even.shape[1] else np.array([])
    z_odd = scipy.linalg.eigvals(odd.T @ B @ odd) if odd.shape[1] else np.array([])
    return z_even, z_odd


def _span_basis(P):
    N = P.shape[0]
    cols = []
    for j in range((N + 1) // 2):
        v = P[:, j]
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            cols.append(v / nv)
    return np.array(cols).T if cols else np.zeros((N, 0))
