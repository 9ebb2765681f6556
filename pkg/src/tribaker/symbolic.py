"""Classical open tribaker map as a Bernoulli shift on trits.

A phase-space point is the bi-infinite trit string ``... e_-2 e_-1 . e_0 e_1 ...``
with ``q = 0.e_0 e_1 ...`` and ``p = 0.e_-1 e_-2 ...`` (base 3).  One step of the
map moves the dot one position to the right.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .maps import Family, MapSpec

logger = logging.getLogger(__name__)

OPEN_TRITS = (0, 2)


class InvalidTritError(ValueError):
    """A symbol outside the open alphabet {0, 2} was supplied."""


class HorizonError(RuntimeError):
    """The trit buffer of a classical sample has been exhausted."""


@dataclass(frozen=True)
class SymbolicOrbit:
    """Primitive periodic word over {0, 2}, stored as its smallest rotation.

    ``reduced_from`` records the length of the original input when
    :func:`canonical_orbit` had to reduce a repeated word to its root.
    """

    symbols: tuple
    reduced_from: int | None = None

    @property
    def L(self) -> int:
        return len(self.symbols)

    @property
    def word(self) -> str:
        return "".join(str(s) for s in self.symbols)

    def __repr__(self):
        return f"SymbolicOrbit({self.word})"


@dataclass(frozen=True)
class OrbitPoint:
    """Exact rational phase-space point; ``q`` or ``p`` equals 1 for the word (2)."""

    q: Fraction
    p: Fraction

    def as_floats(self) -> tuple:
        return float(self.q), float(self.p)


def _primitive_root(symbols: tuple) -> tuple:
    L = len(symbols)
    for d in range(1, L + 1):
        if L % d == 0 and symbols[:d] * (L // d) == symbols:
            return symbols[:d]
    return symbols


def canonical_orbit(symbols) -> SymbolicOrbit:
    """Canonical representative of the shift class of ``symbols``.

    Non-primitive words are reduced to their primitive root; the reduction is
    logged and recorded on the returned orbit.
    """
    symbols = tuple(int(s) for s in symbols)
    if not symbols:
        raise ValueError("orbit word must be nonempty")
    bad = [s for s in symbols if s not in OPEN_TRITS]
    if bad:
        raise InvalidTritError(f"symbols must be in {{0, 2}}, got {sorted(set(bad))}")
    root = _primitive_root(symbols)
    reduced_from = None
    if len(root) != len(symbols):
        reduced_from = len(symbols)
        logger.info("word %s is not primitive; reduced to period %d", symbols, len(root))
    rotation = min(root[i:] + root[:i] for i in range(len(root)))
    return SymbolicOrbit(rotation, reduced_from)


def _mobius(n: int) -> int:
    result, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    if m > 1:
        result = -result
    return result


def primitive_necklace_count(L: int, alphabet: int = 2) -> int:
    """Number of primitive necklaces of length ``L``: ``(1/L) sum_{d|L} mu(d) a^(L/d)``."""
    total = sum(_mobius(d) * alphabet ** (L // d) for d in range(1, L + 1) if L % d == 0)
    return total // L


def _lyndon_words(L: int):
    # Duval's algorithm over the ordered alphabet (0, 2), restricted to length L
    n_sym = len(OPEN_TRITS)
    w = [-1]
    while w:
        w[-1] += 1
        if len(w) == L:
            yield tuple(OPEN_TRITS[i] for i in w)
        m = len(w)
        while len(w) < L:
            w.append(w[len(w) - m])
        while w and w[-1] == n_sym - 1:
            w.pop()


def enumerate_orbits(L_max: int) -> list:
    """All primitive periodic orbits with period <= ``L_max``.

    Ordered by increasing period, then lexicographically; this global order
    fixes which orbits enter a short-orbit basis of a given size.
    """
    if L_max < 1:
        raise ValueError(f"L_max must be >= 1, got {L_max}")
    return [SymbolicOrbit(w) for L in range(1, L_max + 1) for w in _lyndon_words(L)]


def orbits_for_count(n_pos: int) -> list:
    """The first ``n_pos`` orbits of the global order."""
    if n_pos < 1:
        raise ValueError(f"number of orbits must be >= 1, got {n_pos}")
    out, L = [], 0
    while len(out) < n_pos:
        L += 1
        out.extend(SymbolicOrbit(w) for w in _lyndon_words(L))
    return out[:n_pos]


def _periodic_value(digits) -> Fraction:
    # 0.(d_0 d_1 ... d_{L-1}) repeating, in base 3
    L = len(digits)
    num = sum(d * 3 ** (L - 1 - i) for i, d in enumerate(digits))
    return Fraction(num, 3**L - 1)


def orbit_points(orbit: SymbolicOrbit) -> list:
    """The ``L`` phase-space points of ``orbit``, starting at the canonical rotation.

    Point ``j`` has ``q = 0.e_j e_{j+1} ...`` and ``p = 0.e_{j-1} e_{j-2} ...``
    (indices cyclic), so the shift takes point ``j`` to point ``j + 1``.
    """
    s = orbit.symbols
    L = len(s)
    pts = []
    for j in range(L):
        q_digits = [s[(j + i) % L] for i in range(L)]
        p_digits = [s[(j - 1 - i) % L] for i in range(L)]
        pts.append(OrbitPoint(_periodic_value(q_digits), _periodic_value(p_digits)))
    return pts


def shift_point(point: OrbitPoint) -> OrbitPoint:
    """Exact classical step on a rational point: ``q' = 3q - e``, ``p' = (p + e)/3``.

    ``q = 1`` (the expansion 0.222...) is treated as leading trit 2.
    """
    e = min(int(3 * point.q), 2)
    return OrbitPoint(3 * point.q - e, (point.p + e) / 3)


# ---------------------------------------------------------------------------
# Trit-buffer samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalSample:
    """Batch of points stored as finite trit strings with a movable dot.

    ``trits[:, dot + i]`` is ``e_i`` (q-expansion) and ``trits[:, dot - 1 - i]``
    is ``e_{-1-i}`` (p-expansion).
    """

    trits: np.ndarray
    dot: int

    @property
    def q_depth(self) -> int:
        return self.trits.shape[1] - self.dot

    @property
    def p_depth(self) -> int:
        return self.dot

    def q_trit(self, i: int) -> np.ndarray:
        """``i``-th most significant trit of q (``i >= 1``)."""
        if i > self.q_depth:
            raise HorizonError(f"q buffer holds {self.q_depth} trits, asked for trit {i}")
        return self.trits[:, self.dot + i - 1]

    def p_trit(self, i: int) -> np.ndarray:
        if i > self.p_depth:
            raise HorizonError(f"p buffer holds {self.p_depth} trits, asked for trit {i}")
        return self.trits[:, self.dot - i]

    def values(self) -> tuple:
        """Float (q, p) of the truncated expansions."""
        w_q = 3.0 ** -np.arange(1, self.q_depth + 1)
        w_p = 3.0 ** -np.arange(1, self.p_depth + 1)
        q = self.trits[:, self.dot:] @ w_q
        p = self.trits[:, :self.dot][:, ::-1] @ w_p
        return q, p


def sample_from_trits(q_trits, p_trits) -> ClassicalSample:
    """Build a one-point sample from explicit q and p expansions (most significant first)."""
    q_trits = list(q_trits)
    p_trits = list(p_trits)
    row = np.array(p_trits[::-1] + q_trits, dtype=np.int8)[None, :]
    return ClassicalSample(row, len(p_trits))


def orbit_sample(orbit: SymbolicOrbit, depth: int) -> ClassicalSample:
    """Points of a periodic orbit as trit buffers with ``depth`` trits on each side."""
    s = orbit.symbols
    L = len(s)
    rows = [[s[(j + i) % L] for i in range(-depth, depth)] for j in range(L)]
    return ClassicalSample(np.array(rows, dtype=np.int8), depth)


def random_sample(n: int, depth_q: int, depth_p: int, rng: np.random.Generator) -> ClassicalSample:
    """``n`` points uniform on the unit square (each trit uniform and independent)."""
    trits = rng.integers(0, 3, size=(n, depth_p + depth_q), dtype=np.int8)
    return ClassicalSample(trits, depth_p)


def classical_step(s: ClassicalSample) -> ClassicalSample:
    """One map iteration: the dot moves one trit to the right (exact)."""
    if s.q_depth < 1:
        raise HorizonError("no q trits left to shift")
    return ClassicalSample(s.trits, s.dot + 1)


def opening_columns(spec: MapSpec, dot: int) -> np.ndarray:
    """Buffer columns read by the opening test when the dot sits at ``dot``."""
    k = spec.k
    if spec.family is Family.CLOSED:
        return np.array([], dtype=int)
    if spec.family is Family.SHIFT:
        return np.array([dot - k, dot + k - 1])
    return np.arange(dot - k, dot + k)


def is_escaped(s: ClassicalSample, spec: MapSpec) -> np.ndarray:
    """Boolean mask of points lying in the opening of ``spec``.

    shift: the k-th trit of q or of p equals 1.
    intersection: any of the first k trits of q or of p equals 1.
    """
    if spec.family is Family.CLOSED:
        return np.zeros(s.trits.shape[0], dtype=bool)
    if spec.k > s.q_depth or spec.k > s.p_depth:
        raise HorizonError(f"opening needs {spec.k} trits on each side")
    cols = opening_columns(spec, s.dot)
    return np.any(s.trits[:, cols] == 1, axis=1)


ESTIMATORS = ("plain", "population")


def survival_probability(spec: MapSpec, t_max: int, n_samples: int, seed: int,
                         chunk: int = 200_000, estimator: str = "plain") -> list:
    """Monte Carlo survival curve ``[(t, fraction), ...]`` for ``t = 1..t_max``.

    A sample survives to time ``t`` when none of the states ``0..t`` lies in
    the opening.  Chunk ``c`` draws from ``default_rng([seed, c])`` and chunk
    estimates are averaged with weights proportional to their size.

    ``estimator="population"`` keeps the population size fixed: after every
    step the survivors are cloned back to full size and the trits not yet read
    by the opening test are redrawn.  Unread trits are independent of the
    survival event, so the product of the per-step surviving fractions is an
    estimate of the same curve whose relative error does not grow as the
    survival probability shrinks.
    """
    if n_samples < 1 or t_max < 1:
        raise ValueError("n_samples and t_max must be >= 1")
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    k = max(spec.k, 1)
    total = np.zeros(t_max + 1)
    for c, start in enumerate(range(0, n_samples, chunk)):
        n = min(chunk, n_samples - start)
        rng = np.random.default_rng([seed, c])
        s = random_sample(n, depth_q=t_max + k, depth_p=k, rng=rng)
        if estimator == "plain":
            total += n * _plain_curve(s, spec, t_max)
        else:
            total += n * _population_curve(s, spec, t_max, rng)
    return [(t, float(total[t] / n_samples)) for t in range(1, t_max + 1)]


def _plain_curve(s: ClassicalSample, spec: MapSpec, t_max: int) -> np.ndarray:
    out = np.empty(t_max + 1)
    alive = ~is_escaped(s, spec)
    out[0] = alive.mean()
    for t in range(1, t_max + 1):
        s = classical_step(s)
        alive &= ~is_escaped(s, spec)
        out[t] = alive.mean()
    return out


def _population_curve(s: ClassicalSample, spec: MapSpec, t_max: int, rng) -> np.ndarray:
    n, width = s.trits.shape
    read = np.zeros(width, dtype=bool)
    out = np.zeros(t_max + 1)
    log_surv = 0.0
    trits = s.trits
    for t in range(t_max + 1):
        s = ClassicalSample(trits, s.dot)
        read[opening_columns(spec, s.dot)] = True
        alive = ~is_escaped(s, spec)
        n_alive = int(alive.sum())
        if n_alive == 0:
            break
        log_surv += math.log(n_alive / n)
        out[t] = math.exp(log_surv)
        if t == t_max:
            break
        trits = trits[alive][rng.integers(0, n_alive, size=n)]
        unread = np.flatnonzero(~read)
        trits[:, unread] = rng.integers(0, 3, size=(n, unread.size), dtype=np.int8)
        s = classical_step(s)
    return out


def escape_rate(curve, t_min: int) -> float:
    """Least-squares decay rate ``-d ln(survival)/dt`` over ``t >= t_min``."""
    ts = np.array([t for t, f in curve if t >= t_min and f > 0], dtype=float)
    fs = np.array([f for t, f in curve if t >= t_min and f > 0], dtype=float)
    if len(ts) < 2:
        raise ValueError("need at least two positive survival values to fit a rate")
    slope = np.polyfit(ts, np.log(fs), 1)[0]
    return float(-slope) + 0.0


def box_counting_dimension(points, scales) -> float:
    """Slope of log(occupied boxes) against log(1/scale).

    ``points`` is an iterable of :class:`OrbitPoint` or ``(q, p)`` pairs;
    coordinates equal to 1 are folded into the last box.
    """
    scales = sorted({float(s) for s in scales})
    if len(scales) < 2:
        raise ValueError("box counting needs at least two distinct scales")
    coords = []
    for pt in points:
        q, p = (pt.q, pt.p) if isinstance(pt, OrbitPoint) else pt
        coords.append((q, p))
    counts = []
    for eps in scales:
        n_box = round(1 / eps)
        occupied = set()
        for q, p in coords:
            if isinstance(q, Fraction) and isinstance(p, Fraction) and abs(n_box * eps - 1) < 1e-12:
                iq, ip = math.floor(q * n_box), math.floor(p * n_box)
            else:
                iq, ip = math.floor(float(q) / eps), math.floor(float(p) / eps)
            occupied.add((min(iq, n_box - 1), min(ip, n_box - 1)))
        counts.append(len(occupied))
    x = np.log(1 / np.array(scales))
    y = np.log(np.array(counts, dtype=float))
    return float(np.polyfit(x, y, 1)[0])

