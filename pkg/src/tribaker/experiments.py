"""Experiment drivers behind the command-line subcommands.

Each ``cmd_*`` takes a :class:`JobConfig`, an output directory and a
:class:`ResultCache`, writes its files and returns a small summary dict.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import storage
from .config import ConfigError, JobConfig
from .maps import Family, MapSpec, open_map
from .phasespace import field_distance, q_field
from .shortpo import build_basis, default_npos_sweep, performance_sweep, shortpo_spectrum
from .spectra import (FitError, ResonanceSpectrum, count_longlived, eig_full, eigenvalues,
                      fwl_fit)
from .symbolic import (enumerate_orbits, escape_rate, primitive_necklace_count,
                       survival_probability)

logger = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """A command finished writing what it could but a numerical step failed."""


def _spec_key(spec: MapSpec, kind: str) -> str:
    return storage.content_key({"kind": kind, **spec.as_dict()})


def cached_eigenvalues(spec: MapSpec, cache: storage.ResultCache) -> np.ndarray:
    key = _spec_key(spec, "eigenvalues")
    hit = cache.get_arrays("eigenvalues", key)
    if hit is not None:
        logger.info("%s: eigenvalues served from cache", spec.label)
        return hit["z"]
    z = eigenvalues(np.asarray(open_map(spec)))
    cache.put_arrays("eigenvalues", key, {"z": z}, spec.as_dict())
    return z


def cached_eig_full(spec: MapSpec, cache: storage.ResultCache) -> ResonanceSpectrum:
    key = _spec_key(spec, "eigensystem")
    hit = cache.get_arrays("eigensystem", key)
    if hit is not None:
        logger.info("%s: eigensystem served from cache", spec.label)
        return ResonanceSpectrum(hit["z"], hit["right"], hit["left"])
    sp = eig_full(np.asarray(open_map(spec)))
    logger.info("%s: max residual right %.2e left %.2e", spec.label,
                sp.residual_right.max(), sp.residual_left.max())
    cache.put_arrays("eigensystem", key, {"z": sp.eigenvalues, "right": sp.right, "left": sp.left},
                     spec.as_dict())
    return sp


# ---------------------------------------------------------------------------


def cmd_spectrum(cfg: JobConfig, out: Path, cache: storage.ResultCache) -> dict:
    summary = {}
    for spec in cfg.specs():
        z = cached_eigenvalues(spec, cache)
        storage.write_csv(out / f"spectrum_{spec.label}.csv", storage.SPECTRUM_HEADER,
                          storage.spectrum_rows(z))
        summary[spec.label] = {"N": spec.N, "n_eigenvalues": int(len(z)),
                               "max_modulus": float(np.abs(z).max()),
                               "n_above_floor": int(np.sum(np.abs(z) > cfg.floor))}
    storage.write_json(out / "spectrum_summary.json", summary)
    return summary


def fwl_records(spectra: dict, gamma_c: float) -> list:
    """``[(l, N, N_mu)]`` from a mapping ``l -> eigenvalues``."""
    return [(l, 3**l, count_longlived(np.asarray(z), gamma_c)) for l, z in sorted(spectra.items())]


def cmd_fwl(cfg: JobConfig, out: Path, cache: storage.ResultCache, spectrum_source=None) -> dict:
    """Counts and fits per ``(family, k)``.

    ``spectrum_source(spec) -> eigenvalues`` replaces the exact solver, which
    lets synthetic spectra with a known exponent be pushed through the harness.
    """
    if len(set(cfg.ls)) < 2:
        raise ConfigError("fwl needs at least two values in l_list")
    source = spectrum_source or (lambda spec: cached_eigenvalues(spec, cache))
    by_member = {}
    for spec in cfg.specs():
        by_member.setdefault((spec.family.value, spec.k), {})[spec.l] = source(spec)
    summary, failed = {}, []
    for (family, k), spectra in sorted(by_member.items()):
        name = f"{family}_k{k}"
        records = fwl_records(spectra, cfg.gamma_c)
        storage.write_csv(out / f"fwl_{name}.csv", storage.FWL_HEADER,
                          [(l, N, c, cfg.gamma_c) for l, N, c in records])
        fit_input = [(N, c) for _, N, c in records]
        try:
            result = fwl_fit(fit_input).as_dict()
        except FitError as exc:
            logger.error("%s: %s", name, exc)
            result = {"error": str(exc), "samples": [[n, c] for n, c in fit_input]}
            failed.append(name)
        result.update(family=family, k=k, gamma_c=cfg.gamma_c)
        storage.write_json(out / f"fwl_fit_{name}.json", result)
        summary[name] = result
    if failed:
        raise NumericalFailure(f"FWL fit failed for {', '.join(failed)}")
    return summary


def cmd_performance(cfg: JobConfig, out: Path, cache: storage.ResultCache) -> dict:
    rows, matched, summary = [], [], {}
    for spec in cfg.specs():
        exact = cached_eigenvalues(spec, cache)
        n_list = cfg.npos_list or default_npos_sweep(spec.l)
        points = performance_sweep(spec, n_list, exact, cfg.tau_for(spec.l), cfg.epsilon,
                                   cfg.floor, cfg.rank_tol)
        for pt in points:
            rows.append((spec.family.value, spec.k, spec.l, pt.n_pos, pt.basis_size, pt.rank,
                         pt.report.P, cfg.epsilon, cfg.floor))
            for ze, za in pt.report.matched:
                matched.append((spec.family.value, spec.k, spec.l, pt.n_pos, ze.real, ze.imag,
                                za.real, za.imag, abs(ze - za)))
            logger.info("%s N_POs=%d basis=%d rank=%d P=%.3f", spec.label, pt.n_pos,
                        pt.basis_size, pt.rank, pt.report.P)
        best = max(points, key=lambda p: (np.nan_to_num(p.report.P, nan=-1.0), -p.n_pos))
        summary[spec.label] = {"best_P": best.report.P, "best_N_POs": best.n_pos,
                               "n_exact": best.report.n_exact}
    storage.write_csv(out / "performance.csv", storage.PERFORMANCE_HEADER, rows)
    storage.write_csv(out / "matched.csv", storage.MATCHED_HEADER, matched)
    storage.write_json(out / "performance_summary.json", summary)
    return summary


QFIELD_DEFAULT_KS = (1, 3)


def qfield_pair(spec: MapSpec, n_pos: int, j: int, grid, tau: int, rank_tol: float,
                exact: ResonanceSpectrum | None = None) -> tuple:
    """``(exact_field, shortpo_field)`` of ``Q_j`` for one family member."""
    U = np.asarray(open_map(spec))
    exact = exact if exact is not None else eig_full(U)
    approx = shortpo_spectrum(build_basis(spec, n_pos, tau, U), U, rank_tol)
    meta = dict(spec.as_dict(), n_pos=n_pos)
    f_ex = q_field(exact, j, grid, source="exact", **meta)
    f_po = q_field(approx, j, grid, source="shortpo", **meta)
    return f_ex, f_po


def cmd_qfield(cfg: JobConfig, out: Path, cache: storage.ResultCache) -> dict:
    if Family(cfg.family) is Family.CLOSED:
        raise ConfigError("qfield compares short-PO and exact fields of an open map")
    ks = cfg.k_list or list(QFIELD_DEFAULT_KS)
    distances = {}
    for k in ks:
        spec = MapSpec(cfg.family, k, cfg.l)
        try:
            f_ex, f_po = qfield_pair(spec, cfg.npos, cfg.j, cfg.grid, cfg.tau_for(spec.l),
                                     cfg.rank_tol, cached_eig_full(spec, cache))
        except ValueError as exc:
            raise NumericalFailure(f"{spec.label}: {exc}") from exc
        for f in (f_ex, f_po):
            storage.save_raster(out / f"qfield_{f.meta['source']}_{spec.label}.ras", f.values, f.meta)
        distances[spec.label] = field_distance(f_ex, f_po)
        logger.info("%s: Q_%d distance exact vs short-PO = %.4g", spec.label, cfg.j,
                    distances[spec.label])
    report = {"j": cfg.j, "n_pos": cfg.npos, "l": cfg.l, "grid": cfg.grid, "distances": distances}
    storage.write_json(out / "distances.json", report)
    return report


def cmd_classical(cfg: JobConfig, out: Path, cache: storage.ResultCache) -> dict:
    summary = {}
    for spec in cfg.specs():
        curve = survival_probability(spec, cfg.t_max, cfg.n_samples, cfg.seed,
                                     estimator=cfg.estimator)
        storage.write_csv(out / f"survival_{spec.label}.csv", storage.SURVIVAL_HEADER,
                          [(t, f, cfg.n_samples, cfg.seed) for t, f in curve])
        # transients last until both opened trits have entered one contiguous window
        t_min = 2 * max(spec.k, 1)
        try:
            rate = escape_rate(curve, t_min)
        except ValueError as exc:
            logger.warning("%s: no rate (%s)", spec.label, exc)
            rate = None
        summary[spec.label] = {"escape_rate": rate, "fit_t_min": t_min,
                               "transient": [f for t, f in curve if t <= spec.l]}
    storage.write_json(out / "classical_summary.json",
                       {"members": summary, "n_samples": cfg.n_samples, "seed": cfg.seed,
                        "estimator": cfg.estimator, "reference_rate": float(np.log(1.5))})
    return summary


def cmd_orbits(cfg: JobConfig, out: Path, cache: storage.ResultCache) -> dict:
    orbits = enumerate_orbits(cfg.l_max)
    storage.write_csv(out / "orbits.csv", storage.ORBIT_HEADER, storage.orbit_rows(orbits))
    counts = {str(L): {"found": sum(1 for o in orbits if o.L == L),
                       "necklace_formula": primitive_necklace_count(L)}
              for L in range(1, cfg.l_max + 1)}
    storage.write_json(out / "orbit_counts.json", counts)
    return counts


COMMAND_TABLE = {
    "spectrum": cmd_spectrum,
    "fwl": cmd_fwl,
    "performance": cmd_performance,
    "qfield": cmd_qfield,
    "classical": cmd_classical,
    "orbits": cmd_orbits,
}
