"""``tribaker`` command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 cache error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import storage
from .config import COMMANDS, ConfigError, JobConfig, parse_text, parse_value
from .experiments import COMMAND_TABLE, NumericalFailure
from .shortpo import EmptyBasisError
from .spectra import EigenSolverError, FitError
from .symbolic import HorizonError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CACHE = 0, 2, 3, 4

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

# flag name -> config key; list-valued flags fill the *_list key when they hold several values
_SCALAR_FLAGS = {
    "family": "family", "gamma_c": "gamma_c", "epsilon": "epsilon", "floor": "floor",
    "tau": "tau", "grid": "grid", "seed": "seed", "cache_dir": "cache_dir", "out_dir": "out_dir",
    "rank_tol": "rank_tol", "j": "j", "t_max": "t_max", "n_samples": "n_samples",
    "l_max": "l_max", "estimator": "estimator",
}
_LIST_FLAGS = {"k": ("k", "k_list"), "l": ("l", "l_list"), "npos": ("npos", "npos_list")}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file (flags win)")
    common.add_argument("--family", choices=["closed", "shift", "intersection"])
    common.add_argument("--k", help="opening index; a list like 1,3 or a range 1..5 sweeps")
    common.add_argument("--l", help="number of qutrits; lists and ranges sweep")
    common.add_argument("--npos", help="number of periodic orbits; lists and ranges sweep")
    common.add_argument("--gamma-c", type=float, help="decay-rate cutoff (default 0.1)")
    common.add_argument("--epsilon", type=float, help="eigenvalue matching distance (default 0.001)")
    common.add_argument("--floor", type=float, help="modulus floor for performance (default 0.01)")
    common.add_argument("--tau", type=int, help="scar time window (default l)")
    common.add_argument("--grid", type=int, help="phase-space grid points per axis (default 243)")
    common.add_argument("--seed", type=int)
    common.add_argument("--cache-dir")
    common.add_argument("--out-dir")
    common.add_argument("--rank-tol", type=float, help="relative singular value cutoff (default 1e-8)")
    common.add_argument("--j", type=int, help="number of resonances in Q_j (default 32)")
    common.add_argument("--t-max", type=int, help="classical survival horizon (default 20)")
    common.add_argument("--n-samples", type=int, help="Monte Carlo samples (default 100000)")
    common.add_argument("--estimator", choices=["plain", "population"])
    common.add_argument("--l-max", type=int, help="maximal orbit period for 'orbits' (default 8)")
    common.add_argument("--allow-long", action="store_true", default=None,
                        help="acknowledge long runs (required for l >= 8)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tribaker", description="Open quantum tribaker experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args) -> JobConfig:
    values = {}
    if args.config is not None:
        try:
            values = parse_text(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    values["command"] = args.command
    for flag, key in _SCALAR_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    for flag, (scalar, listed) in _LIST_FLAGS.items():
        text = getattr(args, flag)
        if text is None:
            continue
        items = parse_value(listed, text)
        if not items:
            raise ConfigError(f"--{flag} is empty")
        if len(items) == 1:
            values[scalar] = items[0]
            values[listed] = []
        else:
            values[listed] = items
            values[scalar] = items[0]
    if args.allow_long:
        values["allow_long"] = True
    try:
        return JobConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def run_dir(cfg: JobConfig) -> Path:
    return Path(cfg.out_dir) / f"{cfg.command}-{cfg.hash()[:12]}"


_LOGGERS = ("tribaker", "py.warnings")


def _close_logging():
    for name in _LOGGERS:
        lg = logging.getLogger(name)
        for h in list(lg.handlers):
            lg.removeHandler(h)
            h.close()


def _setup_logging(log_path: Path | None, verbose: bool):
    _close_logging()
    err = logging.StreamHandler(sys.stderr)
    err.setLevel(logging.INFO if verbose else logging.WARNING)
    handlers = [err]
    if log_path is not None:
        handlers.append(logging.FileHandler(log_path, mode="w"))
    for name in _LOGGERS:
        lg = logging.getLogger(name)
        lg.setLevel(logging.INFO)
        lg.propagate = False
        for h in handlers:
            h.setFormatter(logging.Formatter(LOG_FORMAT))
            lg.addHandler(h)
    return logging.getLogger("tribaker")


def _open_cache(cfg: JobConfig) -> storage.ResultCache:
    root = Path(cfg.cache_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
        probe = root / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise storage.CacheError(f"cache directory {root} is not writable: {exc}") from exc
    return storage.ResultCache(root)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    log = _setup_logging(None, args.verbose)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    try:
        cache = _open_cache(cfg)
    except storage.CacheError as exc:
        log.error("%s", exc)
        return EXIT_CACHE
    out = run_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    log = _setup_logging(out / "run.log", args.verbose)
    logging.captureWarnings(True)
    log.info("command %s, config hash %s", cfg.command, cfg.hash())
    code = EXIT_OK
    try:
        # underflow only flushes coherent-state tails to zero
        with np.errstate(all="warn", under="ignore"), warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMAND_TABLE[cfg.command](cfg, out, cache)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        code = EXIT_CONFIG
    except storage.CacheError as exc:
        log.error("cache error: %s", exc)
        code = EXIT_CACHE
    except (NumericalFailure, EigenSolverError, FitError, EmptyBasisError, HorizonError,
            np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        code = EXIT_NUMERICAL
    log.info("exit code %d", code)
    print(out)
    logging.captureWarnings(False)
    _close_logging()
    return code


if __name__ == "__main__":
    sys.exit(main())
