"""Command-line experiment runner: ``dgmpde {train,evaluate,compare,baseline} CONFIG``.

Configs are TOML files. Top-level keys: ``problem`` (id) and optionally
``seed``. Sections (all optional, unknown keys are errors):

``[coefficients]``  overrides of the problem's coefficient record
``[domain]``        problem options such as ``x_max``, ``oversample``, ``sampler``
``[network]``       ``layers``, ``width``, ``activation``
``[sampling]``      batch sizes: ``interior``, ``terminal``, ``n_t``, ``n_x``
``[training]``      ``iterations``, ``resample_every``, ``lr_schedule``
                    (list of ``[iteration, rate]``), ``tol``, ``term_weights``,
                    ``optimizer``
``[derivatives]``   ``h`` (relative finite-difference step)
``[evaluation]``    ``t = [start, stop, count]`` and one axis per spatial
                    coordinate ``x1``, ``x2``... (``x`` is accepted in 1-d),
                    ``checkpoint`` (defaults to ``OUT/checkpoint.bin``)
``[compare]``       ``source`` = ``checkpoint`` | ``oracle`` | ``baseline``
``[baseline]``      ``scheme`` and solver sizes ``n_t``, ``n_x``, ``paths``

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SECTIONS = {
    "coefficients": None,
    "domain": None,
    "network": {"layers", "width", "activation"},
    "sampling": {"interior", "terminal", "n_t", "n_x"},
    "training": {"iterations", "resample_every", "lr_schedule", "tol", "term_weights", "optimizer"},
    "derivatives": {"h"},
    "evaluation": None,
    "compare": {"source"},
    "baseline": {"scheme", "n_t", "n_x", "paths"},
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            cfg = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    from .problems import REGISTRY

    for key in cfg:
        if key not in ("problem", "seed") and key not in SECTIONS:
            raise ConfigError(f"unknown top-level key {key!r}")
    if "problem" not in cfg:
        raise ConfigError("config must name a problem")
    if cfg["problem"] not in REGISTRY:
        raise ConfigError(f"unknown problem {cfg['problem']!r}; known: {', '.join(sorted(REGISTRY))}")
    for name, allowed in SECTIONS.items():
        sec = cfg.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        if allowed is not None:
            for key in sec:
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgmpde", description="Deep Galerkin Method experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for verb, text in (("train", "train networks and write a checkpoint and loss history"),
                       ("evaluate", "evaluate a checkpoint on a grid"),
                       ("compare", "error report against the reference solution"),
                       ("baseline", "run a classical solver")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("config", help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded BLAS and timing-free outputs, byte-identical on rerun")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.deterministic:
        # only effective before numpy is first imported in this process
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = "1"
    from . import commands

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg.setdefault("seed", 0)
        os.makedirs(args.out, exist_ok=True)
        getattr(commands, f"cmd_{args.command}")(cfg, args.out, args.deterministic)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except commands.NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
