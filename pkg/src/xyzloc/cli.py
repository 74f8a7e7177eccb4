"""Command-line workbench: declarative TOML configs in, CSV/JSON records out.

Subcommands: bounds, verify-greens, simulate, magnetisation, correlations,
fit, stats.  Exit codes: 0 success, 1 verification or statistical failure,
2 configuration error.  The CLI owns the only worker pool (--jobs).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from . import bounds as bounds_mod
from . import dynamics, greens, model, observables
from ._version import __version__
from .errors import SingularityError
from .records import ExperimentRecord, _atomic_write, read_record, write_record

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    """Raised for malformed configs; carries the offending key path."""


# ---------------------------------------------------------------------------
# config loading and schema validation


def _load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


@dataclasses.dataclass(frozen=True)
class Field:
    types: tuple
    required: bool = False
    default: object = None


def _validate(data: dict, schema: dict, path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a table")
    out = {}
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"{here}: unknown key")
        rule = schema[key]
        if isinstance(rule, dict):
            out[key] = _validate(value, rule, here)
        else:
            if isinstance(value, bool) and bool not in rule.types:
                raise ConfigError(f"{here}: expected {rule.types}, got bool")
            if not isinstance(value, rule.types):
                names = "/".join(t.__name__ for t in rule.types)
                raise ConfigError(
                    f"{here}: expected {names}, got {type(value).__name__}"
                )
            out[key] = value
    for key, rule in schema.items():
        here = f"{path}.{key}" if path else key
        if key in out:
            continue
        if isinstance(rule, dict):
            continue
        if rule.required:
            raise ConfigError(f"{here}: required key missing")
        if rule.default is not None:
            out[key] = rule.default
    return out


NUMBER = (int, float)

LATTICE_SCHEMA = {
    "kind": Field((str,), required=True),
    "n_sites": Field((int,), required=True),
    "width": Field((int,)),
    "edges": Field((list,)),
    "site_cap": Field((int,), default=model.DEFAULT_SITE_CAP),
}
PARTITION_SCHEMA = {
    "sprime_sites": Field((list,), required=True),
    "enforce_nonadjacent": Field((bool,), default=True),
}
COUPLINGS_SCHEMA = {
    "jx": Field(NUMBER, required=True),
    "jy": Field(NUMBER, required=True),
    "delta": Field(NUMBER, required=True),
}
GRID_SCHEMA = {
    "start": Field(NUMBER),
    "stop": Field(NUMBER),
    "num": Field((int,)),
    "values": Field((list,)),
}

SCHEMAS = {
    "bounds": {
        "bounds": {
            "s": Field(NUMBER, required=True),
            "s1": Field(NUMBER, required=True),
            "sprime_size": Field((int,), required=True),
            "total_size": Field((int,), required=True),
            "j_eff": Field(NUMBER, required=True),
            "sigma_b": Field(NUMBER, required=True),
            "interval_measure": Field(NUMBER, required=True),
            "distance": Field(NUMBER, required=True),
            "k_universal": Field(NUMBER, default=1.0),
        }
    },
    "verify-greens": {
        "verify": {
            "total_sizes": Field((list,), default=[2, 3, 4, 5, 6]),
            "sprime_sizes": Field((list,), default=[1, 2, 3, 4]),
            "draws": Field((int,), default=20),
            "eta": Field(NUMBER, default=0.1),
            "tolerance": Field(NUMBER, default=1e-9),
            "base_seed": Field((int,), default=20230615),
            "sprime_cap": Field((int,), default=4),
            "replay": {
                "n_sites": Field((int,), required=True),
                "sprime_size": Field((int,), required=True),
                "seed": Field((int,), required=True),
            },
        }
    },
    "simulate": {
        "lattice": LATTICE_SCHEMA,
        "partition": PARTITION_SCHEMA,
        "couplings": COUPLINGS_SCHEMA,
        "experiment": {
            "kind": Field((str,), required=True),
            "realisations": Field((int,), required=True),
            "base_seed": Field((int,), required=True),
            "sigma_b": Field((list,), required=True),
            "alpha": Field((int,)),
            "initial": Field((str, int)),
            "site_i": Field((int,)),
            "site_j": Field((int,)),
            "interval": Field((list,)),
            "statistic": Field((str,), default="grid_max"),
            "time": GRID_SCHEMA,
        },
    },
    "magnetisation": {
        "magnetisation_bounds": {
            "sprime_size": Field((int,), required=True),
            "n0": Field((int,)),
            "weights": Field((dict,)),
            "c_const": Field(NUMBER, required=True),
            "clamp": Field((bool,), default=False),
            "zeta": GRID_SCHEMA,
        }
    },
    "correlations": {
        "correlation_bounds": {
            "sprime_size": Field((int,), required=True),
            "alpha": Field((int,), required=True),
            "i": Field((int,), required=True),
            "j": Field((int,), required=True),
            "c_const": Field(NUMBER, required=True),
            "zeta": GRID_SCHEMA,
        }
    },
    "stats": {
        "stats": {
            "sprime_size": Field((int,), required=True),
            "sigma_b": Field(NUMBER, required=True),
            "draws": Field((int,), default=100_000),
            "base_seed": Field((int,), default=0),
            "configs": Field((list,)),
            "z_limit": Field(NUMBER, default=4.0),
        }
    },
}


def _grid_from(config: dict, name: str) -> np.ndarray:
    if "values" in config:
        return np.asarray([float(v) for v in config["values"]])
    try:
        start, stop, num = config["start"], config["stop"], config["num"]
    except KeyError as exc:
        raise ConfigError(f"{name}: give either values or start/stop/num ({exc})")
    return np.linspace(float(start), float(stop), int(num))


def _lattice_from(config: dict) -> model.SpinLattice:
    extra = None
    if "edges" in config:
        extra = [tuple(int(x) for x in e) for e in config["edges"]]
    return model.build_lattice(
        config["kind"],
        config["n_sites"],
        extra=extra,
        width=config.get("width"),
        site_cap=config.get("site_cap", model.DEFAULT_SITE_CAP),
    )


def _partition_from(config: dict, lattice: model.SpinLattice) -> model.SystemPartition:
    return model.make_partition(
        lattice,
        [int(s) for s in config["sprime_sites"]],
        enforce_nonadjacent=config.get("enforce_nonadjacent", True),
    )


def _couplings_from(config: dict) -> model.CouplingParams:
    return model.CouplingParams(
        float(config["jx"]), float(config["jy"]), float(config["delta"])
    )


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj)}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_bounds(args) -> int:
    config = _validate(_load_toml(args.config), SCHEMAS["bounds"], "")
    b = config.get("bounds")
    if b is None:
        raise ConfigError("bounds: required table missing")
    inputs = bounds_mod.BoundInputs(
        s=float(b["s"]),
        s1=float(b["s1"]),
        sprime_size=b["sprime_size"],
        total_size=b["total_size"],
        j_eff=float(b["j_eff"]),
        sigma_b=float(b["sigma_b"]),
        interval_measure=float(b["interval_measure"]),
        distance=float(b["distance"]),
        k_universal=float(b["k_universal"]),
    )
    report = bounds_mod.theorem1_rhs(inputs)
    print("flip-norm bound report")
    for name, value in dataclasses.asdict(inputs).items():
        print(f"  input {name} = {value}")
    for name in (
        "zeta", "sigma_b_min", "zeta_positive", "c_of_s1", "lemma1_factor",
        "prefactor", "exponential_factor", "full_rhs",
    ):
        print(f"  {name} = {getattr(report, name)}")
    _write_json(Path(args.out) / "bound_report.json", report)
    return EXIT_OK


def cmd_verify_greens(args) -> int:
    config = _validate(_load_toml(args.config), SCHEMAS["verify-greens"], "")
    v = config.get("verify", {})
    v = _validate(v, SCHEMAS["verify-greens"]["verify"], "verify")
    if "replay" in v:
        r = v["replay"]
        disc = greens.greens_instance_discrepancy(
            r["n_sites"], r["sprime_size"], r["seed"], eta=float(v["eta"])
        )
        print(
            f"replay n={r['n_sites']} |S'|={r['sprime_size']} seed={r['seed']}: "
            f"discrepancy {disc:.6e}"
        )
        return EXIT_OK if disc <= float(v["tolerance"]) else EXIT_FAILURE
    report = greens.run_greens_verification(
        total_sizes=[int(x) for x in v["total_sizes"]],
        sprime_sizes=[int(x) for x in v["sprime_sizes"]],
        draws=v["draws"],
        eta=float(v["eta"]),
        tolerance=float(v["tolerance"]),
        base_seed=v["base_seed"],
        sprime_cap=v["sprime_cap"],
    )
    print(
        f"{len(report.rows)} instances, max relative discrepancy "
        f"{report.max_discrepancy:.6e} (tolerance {report.tolerance:g})"
    )
    _write_json(Path(args.out) / "greens_verification.json", report)
    if not report.passed:
        for row in report.failures:
            print(
                f"FAIL n={row.n_sites} |S'|={row.sprime_size} draw={row.draw} "
                f"seed={row.seed}: {row.discrepancy:.6e}"
            )
        return EXIT_FAILURE
    return EXIT_OK


def _neel_state(lattice: model.SpinLattice) -> int:
    return sum(1 << i for i in range(0, lattice.n_sites, 2))


def cmd_simulate(args) -> int:
    config = _validate(_load_toml(args.config), SCHEMAS["simulate"], "")
    for table in ("lattice", "partition", "couplings", "experiment"):
        if table not in config:
            raise ConfigError(f"{table}: required table missing")
    lattice = _lattice_from(config["lattice"])
    partition = _partition_from(config["partition"], lattice)
    params = _couplings_from(config["couplings"])
    exp = config["experiment"]
    kind = exp["kind"]
    if kind not in ("decay", "magnetisation", "correlation"):
        raise ConfigError(f"experiment.kind: unknown kind {kind!r}")
    if "time" not in exp:
        raise ConfigError("experiment.time: required table missing")
    t_grid = _grid_from(exp["time"], "experiment.time")
    interval = None
    if "interval" in exp:
        lo, hi = (float(x) for x in exp["interval"])
        interval = (lo, hi)
    base_seed = args.seed if args.seed is not None else exp["base_seed"]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(sigma_b: float, map_fn) -> ExperimentRecord | None:
        stem = f"{kind}_sigma{sigma_b:g}"
        if kind == "correlation":
            expected = [f"{stem}_{label}" for label in ("tau_ij", "tau_ji_reversed", "ichi")]
        else:
            expected = [stem]
        if all(
            (out_dir / f"{name}.csv").exists() and (out_dir / f"{name}.json").exists()
            for name in expected
        ):
            print(f"skip {stem}: outputs already present")
            return None
        if kind == "decay":
            if "alpha" not in exp:
                raise ConfigError("experiment.alpha: required for decay runs")
            record = dynamics.disorder_decay_experiment(
                lattice, partition, params, exp["alpha"], sigma_b,
                exp["realisations"], base_seed, t_grid=t_grid,
                interval=interval, statistic=exp["statistic"], map_fn=map_fn,
            )
        else:
            initial = exp.get("initial", "neel")
            state = _neel_state(lattice) if initial == "neel" else int(initial)
            if kind == "magnetisation":
                record = dynamics.simulate_magnetisation(
                    lattice, partition, params, state, t_grid, sigma_b,
                    exp["realisations"], base_seed, interval=interval,
                    map_fn=map_fn,
                )
            else:
                for key in ("site_i", "site_j"):
                    if key not in exp:
                        raise ConfigError(f"experiment.{key}: required for correlation runs")
                result = dynamics.simulate_correlation(
                    lattice, partition, params, state, exp["site_i"],
                    exp["site_j"], t_grid, sigma_b, exp["realisations"],
                    base_seed, interval=interval, map_fn=map_fn,
                )
                for label, rec in (
                    ("tau_ij", result.tau_ij),
                    ("tau_ji_reversed", result.tau_ji_reversed),
                    ("ichi", result.ichi),
                ):
                    paths = write_record(rec, out_dir, f"{stem}_{label}")
                    print(f"wrote {paths[0]}")
                return None
        paths = write_record(record, out_dir, stem)
        print(f"wrote {paths[0]}")
        return record

    sigmas = [float(s) for s in exp["sigma_b"]]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for sigma in sigmas:
                run_one(sigma, pool.map)
    else:
        for sigma in sigmas:
            run_one(sigma, map)
    return EXIT_OK


def cmd_magnetisation(args) -> int:
    config = _validate(_load_toml(args.config), SCHEMAS["magnetisation"], "")
    mb = config.get("magnetisation_bounds")
    if mb is None:
        raise ConfigError("magnetisation_bounds: required table missing")
    if "zeta" not in mb:
        raise ConfigError("magnetisation_bounds.zeta: required table missing")
    zetas = _grid_from(mb["zeta"], "magnetisation_bounds.zeta")
    size = mb["sprime_size"]
    lines = ["zeta,lower,upper"]
    for zeta in zetas:
        if "weights" in mb:
            weights = {int(k): float(v) for k, v in mb["weights"].items()}
            band = observables.magnetisation_bounds_mixed(
                size, weights, float(mb["c_const"]), float(zeta), clamp=mb["clamp"]
            )
        else:
            if "n0" not in mb:
                raise ConfigError("magnetisation_bounds.n0: give n0 or weights")
            band = observables.magnetisation_bounds(
                size, mb["n0"], float(mb["c_const"]), float(zeta), clamp=mb["clamp"]
            )
        lines.append(f"{zeta:.17g},{band.lower:.17g},{band.upper:.17g}")
    out = Path(args.out) / "magnetisation_bounds.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_correlations(args) -> int:
    config = _validate(_load_toml(args.config), SCHEMAS["correlations"], "")
    cb = config.get("correlation_bounds")
    if cb is None:
        raise ConfigError("correlation_bounds: required table missing")
    if "zeta" not in cb:
        raise ConfigError("correlation_bounds.zeta: required table missing")
    zetas = _grid_from(cb["zeta"], "correlation_bounds.zeta")
    tau_lines = ["zeta,lower,upper"]
    chi_lines = ["zeta,lower,upper"]
    for zeta in zetas:
        b_ij = observables.correlation_bounds(
            cb["sprime_size"], cb["alpha"], cb["i"], cb["j"],
            float(cb["c_const"]), float(zeta),
        )
        b_ji = observables.correlation_bounds(
            cb["sprime_size"], cb["alpha"], cb["j"], cb["i"],
            float(cb["c_const"]), float(zeta),
        )
        lo, hi = observables.susceptibility_bound(b_ij, b_ji)
        tau_lines.append(f"{zeta:.17g},{b_ij.tau_minus:.17g},{b_ij.tau_plus:.17g}")
        chi_lines.append(f"{zeta:.17g},{lo:.17g},{hi:.17g}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, lines in (
        ("correlation_bounds.csv", tau_lines),
        ("susceptibility_bounds.csv", chi_lines),
    ):
        _atomic_write(out_dir / name, "\n".join(lines) + "\n")
        print(f"wrote {out_dir / name}")
    return EXIT_OK


def cmd_fit(args) -> int:
    records = []
    for path in args.records:
        record = read_record(path)
        if record.kind != "decay-vs-distance":
            raise ConfigError(
                f"{path}: kind {record.kind!r} is not decay-vs-distance"
            )
        records.append((str(path), record))
    if not records:
        raise ConfigError("no record files given")
    payload = {"inputs": [p for p, _ in records], "version": __version__}
    try:
        if args.joint:
            points = [
                (x, mean) for _, rec in records for (x, mean, _, _) in rec.series
            ]
            payload["joint"] = dynamics.fit_decay(points)
        else:
            payload["fits"] = {
                path: dynamics.fit_decay([(x, m) for (x, m, _, _) in rec.series])
                for path, rec in records
            }
    except Exception as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    _write_json(Path(args.out) / "decay_fit.json", payload)
    mode = "joint" if args.joint else "per-record"
    print(f"wrote {Path(args.out) / 'decay_fit.json'} ({mode})")
    return EXIT_OK


def cmd_stats(args) -> int:
    config = _validate(_load_toml(args.config), SCHEMAS["stats"], "")
    st = config.get("stats")
    if st is None:
        raise ConfigError("stats: required table missing")
    size = st["sprime_size"]
    sigma_b = float(st["sigma_b"])
    draws = st["draws"]
    base_seed = args.seed if args.seed is not None else st["base_seed"]
    configs = (
        [int(c) for c in st["configs"]]
        if "configs" in st
        else list(range(1 << size))
    )
    stats = model.covariance_matrix(configs, size, sigma_b)
    rng = np.random.default_rng(np.random.SeedSequence(int(base_seed)))
    fields = rng.normal(0.0, sigma_b, (draws, size))
    y = fields @ stats.coefficient_matrix.T.astype(float)
    centred = y - y.mean(axis=0)
    worst_z = 0.0
    print("pair  analytic  empirical  z")
    for a in range(len(configs)):
        for b in range(a, len(configs)):
            products = centred[:, a] * centred[:, b]
            emp = products.mean()
            se = products.std(ddof=1) / math.sqrt(draws)
            z = (emp - stats.covariance[a, b]) / se
            worst_z = max(worst_z, abs(z))
            print(
                f"({configs[a]:>3},{configs[b]:>3})  "
                f"{stats.covariance[a, b]:>10.4f}  {emp:>10.4f}  {z:>+.2f}"
            )
    min_cond = math.inf
    if "configs" in st:
        # condition each listed potential on all the other listed ones
        for target in range(len(configs)):
            min_cond = min(min_cond, model.conditional_variance(stats, target))
    else:
        # default scan: condition every alpha on the potentials seen along a
        # simple walk away from it (cumulative single flips)
        for alpha in range(1 << size):
            mask, chosen = 0, [alpha]
            for k in range(1, size):
                mask |= 1 << k
                chosen.append(alpha ^ mask)
            cstats = model.covariance_matrix(chosen, size, sigma_b)
            min_cond = min(min_cond, model.conditional_variance(cstats, 0))
    print(f"max |z| = {worst_z:.3f} (limit {st['z_limit']})")
    print(f"min conditional variance = {min_cond:.12g} (sigma_b^2 = {sigma_b**2:g})")
    report = {
        "max_abs_z": worst_z,
        "min_conditional_variance": min_cond,
        "sigma_b": sigma_b,
        "draws": draws,
        "base_seed": base_seed,
        "configs": configs,
        "version": __version__,
    }
    _write_json(Path(args.out) / "stats_report.json", report)
    if worst_z > float(st["z_limit"]) or min_cond < sigma_b**2 * (1 - 1e-9):
        return EXIT_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xyzloc",
        description="Localisation workbench for the disordered XYZ spin-1/2 model",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, needs_config=True, **kwargs):
        p = sub.add_parser(name, **kwargs)
        if needs_config:
            p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--out", default="results", help="output directory")
        p.set_defaults(func=func)
        return p

    add("bounds", cmd_bounds, help="evaluate the closed-form flip-norm bound")
    add("verify-greens", cmd_verify_greens, help="oracle vs path-sum sweep")
    add("simulate", cmd_simulate, help="run a disorder-averaged experiment")
    add("magnetisation", cmd_magnetisation, help="magnetisation bound curves")
    add("correlations", cmd_correlations, help="correlation/response bound curves")
    fit = add("fit", cmd_fit, needs_config=False, help="fit decay records")
    fit.add_argument("records", nargs="+", help="decay-vs-distance CSV files")
    fit.add_argument("--joint", action="store_true", help="pool all records")
    add("stats", cmd_stats, help="covariance and conditional-variance checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularityError as exc:
        print(f"singular request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
