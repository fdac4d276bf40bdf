"""Experiment runner CLI.

Verbs:

* ``run <config>`` -- execute a run or sweep described by an INI config,
  writing one trajectory CSV per (sweep point, seed) plus one ``summary.csv``.
* ``plan --T --N --L [...]`` -- print the prescribed step size, the largest
  admissible averaging interval, the certified bound value, and the
  communication saving versus synchronizing every step.
* ``verify [--config ...]`` -- run the oracle battery, the exhaustive
  tiny-instance check, and the tamper controls.
* ``slope <summary.csv> --axis T|N`` -- fit the log-log slope of the
  statistic against T or N, with a bootstrap confidence interval over seeds.

Exit codes: 0 success; 2 config/usage error; 3 oracle failure; 4 bound
violation in certified mode.

Config grammar (INI): see ``README.md``; sections ``[objective]``, ``[run]``,
optional ``[sweep]`` (cross-product axes N/T/I/gamma), ``[seeds]``,
``[output]``.  ``I = plan`` and ``gamma = corollary`` resolve per sweep point
to plan_interval(T, N) and sqrt(N)/(L sqrt(T)).  The output directory can be
overridden with the ``PRSGD_OUTPUT_DIR`` environment variable.

All outputs are deterministic: rerunning a config reproduces every CSV byte
for byte (wall-clock timings go to stdout only, never into files).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import itertools
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import engine, metrics, oracles
from .comms import Topology
from .problems import (make_logistic_family, make_quadratic_family,
                       make_sine_family)

OUTPUT_DIR_ENV = "PRSGD_OUTPUT_DIR"

RUN_CSV_HEADER = ("t", "epoch", "local_step", "f_xbar", "sq_grad_norm",
                  "max_dev_sq", "gamma", "rounds_so_far")
SUMMARY_HEADER = ("family", "algorithm", "N", "dim", "T", "I", "S", "gamma",
                  "n_seeds", "statistic", "statistic_mean", "statistic_se",
                  "bound_name", "bound_value", "satisfied", "rounds",
                  "comm_vectors", "comm_bytes", "stat_by_seed")


class ConfigError(Exception):
    pass


def _g17(x: float) -> str:
    return format(float(x), ".17g")


# -- config loading -----------------------------------------------------------

_SECTION_KEYS = {
    "objective": {"family", "n_workers", "dim", "amplitude", "noise_halfwidth",
                  "seed", "shared_phases", "noise_atoms", "samples_per_worker",
                  "reg_weight", "shared_data", "centers"},
    "run": {"algorithm", "t", "i", "gamma", "epochs", "intervals", "topology",
            "record_stride", "threads", "certified", "bound"},
    "sweep": {"n", "t", "i", "gamma"},
    "seeds": {"master_seeds"},
    "output": {"dir"},
}

_FAMILY_KEYS = {
    "sine": {"family", "n_workers", "dim", "amplitude", "noise_halfwidth",
             "seed", "shared_phases", "noise_atoms"},
    "logistic": {"family", "n_workers", "dim", "samples_per_worker",
                 "reg_weight", "seed", "shared_data"},
    "quadratic": {"family", "centers", "noise_halfwidth"},
}

_ALGORITHMS = ("pr_sgd", "minibatch_baseline", "one_shot", "time_varying",
               "heterogeneous")


def _parse_int(raw: str, key: str, minimum: int = 1) -> int:
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if val < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {val}")
    return val


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def load_config(path: str) -> dict:
    """Parse and fully validate an experiment config; raises ConfigError."""
    if not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from None

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for required in ("objective", "run", "seeds"):
        if required not in cp:
            raise ConfigError(f"missing section [{required}]")

    obj = dict(cp["objective"])
    family = obj.get("family")
    if family not in _FAMILY_KEYS:
        raise ConfigError(f"objective.family: expected one of "
                          f"{sorted(_FAMILY_KEYS)}, got {family!r}")
    for key in obj:
        if key not in _FAMILY_KEYS[family]:
            raise ConfigError(f"objective.{key}: not a {family} parameter")

    run = dict(cp["run"])
    algorithm = run.get("algorithm")
    if algorithm not in _ALGORITHMS:
        raise ConfigError(f"run.algorithm: expected one of {_ALGORITHMS}, "
                          f"got {algorithm!r}")

    seeds = [_parse_int(tok, "seeds.master_seeds", minimum=0)
             for tok in _parse_list(cp["seeds"].get("master_seeds", ""))]
    if not seeds:
        raise ConfigError("seeds.master_seeds: at least one seed required")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds.master_seeds: seeds must be distinct")

    sweep = dict(cp["sweep"]) if "sweep" in cp else {}
    if sweep and algorithm in ("time_varying", "heterogeneous"):
        raise ConfigError("sweep: sweeps support fixed-interval algorithms only")

    out_dir = cp["output"].get("dir", "out") if "output" in cp else "out"
    out_dir = os.environ.get(OUTPUT_DIR_ENV, out_dir)

    cfg = {"objective": obj, "run": run, "sweep": sweep, "seeds": seeds,
           "out_dir": out_dir}
    # validate every sweep point eagerly: no run starts on a bad config
    for point in expand_points(cfg):
        resolve_point(cfg, point)
    certified = _parse_bool(run.get("certified", "false"), "run.certified")
    if certified and len(seeds) < 2:
        raise ConfigError("run.certified: needs >= 2 seeds for standard errors")
    return cfg


def build_family(obj: dict, n_workers: int | None = None):
    family = obj["family"]
    if family == "sine":
        atoms = obj.get("noise_atoms")
        return make_sine_family(
            n_workers or _parse_int(obj.get("n_workers", ""), "objective.n_workers"),
            _parse_int(obj.get("dim", ""), "objective.dim"),
            _parse_float(obj.get("amplitude", "1.0"), "objective.amplitude"),
            _parse_float(obj.get("noise_halfwidth", "0.0"),
                         "objective.noise_halfwidth"),
            _parse_int(obj.get("seed", "0"), "objective.seed", minimum=0),
            shared_phases=_parse_bool(obj.get("shared_phases", "false"),
                                      "objective.shared_phases"),
            noise_atoms=tuple(_parse_float(a, "objective.noise_atoms")
                              for a in _parse_list(atoms)) if atoms else None)
    if family == "logistic":
        return make_logistic_family(
            n_workers or _parse_int(obj.get("n_workers", ""), "objective.n_workers"),
            _parse_int(obj.get("dim", ""), "objective.dim"),
            _parse_int(obj.get("samples_per_worker", ""),
                       "objective.samples_per_worker"),
            _parse_float(obj.get("reg_weight", "0.0"), "objective.reg_weight"),
            _parse_int(obj.get("seed", "0"), "objective.seed", minimum=0),
            _parse_bool(obj.get("shared_data", "false"), "objective.shared_data"))
    centers = [[_parse_float(c, "objective.centers") for c in row.split(",")]
               for row in obj.get("centers", "").split(";") if row.strip()]
    if not centers:
        raise ConfigError("objective.centers: required for quadratic")
    if n_workers is not None and n_workers != len(centers):
        raise ConfigError("objective.centers: row count must match N")
    return make_quadratic_family(
        centers, _parse_float(obj.get("noise_halfwidth", "0.0"),
                              "objective.noise_halfwidth"))


def expand_points(cfg: dict) -> list[dict]:
    """Cross product of sweep axes over the base run settings."""
    run, sweep, obj = cfg["run"], cfg["sweep"], cfg["objective"]
    ns = _parse_list(sweep["n"]) if "n" in sweep else [obj.get("n_workers", "")]
    ts = _parse_list(sweep["t"]) if "t" in sweep else [run.get("t", "")]
    iis = _parse_list(sweep["i"]) if "i" in sweep else [run.get("i", "")]
    gs = _parse_list(sweep["gamma"]) if "gamma" in sweep else [run.get("gamma", "")]
    return [{"n": n, "t": t, "i": i, "gamma": g}
            for n, t, i, g in itertools.product(ns, ts, iis, gs)]


def resolve_point(cfg: dict, point: dict) -> dict:
    """Validate and resolve one sweep point into concrete run parameters."""
    run = cfg["run"]
    algorithm = run["algorithm"]
    certified = _parse_bool(run.get("certified", "false"), "run.certified")
    bound = run.get("bound", "none")
    if bound not in ("none", "theorem1", "theorem3", "corollary1"):
        raise ConfigError(f"run.bound: unknown bound {bound!r}")
    if certified and bound == "none":
        raise ConfigError("run.certified: requires run.bound to be set")

    suite = build_family(cfg["objective"],
                         _parse_int(point["n"], "n_workers")
                         if point["n"] else None)
    n = suite.n_workers
    cert = suite.certificate
    if certified and not cert.globally_valid:
        raise ConfigError("run.certified: this objective certifies no global "
                          "constants")

    out = {"suite": suite, "algorithm": algorithm, "n": n, "bound": bound,
           "certified": certified,
           "topology": _parse_topology(run.get("topology", "parameter_server")),
           "threads": _parse_int(run.get("threads", "1"), "run.threads"),
           "stride": _parse_stride(run.get("record_stride", "auto"))}

    if algorithm in ("pr_sgd", "minibatch_baseline", "one_shot"):
        total = _parse_int(point["t"], "run.T")
        gamma_raw = point["gamma"]
        if gamma_raw == "corollary":
            if total < n:
                raise ConfigError("run.gamma=corollary requires T >= N")
            gamma = engine.corollary_gamma(cert.L, total, n)
        else:
            gamma = _parse_float(gamma_raw, "run.gamma")
            if gamma <= 0:
                raise ConfigError("run.gamma: must be positive")
        if algorithm == "pr_sgd":
            if point["i"] == "plan":
                if total < n:
                    raise ConfigError("run.I=plan requires T >= N")
                interval = engine.plan_interval(total, n)
            else:
                interval = _parse_int(point["i"], "run.I")
        elif algorithm == "one_shot":
            if point["i"] not in ("", str(total)):
                raise ConfigError("run.I: one_shot fixes I = T")
            interval = total
        else:
            if point["i"] not in ("", "1"):
                raise ConfigError("run.I: minibatch_baseline fixes I = 1")
            interval = 1
        if interval > total:
            raise ConfigError(f"run.I: interval {interval} exceeds T = {total}")
        if bound == "corollary1" and total < n:
            raise ConfigError("run.bound=corollary1 requires T >= N")
        if bound == "theorem3":
            raise ConfigError("run.bound=theorem3 needs the heterogeneous "
                              "algorithm")
        if certified and gamma > 1.0 / cert.L:
            raise ConfigError(f"run.gamma: {gamma!r} exceeds 1/L; not certifiable")
        out.update(total=total, interval=interval, gamma=gamma, epochs=None)
    elif algorithm == "time_varying":
        if bound != "none":
            raise ConfigError("run.bound: no certified closed-form bound for "
                              "time_varying (constants are asymptotic)")
        epochs = _parse_int(run.get("epochs", ""), "run.epochs")
        out.update(total=None, interval=None, gamma=None, epochs=epochs)
    else:  # heterogeneous
        if bound not in ("none", "theorem3"):
            raise ConfigError("run.bound: heterogeneous runs certify theorem3")
        epochs = _parse_int(run.get("epochs", ""), "run.epochs")
        intervals = tuple(_parse_int(tok, "run.intervals")
                          for tok in _parse_list(run.get("intervals", "")))
        if len(intervals) != n:
            raise ConfigError("run.intervals: need one interval per worker")
        if any(a < b for a, b in zip(intervals, intervals[1:])):
            raise ConfigError("run.intervals: must be nonincreasing")
        if not suite.identical_distributions:
            raise ConfigError("run.algorithm=heterogeneous requires shared "
                              "phases/data (identical distributions)")
        gamma = _parse_float(point["gamma"], "run.gamma")
        if gamma <= 0:
            raise ConfigError("run.gamma: must be positive")
        if certified and gamma > 1.0 / cert.L:
            raise ConfigError(f"run.gamma: {gamma!r} exceeds 1/L; not certifiable")
        out.update(total=None, interval=None, gamma=gamma, epochs=epochs,
                   intervals=intervals)
    return out


def _parse_topology(raw: str) -> Topology:
    try:
        return Topology(raw)
    except ValueError:
        raise ConfigError(f"run.topology: unknown topology {raw!r}") from None


def _parse_stride(raw: str) -> int | None:
    if raw == "auto":
        return None
    return _parse_int(raw, "run.record_stride")


# -- execution ----------------------------------------------------------------

def _execute_point(resolved: dict, seed: int):
    algorithm = resolved["algorithm"]
    suite = resolved["suite"]
    kw = {"topology": resolved["topology"],
          "record_stride": resolved["stride"]}
    if algorithm == "pr_sgd":
        return engine.run_pr_sgd(suite, resolved["total"], resolved["interval"],
                                 resolved["gamma"], seed,
                                 n_threads=resolved["threads"], **kw)
    if algorithm == "one_shot":
        return engine.run_one_shot(suite, resolved["total"], resolved["gamma"],
                                   seed, n_threads=resolved["threads"], **kw)
    if algorithm == "minibatch_baseline":
        return engine.run_minibatch_baseline(suite, resolved["total"],
                                             resolved["gamma"], seed, **kw)
    if algorithm == "time_varying":
        lengths, gammas = engine.decaying_schedule(suite.n_workers,
                                                   resolved["epochs"])
        return engine.run_time_varying(suite, lengths, gammas, seed,
                                       n_threads=resolved["threads"], **kw)
    return engine.run_heterogeneous(suite, resolved["intervals"],
                                    resolved["epochs"], resolved["gamma"],
                                    seed, n_threads=resolved["threads"], **kw)


def _point_label(resolved: dict) -> str:
    bits = [resolved["algorithm"], f"N{resolved['n']}"]
    if resolved["total"] is not None:
        bits.append(f"T{resolved['total']}")
    if resolved["interval"] is not None:
        bits.append(f"I{resolved['interval']}")
    if resolved["epochs"] is not None:
        bits.append(f"S{resolved['epochs']}")
    if resolved.get("intervals"):
        bits.append("iv" + "-".join(str(i) for i in resolved["intervals"]))
    if resolved["gamma"] is not None:
        bits.append("g" + format(resolved["gamma"], ".6g")
                    .replace(".", "p").replace("-", "m"))
    return "_".join(bits)


def _epoch_coords(record):
    lengths = record.epoch_lengths or (1,) * record.total_steps
    epoch_ids = np.repeat(np.arange(1, len(lengths) + 1), lengths)
    local = np.concatenate([np.arange(k) for k in lengths])
    return epoch_ids, local


def write_run_csv(path: Path, record) -> None:
    epoch_ids, local = _epoch_coords(record)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(RUN_CSV_HEADER)
        for pos, tau in enumerate(record.rec_idx):
            out.writerow([
                int(tau), int(epoch_ids[tau]), int(local[tau]),
                _g17(record.f_rec[pos]),
                _g17(record.sq_grad_norms[tau]),
                _g17(record.dev_sq_rec[pos]),
                _g17(record.gammas[tau]),
                int(record.rounds_before_rec[pos]),
            ])


_STAT_FNS = {
    "avg_sq_grad_norm": metrics.avg_sq_grad_norm,
    "gamma_weighted_avg_sq_grad_norm": metrics.gamma_weighted_avg_sq_grad_norm,
    "participation_weighted_avg_sq_grad_norm":
        metrics.participation_weighted_avg_sq_grad_norm,
}

_REPORT_FNS = {
    "theorem1": metrics.make_theorem1_report,
    "theorem3": metrics.make_theorem3_report,
    "corollary1": metrics.make_corollary_report,
}


def _statistic_name(resolved: dict) -> str:
    if resolved["algorithm"] == "heterogeneous":
        return "participation_weighted_avg_sq_grad_norm"
    if resolved["algorithm"] == "time_varying":
        return "gamma_weighted_avg_sq_grad_norm"
    return "avg_sq_grad_norm"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(cfg["out_dir"])
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    seeds = cfg["seeds"]
    rows = []
    any_violation = False
    for point in expand_points(cfg):
        resolved = resolve_point(cfg, point)
        label = _point_label(resolved)
        started = time.perf_counter()
        records = []
        for seed in seeds:
            record = _execute_point(resolved, seed)
            write_run_csv(runs_dir / f"{label}_s{seed}.csv", record)
            records.append(record)
        stat_name = _statistic_name(resolved)
        stat_fn = _STAT_FNS[stat_name]
        by_seed = [stat_fn(r) for r in records]
        mean = math.fsum(by_seed) / len(by_seed)
        se = (float(np.std(np.asarray(by_seed), ddof=1)) / math.sqrt(len(by_seed))
              if len(by_seed) > 1 else 0.0)
        bound_name, bound_val, satisfied = "-", "-", "-"
        if resolved["bound"] != "none":
            try:
                report = _REPORT_FNS[resolved["bound"]](resolved["suite"], records)
            except (metrics.CertificationError, ValueError) as exc:
                raise ConfigError(f"run.bound: {exc}") from None
            bound_name = report.name
            bound_val = _g17(report.bound)
            satisfied = "true" if report.satisfied else "false"
            print(f"[bound] point={label} name={report.name} "
                  f"bound={report.bound:.6g} mean={report.statistic_mean:.6g} "
                  f"se={report.statistic_se:.3g} satisfied={report.satisfied} "
                  + " ".join(f"term.{k}={v:.6g}" for k, v in report.terms.items()))
            if resolved["certified"] and not report.satisfied:
                any_violation = True
        first = records[0]
        rows.append([
            resolved["suite"].name, resolved["algorithm"], resolved["n"],
            resolved["suite"].dim, first.total_steps,
            resolved["interval"] if resolved["interval"] is not None else "-",
            resolved["epochs"] if resolved["epochs"] is not None else "-",
            _g17(resolved["gamma"]) if resolved["gamma"] is not None else "-",
            len(seeds), stat_name, _g17(mean), _g17(se),
            bound_name, bound_val, satisfied,
            first.ledger.rounds, first.ledger.vectors, first.ledger.bytes,
            ";".join(_g17(v) for v in by_seed),
        ])
        elapsed = time.perf_counter() - started
        print(f"[run] point={label} seeds={len(seeds)} "
              f"steps={first.total_steps} rounds={first.ledger.rounds} "
              f"wall={elapsed:.2f}s")
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_HEADER)
        out.writerows(rows)
    print(f"[run] wrote {len(rows)} sweep point(s) to {out_dir}")
    if any_violation:
        print("[run] certified bound violated", file=sys.stderr)
        return 4
    return 0


# -- plan ----------------------------------------------------------------------

def cmd_plan(args) -> int:
    if args.T < args.N:
        raise ConfigError("plan requires T >= N")
    if args.L <= 0:
        raise ConfigError("plan requires L > 0")
    gamma = engine.corollary_gamma(args.L, args.T, args.N)
    interval = engine.plan_interval(args.T, args.N)
    rounds = args.T // interval
    num = 2.0 * args.L * args.delta + 4.0 * args.G ** 2 + args.sigma ** 2
    bound = num / math.sqrt(args.N * args.T)
    print(f"gamma = {_g17(gamma)}")
    print(f"interval = {interval}")
    print(f"rounds = {rounds}")
    print(f"rounds_at_interval_1 = {args.T}")
    print(f"round_reduction = {_g17(rounds / args.T)}")
    print(f"bound = {_g17(bound)}")
    return 0


# -- verify ---------------------------------------------------------------------

def _default_verify_suites():
    return [
        make_sine_family(4, 8, 1.0, 0.5, seed=0),
        make_logistic_family(4, 6, 32, 0.05, seed=0, shared_data=True),
    ]


def cmd_verify(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        suites = [build_family(cfg["objective"])]
    else:
        suites = _default_verify_suites()
    failures = 0
    for suite in suites:
        print(f"suite: {suite.cache_key}")
        for verdict in oracles.run_oracle_battery(suite, seed=args.seed):
            print("  " + verdict.line())
            failures += 0 if verdict.passed else 1

    # exhaustive check: every noise path of a tiny atomic instance obeys the
    # pathwise deviation bound and the expected-statistic bound
    amplitude, atoms, gamma, interval, steps = 1.0, (-0.3, 0.0, 0.3), 0.1, 2, 3
    phases = [[0.25], [5.8]]
    exact = oracles.small_instance_exhaustive(phases, amplitude, atoms,
                                              gamma, interval, steps)
    g_bound = (amplitude + max(abs(a) for a in atoms)) * 1.0
    dev_cap = metrics.lemma1_deviation_bound(gamma, interval, g_bound)
    dev_ok = exact["max_dev_sq"] <= dev_cap
    print(f"  [{'ok' if dev_ok else 'FAIL'}] exhaustive[{exact['n_paths']} paths]: "
          f"max deviation^2 {exact['max_dev_sq']:.6f} <= {dev_cap:.6f}")
    failures += 0 if dev_ok else 1

    # tamper controls: each check must reject its broken twin
    base = make_sine_family(2, 8, 1.0, 0.5, seed=1)
    controls = [
        ("finite_diff", oracles.finite_diff_check(oracles.tamper_gradients(base))),
        ("unbiasedness", oracles.mc_unbiasedness_check(
            oracles.tamper_sampler_bias(base), 0, np.zeros(base.dim))),
        ("noise_variance", oracles.noise_variance_check(
            oracles.tamper_noise_scale(base), 0, np.zeros(base.dim))),
        ("per_sample_norm", oracles.per_sample_norm_check(
            oracles.tamper_certificate_G(base))),
    ]
    for name, verdict in controls:
        rejected = not verdict.passed
        print(f"  [{'ok' if rejected else 'FAIL'}] control[{name}]: "
              + ("correctly rejected" if rejected else "tampered suite passed"))
        failures += 0 if rejected else 1

    if failures:
        print(f"verify: {failures} check(s) failed", file=sys.stderr)
        return 3
    print("verify: all checks passed")
    return 0


# -- slope -----------------------------------------------------------------------

def fit_rate_slope(axis_values, stat_by_seed, n_boot: int = 1000,
                   boot_seed: int = 0):
    """Log-log slope of the mean statistic vs the axis, with a 95 % CI from
    resampling seeds within each point.  Needs >= 3 points."""
    if len(axis_values) < 3:
        raise ValueError("need at least 3 sweep points to fit a slope")
    logx = np.log(np.asarray(axis_values, dtype=float))
    means = [math.fsum(vals) / len(vals) for vals in stat_by_seed]
    slope = float(np.polyfit(logx, np.log(means), 1)[0])
    gen = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=(boot_seed, 0xB007))))
    draws = np.empty(n_boot)
    for b in range(n_boot):
        ys = []
        for vals in stat_by_seed:
            pick = gen.integers(0, len(vals), size=len(vals))
            ys.append(math.fsum(vals[j] for j in pick) / len(vals))
        draws[b] = np.polyfit(logx, np.log(ys), 1)[0]
    lo, hi = np.percentile(draws, [2.5, 97.5])
    return slope, (float(lo), float(hi))


def read_summary(path: str) -> list[dict]:
    if not Path(path).is_file():
        raise ConfigError(f"summary file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(SUMMARY_HEADER) - set(rows[0]):
        raise ConfigError("not a summary.csv produced by `prsgd run`")
    return rows


def cmd_slope(args) -> int:
    rows = read_summary(args.summary)
    axis_col = "T" if args.axis == "T" else "N"
    other = "N" if args.axis == "T" else "T"
    if any(row["bound_value"] == "-" for row in rows):
        raise ConfigError("slope requires bound-certified sweep points "
                          "(run with a bound configured)")
    held = {row[other] for row in rows}
    if len(held) != 1:
        raise ConfigError(f"slope over {args.axis} requires a single {other} "
                          f"value, found {sorted(held)}")
    axis_values, by_seed = [], []
    for row in sorted(rows, key=lambda r: float(r[axis_col])):
        axis_values.append(float(row[axis_col]))
        by_seed.append([float(v) for v in row["stat_by_seed"].split(";")])
    if len(set(axis_values)) != len(axis_values):
        raise ConfigError(f"duplicate {args.axis} values in summary")
    try:
        slope, (lo, hi) = fit_rate_slope(axis_values, by_seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"axis = {args.axis}")
    print(f"points = {len(axis_values)}")
    print(f"slope = {slope:.6f}")
    print(f"ci95 = [{lo:.6f}, {hi:.6f}]")
    return 0


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prsgd",
        description="Deterministic simulator for parallel restarted SGD "
                    "with certified convergence bounds.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute a config (single run or sweep)")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_plan = sub.add_parser("plan", help="print step size, interval and bound "
                                         "for given constants")
    p_plan.add_argument("--T", type=int, required=True)
    p_plan.add_argument("--N", type=int, required=True)
    p_plan.add_argument("--L", type=float, required=True)
    p_plan.add_argument("--sigma", type=float, default=0.0)
    p_plan.add_argument("--G", type=float, default=0.0)
    p_plan.add_argument("--delta", type=float, default=1.0,
                        help="f(x0) - f* (default 1)")
    p_plan.set_defaults(func=cmd_plan)

    p_verify = sub.add_parser("verify", help="run the oracle battery")
    p_verify.add_argument("--config", default=None,
                          help="verify the objective from this config instead "
                               "of the built-in suites")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_slope = sub.add_parser("slope", help="fit the log-log rate slope from a "
                                           "summary.csv")
    p_slope.add_argument("summary")
    p_slope.add_argument("--axis", choices=("T", "N"), required=True)
    p_slope.set_defaults(func=cmd_slope)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
