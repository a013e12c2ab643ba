"""Experiment orchestration CLI.

Subcommands:
  model     -- evaluate the eight analytic FCT curves over a load grid
  simulate  -- one packet-level run, per-flow CSV plus summary CSV
  sweep     -- (scheme x load x workload x seed) grid of runs, aggregated
  oracle    -- brute-force queueing validation report

All outputs are plain CSV and deterministic given the seeds.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import analytic, metrics, oracle, simcore, workload

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCOMPLETE = 3

SCHEMES = {
    "tcp": ("tcp", "off"),
    "repflow": ("tcp", "short_flows"),
    "dctcp_like": ("dctcp_like", "off"),
    "repflow_dctcp": ("dctcp_like", "short_flows"),
}

PRESETS = {
    "toy-fig3": lambda: simcore.toy_fig3_config(),
    "desk-4pod": lambda: simcore.ScenarioConfig(pods=4, link_mbps=100.0,
                                                link_delay_us=10.0,
                                                buffer_pkts=100, duration=0.5),
    # paper-scale geometry; expect hours per run at 1 Gbps
    "paper-16pod": lambda: simcore.ScenarioConfig(pods=16, link_mbps=1000.0,
                                                  link_delay_us=2.0,
                                                  buffer_pkts=100,
                                                  duration=0.5),
}

_SECTION_OF = {
    "topology": "topology", "pods": "topology", "link_mbps": "topology",
    "link_delay_us": "topology", "buffer_pkts": "topology",
    "workload": "traffic", "load": "traffic", "duration": "traffic",
    "toy_large_flow": "traffic", "toy_short_size": "traffic",
    "toy_short_rate": "traffic", "toy_host_mult": "traffic",
    "protocol": "protocol", "replication": "protocol",
    "short_flow_threshold": "protocol", "initial_window": "protocol",
    "max_window": "protocol", "ecn_threshold": "protocol",
    "min_rto_s": "protocol", "rto_rtt_mult": "protocol",
    "seed": "run", "max_drain_s": "run",
}

_FIELD_TYPES = {f.name: f.type for f in fields(simcore.ScenarioConfig)}


def _coerce(name: str, raw: str):
    ftype = _FIELD_TYPES[name]
    if ftype in ("int", "int | None"):
        return int(raw)
    if ftype == "float":
        return float(raw)
    if ftype == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


def load_scenario_file(path: str) -> simcore.ScenarioConfig:
    """Parse a key = value scenario file into a ScenarioConfig."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise simcore.ConfigError(f"cannot read scenario file {path}")
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in _SECTION_OF:
                raise simcore.ConfigError(
                    f"{path}: unknown field {key!r} in section [{section}]")
            if _SECTION_OF[key] != section:
                raise simcore.ConfigError(
                    f"{path}: field {key!r} belongs in section [{_SECTION_OF[key]}]")
            try:
                values[key] = _coerce(key, raw)
            except ValueError as exc:
                raise simcore.ConfigError(f"{path}: field {key!r}: {exc}") from exc
    return simcore.ScenarioConfig(**values)


def _apply_flag_overrides(cfg: simcore.ScenarioConfig, args) -> simcore.ScenarioConfig:
    mapping = {
        "pods": "pods", "link_mbps": "link_mbps",
        "link_delay_us": "link_delay_us", "buffer_pkts": "buffer_pkts",
        "workload": "workload", "load": "load", "duration": "duration",
        "protocol": "protocol", "replication": "replication",
        "seed": "seed", "short_flow_threshold": "short_flow_threshold",
        "initial_window": "initial_window", "max_window": "max_window",
        "ecn_threshold": "ecn_threshold", "min_rto_s": "min_rto_s",
        "max_drain_s": "max_drain_s", "large_flow": "toy_large_flow",
    }
    overrides = {}
    for argname, fieldname in mapping.items():
        val = getattr(args, argname, None)
        if val is not None:
            if fieldname == "toy_large_flow":
                val = val == "on"
            overrides[fieldname] = val
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _show_config(cfg: simcore.ScenarioConfig) -> None:
    by_section: dict[str, list[str]] = {}
    for f in fields(cfg):
        section = _SECTION_OF[f.name]
        by_section.setdefault(section, []).append(f.name)
    for section, names in by_section.items():
        print(f"[{section}]")
        for name in names:
            print(f"{name} = {getattr(cfg, name)}")
        print()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# -- model --------------------------------------------------------------------


def cmd_model(args) -> int:
    dist = workload.resolve_workload(args.workload)
    loads = _parse_loads(args.loads)
    rows = [(rho, curve, val)
            for rho, curve, val in analytic.evaluate_curves(
                dist, loads, k=args.initial_window, M=args.max_window,
                S_L=args.short_flow_threshold, epsilon=args.epsilon)]
    out = Path(args.out) / "model.csv"
    _write_csv(out, ["load", "curve", "value"], rows)
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


def _parse_loads(spec: str) -> list[float]:
    return [float(tok) for tok in spec.split(",") if tok.strip()]


# -- simulate -----------------------------------------------------------------

FLOW_HEADER = ["flow_id", "size_pkts", "start_s", "finish_s", "fct_s",
               "norm_fct", "replicated", "winner_was_replica", "src", "dst"]
SUMMARY_HEADER = ["scheme", "workload", "load", "bin", "metric", "value",
                  "seed_count"]


def _scheme_name(cfg: simcore.ScenarioConfig) -> str:
    for name, (proto, rep) in SCHEMES.items():
        if (proto, rep) == (cfg.protocol, cfg.replication):
            return name
    return cfg.protocol


def _summary_rows(scheme: str, wl: str, load: float,
                  summary: metrics.FctSummary, seed_count: int):
    rows = []
    for bin_name, stats in summary.bins.items():
        rows.append((scheme, wl, load, bin_name, "count", stats.count, seed_count))
        if stats.mean_norm_fct is not None:
            rows.append((scheme, wl, load, bin_name, "mean_norm_fct",
                         stats.mean_norm_fct, seed_count))
            rows.append((scheme, wl, load, bin_name, "p99_norm_fct",
                         stats.p99_norm_fct, seed_count))
    rows.append((scheme, wl, load, "all", "incomplete", summary.incomplete,
                 seed_count))
    if scheme in ("repflow", "repflow_dctcp"):
        rows.append((scheme, wl, load, "all", "overhead_fraction",
                     summary.overhead_fraction, seed_count))
    return rows


def _resolve_scenario(args) -> simcore.ScenarioConfig:
    if args.scenario:
        cfg = load_scenario_file(args.scenario)
    elif args.preset:
        cfg = PRESETS[args.preset]()
    else:
        cfg = simcore.ScenarioConfig()
    if args.scheme:
        proto, rep = SCHEMES[args.scheme]
        cfg = replace(cfg, protocol=proto, replication=rep)
    return _apply_flag_overrides(cfg, args)


def cmd_simulate(args) -> int:
    try:
        cfg = _resolve_scenario(args)
    except (simcore.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.show_config:
        _show_config(cfg)
        return EXIT_OK
    result = simcore.run(cfg)
    out = Path(args.out)
    flow_rows = [(r.flow_id, r.size_pkts, r.start_s, r.finish_s, r.fct_s,
                  r.norm_fct, int(r.replicated), int(r.winner_was_replica),
                  r.src, r.dst) for r in result.records]
    _write_csv(out / "flows.csv", FLOW_HEADER, flow_rows)
    scheme = _scheme_name(cfg)
    wl = cfg.workload if cfg.topology == "fat_tree" else "toy"
    load = cfg.load if cfg.topology == "fat_tree" else float("nan")
    _write_csv(out / "summary.csv", SUMMARY_HEADER,
               _summary_rows(scheme, wl, load, result.summary, 1))
    print(f"completed {len(result.records)} flows, {result.incomplete} incomplete, "
          f"{result.data_dropped} data drops, trace {result.trace_hash[:12]}")
    return EXIT_OK if result.drained else EXIT_INCOMPLETE


# -- sweep --------------------------------------------------------------------

SWEEP_HEADER = ["scheme", "workload", "load", "bin", "metric", "value",
                "value_std", "seed_count"]


def _run_cell(cfg: simcore.ScenarioConfig) -> simcore.RunResult:
    return simcore.run(cfg)


def sweep_cells(base: simcore.ScenarioConfig, schemes, loads, workloads, seeds):
    cells = []
    for wl in workloads:
        for scheme in schemes:
            proto, rep = SCHEMES[scheme]
            for load in loads:
                for seed in seeds:
                    cells.append((scheme, wl, load, seed,
                                  replace(base, workload=wl, load=load,
                                          seed=seed, protocol=proto,
                                          replication=rep)))
    return cells


def aggregate_sweep(results):
    """Across-seed mean and standard deviation of each per-cell metric.

    `results` is a list of (scheme, workload, load, seed, RunResult).
    Percentiles are computed over the records pooled across seeds, mean
    metrics as across-seed means of the per-seed values.
    """
    groups: dict[tuple, list] = {}
    for scheme, wl, load, seed, res in results:
        groups.setdefault((scheme, wl, load), []).append(res)
    rows = []
    for (scheme, wl, load), cell in sorted(groups.items()):
        n = len(cell)
        thresh = cell[0].config.short_flow_threshold
        pooled = {
            metrics.SHORT_BIN: [], metrics.LARGE_BIN: [], metrics.ALL_BIN: [],
        }
        for res in cell:
            for r in res.records:
                pooled[metrics.ALL_BIN].append(r.norm_fct)
                key = metrics.SHORT_BIN if r.size_pkts <= thresh else metrics.LARGE_BIN
                pooled[key].append(r.norm_fct)
        for bin_name, vals in pooled.items():
            per_seed_means = []
            for res in cell:
                stats = res.summary.bins.get(bin_name)
                if stats is not None and stats.mean_norm_fct is not None:
                    per_seed_means.append(stats.mean_norm_fct)
            rows.append((scheme, wl, load, bin_name, "count", len(vals), "", n))
            if per_seed_means:
                arr = np.asarray(per_seed_means)
                rows.append((scheme, wl, load, bin_name, "mean_norm_fct",
                             float(arr.mean()), float(arr.std()), n))
            if vals:
                rows.append((scheme, wl, load, bin_name, "p99_norm_fct",
                             metrics.nearest_rank_p99(vals), "", n))
        incomplete = sum(res.incomplete for res in cell)
        rows.append((scheme, wl, load, metrics.ALL_BIN, "incomplete",
                     incomplete, "", n))
        if scheme in ("repflow", "repflow_dctcp"):
            ov = np.asarray([res.summary.overhead_fraction for res in cell])
            rows.append((scheme, wl, load, metrics.ALL_BIN, "overhead_fraction",
                         float(ov.mean()), float(ov.std()), n))
    return rows


def run_sweep(base, schemes, loads, workloads, seeds, jobs=None):
    cells = sweep_cells(base, schemes, loads, workloads, seeds)
    jobs = jobs or int(os.environ.get("FCTSIM_JOBS", "0")) or os.cpu_count() or 1
    results = []
    failures = []
    if jobs <= 1:
        for scheme, wl, load, seed, cfg in cells:
            try:
                results.append((scheme, wl, load, seed, _run_cell(cfg)))
            except Exception as exc:  # noqa: BLE001 - partial results survive
                failures.append((scheme, wl, load, seed, str(exc)))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [(scheme, wl, load, seed, pool.submit(_run_cell, cfg))
                    for scheme, wl, load, seed, cfg in cells]
            for scheme, wl, load, seed, fut in futs:
                try:
                    results.append((scheme, wl, load, seed, fut.result()))
                except Exception as exc:  # noqa: BLE001
                    failures.append((scheme, wl, load, seed, str(exc)))
    return results, failures


def cmd_sweep(args) -> int:
    if args.preset:
        base = PRESETS[args.preset]()
    else:
        base = simcore.ScenarioConfig()
    base = _apply_flag_overrides(base, args)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for s in schemes:
        if s not in SCHEMES:
            print(f"error: unknown scheme {s!r}", file=sys.stderr)
            return EXIT_CONFIG
    loads = _parse_loads(args.loads)
    workloads = [w.strip() for w in args.workloads.split(",") if w.strip()]
    seeds = list(range(1, args.seeds + 1))
    results, failures = run_sweep(base, schemes, loads, workloads, seeds,
                                  jobs=args.jobs)
    rows = aggregate_sweep(results)
    out = Path(args.out) / "sweep.csv"
    _write_csv(out, SWEEP_HEADER, rows)
    print(f"wrote {out} ({len(rows)} rows, {len(results)} cells)")
    for scheme, wl, load, seed, err in failures:
        print(f"cell failed: {scheme}/{wl}/load={load}/seed={seed}: {err}",
              file=sys.stderr)
    return EXIT_OK if not failures else 1


# -- oracle -------------------------------------------------------------------


def oracle_report(burst: float, n_arrivals: int, seed: int, epsilon: float,
                  pk_loads=(0.2, 0.5, 0.8), busy_loads=(0.3, 0.5, 0.7)):
    """Analytic-vs-empirical validation rows:
    (experiment, load, analytic, empirical, rel_err, tolerance, passed)."""
    rows = []
    for rho in pk_loads:
        res = oracle.simulate_mg1(oracle.Mg1Config(rho, burst, n_arrivals, seed))
        expect = analytic.mean_queueing_delay(rho, burst)
        got = float(res.waits.mean())
        rel = abs(got - expect) / expect
        rows.append(("pk_mean_wait", rho, expect, got, rel, 0.05, rel <= 0.05))
        util_err = abs(res.utilization - rho) / rho
        rows.append(("utilization", rho, rho, res.utilization, util_err, 0.01,
                     util_err <= 0.01))
    res = oracle.simulate_mg1(oracle.Mg1Config(0.5, burst, n_arrivals, seed))
    w_tail = analytic.tail_queueing_delay(0.5, burst)
    emp_tail = float(np.mean(res.waits > w_tail))
    rows.append(("tail_prob_at_2ln10EW", 0.5, 0.01, emp_tail,
                 abs(emp_tail - 0.01) / 0.01,
                 "band[0.005,0.02]", 0.005 <= emp_tail <= 0.02))
    for rho in busy_loads:
        pair = oracle.simulate_replicated_pair(
            oracle.Mg1Config(rho, burst, n_arrivals, seed), epsilon)
        expect = ((1.0 + epsilon) * rho) ** 2
        got = pair.both_busy_fraction
        err = abs(got - expect)
        rows.append(("both_busy_fraction", rho, expect, got, err, 0.01,
                     err <= 0.01))
        min_mean = float(pair.min_waits.mean())
        single_mean = float(pair.single_waits.mean())
        rows.append(("min_wait_vs_single", rho, single_mean, min_mean,
                     min_mean / single_mean if single_mean else 0.0, "<1",
                     min_mean < single_mean))
    return rows


def cmd_oracle(args) -> int:
    rows = oracle_report(args.burst, args.arrivals, args.seed, args.epsilon)
    out = Path(args.out) / "oracle.csv"
    _write_csv(out, ["experiment", "load", "analytic", "empirical",
                     "error", "tolerance", "passed"], rows)
    n_fail = sum(1 for r in rows if not r[-1])
    for r in rows:
        status = "PASS" if r[-1] else "FAIL"
        print(f"{status} {r[0]} load={r[1]} analytic={r[2]:.6g} "
              f"empirical={r[3]:.6g}")
    print(f"wrote {out}")
    return EXIT_OK if n_fail == 0 else 1


# -- entry point --------------------------------------------------------------


def _add_common_sim_flags(p):
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--pods", type=int)
    p.add_argument("--link-mbps", dest="link_mbps", type=float)
    p.add_argument("--link-delay-us", dest="link_delay_us", type=float)
    p.add_argument("--buffer-pkts", dest="buffer_pkts", type=int)
    p.add_argument("--workload")
    p.add_argument("--load", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--protocol", choices=simcore.PROTOCOLS)
    p.add_argument("--replication", choices=simcore.REPLICATION_MODES)
    p.add_argument("--scheme", choices=sorted(SCHEMES))
    p.add_argument("--short-flow-threshold", dest="short_flow_threshold", type=int)
    p.add_argument("--initial-window", dest="initial_window", type=int)
    p.add_argument("--max-window", dest="max_window", type=int)
    p.add_argument("--ecn-threshold", dest="ecn_threshold", type=int)
    p.add_argument("--min-rto-s", dest="min_rto_s", type=float)
    p.add_argument("--max-drain-s", dest="max_drain_s", type=float)
    p.add_argument("--large-flow", dest="large_flow", choices=("on", "off"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fctsim")
    parser.add_argument("--out", default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="analytic FCT curves")
    p.add_argument("--workload", default="web_search")
    p.add_argument("--loads", default=",".join(f"{x/100:g}" for x in range(5, 91, 5)))
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--initial-window", dest="initial_window", type=int, default=12)
    p.add_argument("--max-window", dest="max_window", type=int, default=44)
    p.add_argument("--short-flow-threshold", dest="short_flow_threshold",
                   type=int, default=68)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("simulate", help="one packet-level run")
    p.add_argument("--scenario", help="scenario file (key = value sections)")
    p.add_argument("--show-config", action="store_true")
    _add_common_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of runs")
    p.add_argument("--schemes", default="tcp,repflow")
    p.add_argument("--loads", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8")
    p.add_argument("--workloads", default="web_search")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--jobs", type=int, default=None)
    _add_common_sim_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="queueing validation report")
    p.add_argument("--burst", type=float, default=44.0)
    p.add_argument("--arrivals", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
