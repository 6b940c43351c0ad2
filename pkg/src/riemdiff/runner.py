"""Experiment runner and CLI.

Reads a JSON experiment config (or a named preset), builds the manifold,
graph, mixing matrix, problem, and constants, executes one run per seed, and
writes:

* ``trace_<alg>_<graph>_<seed>.csv``  -- per-iteration metrics, one per seed
* ``aggregate_<alg>_<graph>.csv``     -- per-t arithmetic mean over seeds
* ``summary.json``                    -- constants, final metrics, violations

CSV columns: t, consensus, consensus_db, frechet_var, msd, msd_db, fgap_bar,
bound_consensus, bound_gap, clip_count, flags.  dB columns are
10 log10(max(x, 1e-300)); floats are written with repr so every value
round-trips exactly.  In aggregates, dB columns are recomputed from the mean
linear values and the flags column counts flagged seed-records.

Subcommands: ``run``, ``validate``, ``constants``, ``lemmas``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .curvature import (compute_constants, consensus_step_size,
                        theorem_constants)
from .lemmas import cosine_law_suite, log_lipschitz_suite, variance_suite
from .manifolds import euclidean_spec, grassmann_spec, make_manifold, sphere_spec
from .network import (AssumptionViolation, gen_complete, gen_cycle, gen_er,
                      load_mixing_csv, metropolis_weights)
from .optimizer import RunConfig, run, run_centralized
from .problems import (gen_karcher_shards, gen_spiked_data, load_samples_csv,
                       make_karcher_problem, make_pca_problem,
                       partition_samples)

__all__ = ["ConfigError", "UnknownPreset", "ExperimentConfig", "BuiltExperiment",
           "ExperimentResult", "load_config", "parse_config", "paper_preset",
           "preset_names", "build_experiment", "run_experiment", "cli_main",
           "CSV_COLUMNS", "db", "write_trace_csv", "read_trace_csv",
           "write_aggregate_csv"]

DB_FLOOR = 1e-300
CSV_COLUMNS = ["t", "consensus", "consensus_db", "frechet_var", "msd", "msd_db",
               "fgap_bar", "bound_consensus", "bound_gap", "clip_count", "flags"]

# substream tags for experiment-level randomness (independent of run seeds)
_GRAPH_KEY = 0xA1
_DATA_KEY = 0xA2
_CENTER_KEY = 0xA3
_PROBE_KEY = 0xA4
_CERT_KEY = 0xA5


class ConfigError(Exception):
    """Config failed schema validation; message cites the offending key."""


class UnknownPreset(Exception):
    pass


# -- config schema ------------------------------------------------------------

_TOP_KEYS = {"algorithm", "T", "eta0", "eta_fixed", "s", "batch_size",
             "record_every", "seeds", "data_seed", "enforce_assumptions",
             "check_contraction", "manifold", "graph", "problem",
             "output_dir", "emit_bounds", "threads"}
_MANIFOLD_KEYS = {"euclidean": {"kind", "d", "D"},
                  "sphere": {"kind", "d", "D"},
                  "grassmann": {"kind", "d", "p", "D"}}
_GRAPH_KEYS = {"er": {"type", "n", "p"},
               "cycle": {"type", "n"},
               "complete": {"type", "n"},
               "csv": {"type", "path"}}
_PROBLEM_KEYS = {"pca": {"type", "spike_gap", "noise", "m_per_agent",
                         "g_factor", "n_probe"},
                 "karcher": {"type", "radius", "m_per_agent",
                             "g_factor", "n_probe"},
                 "csv": {"type", "path", "normalize", "g_factor", "n_probe"}}


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    T: int
    manifold: dict
    graph: dict
    problem: dict
    eta0: float | str | None = None       # float or "auto" = min{1, D/G}
    eta_fixed: float | None = None
    s: float | None = None                # None = C2 / (2 C1)
    batch_size: int = 32
    record_every: int = 10
    seeds: tuple = (0,)
    data_seed: int = 2024
    enforce_assumptions: bool = True
    check_contraction: bool = True
    output_dir: str = "out"
    emit_bounds: bool = True
    threads: int = 1

    def as_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm, "T": self.T,
            "eta0": self.eta0, "eta_fixed": self.eta_fixed, "s": self.s,
            "batch_size": self.batch_size, "record_every": self.record_every,
            "seeds": list(self.seeds), "data_seed": self.data_seed,
            "enforce_assumptions": self.enforce_assumptions,
            "check_contraction": self.check_contraction,
            "manifold": dict(self.manifold), "graph": dict(self.graph),
            "problem": dict(self.problem), "output_dir": self.output_dir,
            "emit_bounds": self.emit_bounds, "threads": self.threads,
        }
        return d


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _check_keys(d: dict, allowed: set, path: str):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown config key '{path}{k}'"
                              f" (allowed: {', '.join(sorted(allowed))})")


def _check_variant(d: dict, variants: dict, tag: str, path: str) -> str:
    _require(isinstance(d, dict), f"'{path[:-1]}' must be an object")
    kind = d.get(tag)
    _require(kind in variants,
             f"'{path}{tag}' must be one of {sorted(variants)}, got {kind!r}")
    _check_keys(d, variants[kind], path)
    return kind


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config dict; unknown keys and type errors cite the key path."""
    _require(isinstance(raw, dict), "config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "")
    for key in ("algorithm", "T", "manifold", "graph", "problem"):
        _require(key in raw, f"missing required config key '{key}'")

    alg = raw["algorithm"]
    _require(alg in ("diffusion_diminishing", "diffusion_fixed", "centralized_rsgd"),
             f"'algorithm' must be diffusion_diminishing | diffusion_fixed |"
             f" centralized_rsgd, got {alg!r}")
    T = raw["T"]
    _require(isinstance(T, int) and T >= 1, "'T' must be an integer >= 1")

    mkind = _check_variant(raw["manifold"], _MANIFOLD_KEYS, "kind", "manifold.")
    man = raw["manifold"]
    _require(isinstance(man.get("d"), int) and man["d"] >= 1,
             "'manifold.d' must be an integer >= 1")
    if mkind == "grassmann":
        _require(isinstance(man.get("p"), int) and 1 <= man["p"] < man["d"],
                 "'manifold.p' must satisfy 1 <= p < d")
    if "D" in man:
        _require(isinstance(man["D"], (int, float)) and man["D"] > 0,
                 "'manifold.D' must be a positive number")

    gtype = _check_variant(raw["graph"], _GRAPH_KEYS, "type", "graph.")
    g = raw["graph"]
    if gtype in ("er", "cycle", "complete"):
        _require(isinstance(g.get("n"), int) and g["n"] >= 2,
                 "'graph.n' must be an integer >= 2")
    if gtype == "er":
        _require(isinstance(g.get("p"), (int, float)) and 0 < g["p"] <= 1,
                 "'graph.p' must be in (0, 1]")
    if gtype == "csv":
        _require(isinstance(g.get("path"), str), "'graph.path' must be a string")

    ptype = _check_variant(raw["problem"], _PROBLEM_KEYS, "type", "problem.")
    p = raw["problem"]
    if ptype in ("pca", "csv"):
        _require(mkind == "grassmann",
                 f"problem type '{ptype}' requires a grassmann manifold")
    if ptype == "pca":
        for k in ("spike_gap", "noise", "m_per_agent"):
            _require(k in p, f"missing required config key 'problem.{k}'")
        _require(isinstance(p["m_per_agent"], int) and p["m_per_agent"] >= 1,
                 "'problem.m_per_agent' must be an integer >= 1")
    if ptype == "karcher":
        for k in ("radius", "m_per_agent"):
            _require(k in p, f"missing required config key 'problem.{k}'")
        _require(p["radius"] > 0, "'problem.radius' must be positive")
    if ptype == "csv":
        _require(isinstance(p.get("path"), str), "'problem.path' must be a string")

    eta0 = raw.get("eta0")
    eta_fixed = raw.get("eta_fixed")
    if alg == "diffusion_fixed":
        _require(isinstance(eta_fixed, (int, float)) and eta_fixed > 0,
                 "diffusion_fixed requires 'eta_fixed' > 0")
    else:
        _require(eta0 == "auto" or (isinstance(eta0, (int, float)) and eta0 > 0),
                 f"{alg} requires 'eta0' > 0 or \"auto\"")
    s = raw.get("s")
    if s is not None:
        _require(isinstance(s, (int, float)) and s > 0, "'s' must be positive")

    seeds = raw.get("seeds", [0])
    _require(isinstance(seeds, list) and seeds
             and all(isinstance(x, int) for x in seeds),
             "'seeds' must be a non-empty list of integers")
    for key, lo in (("batch_size", 1), ("record_every", 1), ("threads", 1)):
        if key in raw:
            _require(isinstance(raw[key], int) and raw[key] >= lo,
                     f"'{key}' must be an integer >= {lo}")
    for key in ("enforce_assumptions", "check_contraction", "emit_bounds"):
        if key in raw:
            _require(isinstance(raw[key], bool), f"'{key}' must be a boolean")
    if "data_seed" in raw:
        _require(isinstance(raw["data_seed"], int), "'data_seed' must be an integer")
    if "output_dir" in raw:
        _require(isinstance(raw["output_dir"], str), "'output_dir' must be a string")

    return ExperimentConfig(
        algorithm=alg, T=T,
        manifold=dict(man), graph=dict(g), problem=dict(p),
        eta0=eta0, eta_fixed=eta_fixed, s=s,
        batch_size=raw.get("batch_size", 32),
        record_every=raw.get("record_every", 10),
        seeds=tuple(seeds),
        data_seed=raw.get("data_seed", 2024),
        enforce_assumptions=raw.get("enforce_assumptions", True),
        check_contraction=raw.get("check_contraction", True),
        output_dir=raw.get("output_dir", "out"),
        emit_bounds=raw.get("emit_bounds", True),
        threads=raw.get("threads", 1),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"config parse error at {path}:{e.lineno}:{e.colno}: {e.msg}") from e
    return parse_config(raw)


# -- presets --------------------------------------------------------------------

def _pca_full(n: int, graph: dict, alg_steps: dict, T: int = 10_000) -> dict:
    cfg = {
        "T": T, "batch_size": 32, "record_every": 10,
        "seeds": list(range(5)),
        "manifold": {"kind": "grassmann", "d": 784, "p": 5, "D": 1.1},
        "graph": graph,
        "problem": {"type": "pca", "spike_gap": 0.5, "noise": 0.5,
                    "m_per_agent": 60_000 // n},
    }
    cfg.update(alg_steps)
    return cfg


def _pca_desk(graph: dict, alg_steps: dict) -> dict:
    cfg = {
        "T": 5000, "batch_size": 16, "record_every": 10,
        "seeds": list(range(10)),
        "manifold": {"kind": "grassmann", "d": 20, "p": 3, "D": 1.1},
        "graph": graph,
        "problem": {"type": "pca", "spike_gap": 0.5, "noise": 0.5,
                    "m_per_agent": 200},
    }
    cfg.update(alg_steps)
    return cfg


_DIM_ER = {"algorithm": "diffusion_diminishing", "eta0": 0.1, "s": 0.1}
_DIM_CYCLE = {"algorithm": "diffusion_diminishing", "eta0": 0.05, "s": 0.05}
_FIX_ER = {"algorithm": "diffusion_fixed", "eta_fixed": 0.002, "s": 0.005}
_FIX_CYCLE = {"algorithm": "diffusion_fixed", "eta_fixed": 0.005, "s": 0.005}


def _presets() -> dict:
    out = {}
    for n in (35, 70, 100):
        er = {"type": "er", "n": n, "p": 0.3}
        cy = {"type": "cycle", "n": n}
        out[f"er{n}-diminishing"] = _pca_full(n, er, _DIM_ER)
        out[f"er{n}-fixed"] = _pca_full(n, er, _FIX_ER)
        out[f"cycle{n}-diminishing"] = _pca_full(n, cy, _DIM_CYCLE)
        out[f"cycle{n}-fixed"] = _pca_full(n, cy, _FIX_CYCLE)
    er10 = {"type": "er", "n": 10, "p": 0.5}
    cy10 = {"type": "cycle", "n": 10}
    out["desk-er10-diminishing"] = _pca_desk(er10, _DIM_ER)
    out["desk-er10-fixed"] = _pca_desk(er10, _FIX_ER)
    out["desk-cycle10-diminishing"] = _pca_desk(cy10, _DIM_CYCLE)
    out["desk-cycle10-fixed"] = _pca_desk(cy10, _FIX_CYCLE)
    # certified geodesically-convex instance at the theorem's prescribed steps;
    # G is a deliberately conservative a.s. bound (any upper bound is valid and
    # eta_0 = min{1, D/G} then keeps the O(1/t) regime inside the horizon)
    out["theorem-karcher-cycle10"] = {
        "algorithm": "diffusion_diminishing", "eta0": "auto", "s": None,
        "T": 10_000, "batch_size": 8, "record_every": 1,
        "seeds": list(range(20)),
        "check_contraction": False,
        "manifold": {"kind": "sphere", "d": 2},
        "graph": cy10,
        "problem": {"type": "karcher", "radius": 0.35, "m_per_agent": 20,
                    "g_factor": 8.0},
    }
    return out


def preset_names() -> list:
    return sorted(_presets())


def paper_preset(name: str) -> ExperimentConfig:
    presets = _presets()
    if name not in presets:
        raise UnknownPreset(
            f"unknown preset {name!r}; choose from: {', '.join(sorted(presets))}")
    return parse_config(presets[name])


# -- experiment assembly ----------------------------------------------------------

@dataclass
class BuiltExperiment:
    cfg: ExperimentConfig
    manifold: object
    graph_label: str
    mixing: object
    problem: object
    gc: object
    tc: object
    eta0: float | None
    s: float

    @property
    def run_label(self) -> str:
        return f"{self.cfg.algorithm}_{self.graph_label}"


def _build_manifold_spec(man: dict):
    kind = man["kind"]
    if kind == "euclidean":
        return euclidean_spec(man["d"], man.get("D", 2.0))
    if kind == "sphere":
        return sphere_spec(man["d"], man.get("D", math.pi / 4))
    return grassmann_spec(man["d"], man["p"], man.get("D", 1.1))


def build_experiment(cfg: ExperimentConfig) -> BuiltExperiment:
    spec = _build_manifold_spec(cfg.manifold)
    man = make_manifold(spec)
    g = cfg.graph
    if g["type"] == "er":
        graph = gen_er(g["n"], g["p"], rngmod.substream(cfg.data_seed, _GRAPH_KEY))
        label = f"er{g['n']}"
    elif g["type"] == "cycle":
        graph = gen_cycle(g["n"])
        label = f"cycle{g['n']}"
    elif g["type"] == "complete":
        graph = gen_complete(g["n"])
        label = f"complete{g['n']}"
    else:
        mixing = load_mixing_csv(g["path"])
        graph, label = mixing.graph, "csvW"
    if g["type"] != "csv":
        mixing = metropolis_weights(graph)
    n = mixing.n

    p = cfg.problem
    g_factor = p.get("g_factor", 2.0)
    n_probe = p.get("n_probe", 200)
    data_rng = rngmod.substream(cfg.data_seed, _DATA_KEY)
    probe_rng = rngmod.substream(cfg.data_seed, _PROBE_KEY)
    if p["type"] == "pca":
        shards, _ = gen_spiked_data(spec.d, spec.p, n, p["m_per_agent"],
                                    p["spike_gap"], p["noise"], data_rng)
        problem = make_pca_problem(shards, spec.p, spec.D, cfg.batch_size,
                                   probe_rng, n_probe, g_factor)
    elif p["type"] == "karcher":
        center = man.random_point(rngmod.substream(cfg.data_seed, _CENTER_KEY))
        shards = gen_karcher_shards(man, center, p["radius"], n,
                                    p["m_per_agent"], data_rng)
        problem = make_karcher_problem(man, shards, cfg.batch_size,
                                       probe_rng, n_probe, g_factor)
    else:
        data = load_samples_csv(p["path"], p.get("normalize", True))
        if data.shape[1] != spec.d:
            raise ConfigError(
                f"problem.csv has {data.shape[1]} columns, manifold.d is {spec.d}")
        shards = partition_samples(data, n, data_rng)
        problem = make_pca_problem(shards, spec.p, spec.D, cfg.batch_size,
                                   probe_rng, n_probe, g_factor)

    gc = compute_constants(spec)
    tc = theorem_constants(gc, mixing.sigma2, problem.delta_hat,
                           problem.sigma_hat, n, problem.G)
    eta0 = tc.eta0 if cfg.eta0 == "auto" else cfg.eta0
    s = cfg.s if cfg.s is not None else consensus_step_size(gc)
    return BuiltExperiment(cfg, man, label, mixing, problem, gc, tc, eta0, s)


def certify_constants(built: BuiltExperiment, n_triples: int = 200,
                      n_configs: int = 20) -> bool:
    """Quick Monte-Carlo gate for the adopted constants (full gate = lemmas suite)."""
    rng = rngmod.substream(built.cfg.data_seed, _CERT_KEY)
    reports = [
        cosine_law_suite(built.manifold, built.gc, n_triples, rng),
        log_lipschitz_suite(built.manifold, built.gc, n_triples, rng),
    ]
    reports += variance_suite(built.manifold, built.gc, built.mixing,
                              n_configs, rng)
    return all(r.ok for r in reports)


# -- CSV / JSON output -------------------------------------------------------------

def db(x: float) -> float:
    """10 log10(x) with the documented 1e-300 floor; nan passes through."""
    if math.isnan(x):
        return math.nan
    return 10.0 * math.log10(max(x, DB_FLOOR))


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _record_row(r) -> list:
    return [r.t, r.consensus, db(r.consensus), r.frechet_var, r.msd,
            db(r.msd), r.fgap_bar, r.bound_consensus, r.bound_gap,
            r.clip_count, r.flags]


def write_trace_csv(path, trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for r in trace.records:
            w.writerow([_fmt(v) for v in _record_row(r)])


def read_trace_csv(path) -> dict:
    """Columns as arrays (floats; 't' and 'clip_count' ints; 'flags' strings)."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        rows = [row for row in reader if row]
    out: dict = {}
    cols = list(zip(*rows))
    for name, col in zip(CSV_COLUMNS, cols):
        if name == "flags":
            out[name] = list(col)
        elif name == "t":
            out[name] = np.array([int(v) for v in col])
        else:
            # clip_count is integer in traces but a float mean in aggregates
            out[name] = np.array([float(v) for v in col])
    return out


def write_aggregate_csv(path, traces: list) -> None:
    """Per-t arithmetic mean over seed traces (identical t grids required)."""
    ts = [r.t for r in traces[0].records]
    for tr in traces[1:]:
        if [r.t for r in tr.records] != ts:
            raise ValueError("seed traces disagree on the t grid")
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for k, t in enumerate(ts):
            recs = [tr.records[k] for tr in traces]
            mean = lambda name: float(np.mean([getattr(r, name) for r in recs]))
            cons, fvar = mean("consensus"), mean("frechet_var")
            msd, fgap = mean("msd"), mean("fgap_bar")
            bc, bg = mean("bound_consensus"), mean("bound_gap")
            clip = float(np.mean([r.clip_count for r in recs]))
            flagged = sum(1 for r in recs if r.flags)
            row = [t, cons, db(cons), fvar, msd, db(msd), fgap, bc, bg,
                   clip, str(flagged)]
            w.writerow([_fmt(v) for v in row])


# -- experiment execution ------------------------------------------------------------

@dataclass
class ExperimentResult:
    cfg: ExperimentConfig
    built: BuiltExperiment
    traces: dict              # seed -> Trace
    trace_paths: dict         # seed -> Path
    aggregate_path: Path
    summary_path: Path
    summary: dict


def _run_one_seed(base: RunConfig, seed: int, algorithm: str, problem,
                  mixing, gc, tc):
    rc = replace(base, seed=seed)
    if algorithm == "centralized_rsgd":
        return run_centralized(rc, problem, tc)
    return run(rc, problem, mixing, gc, tc)


def _constants_dict(built: BuiltExperiment, certified: bool) -> dict:
    gc, tc, prob = built.gc, built.tc, built.problem
    return {
        "C1": gc.C1, "C2": gc.C2, "C3": gc.C3, "C4": gc.C4, "D": gc.D,
        "sigma2W": built.mixing.sigma2, "xi": tc.xi, "C_of_xi": tc.C_of_xi,
        "B": tc.B, "rho1": tc.rho1, "rho2": tc.rho2,
        "s": built.s, "s_prescribed": tc.s,
        "eta0": built.eta0, "eta0_prescribed": tc.eta0,
        "delta_hat": prob.delta_hat, "sigma_hat": prob.sigma_hat, "G": prob.G,
        "n": tc.n, "certified": certified,
    }


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Execute all seeds of one experiment and write trace/aggregate/summary files."""
    t_start = time.perf_counter()
    built = build_experiment(cfg)
    certified = certify_constants(built)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    base = RunConfig(
        algorithm=cfg.algorithm, T=cfg.T, eta0=built.eta0,
        eta_fixed=cfg.eta_fixed, s=built.s, batch_size=cfg.batch_size,
        seed=0, record_every=cfg.record_every,
        enforce_assumptions=cfg.enforce_assumptions,
        check_contraction=cfg.check_contraction,
    )
    tc = built.tc if cfg.emit_bounds else None

    # seeds are independent; worker processes sidestep the GIL and give
    # bit-identical traces regardless of scheduling
    if cfg.threads > 1 and len(cfg.seeds) > 1:
        with concurrent.futures.ProcessPoolExecutor(cfg.threads) as pool:
            futures = [pool.submit(_run_one_seed, base, seed, cfg.algorithm,
                                   built.problem, built.mixing, built.gc, tc)
                       for seed in cfg.seeds]
            traces = dict(zip(cfg.seeds, (f.result() for f in futures)))
    else:
        traces = {seed: _run_one_seed(base, seed, cfg.algorithm, built.problem,
                                      built.mixing, built.gc, tc)
                  for seed in cfg.seeds}

    label = f"{cfg.algorithm}_{built.graph_label}"
    trace_paths = {}
    for seed in cfg.seeds:
        path = out / f"trace_{label}_{seed}.csv"
        write_trace_csv(path, traces[seed])
        trace_paths[seed] = path
    aggregate_path = out / f"aggregate_{label}.csv"
    ordered = [traces[s] for s in cfg.seeds]
    write_aggregate_csv(aggregate_path, ordered)

    per_seed = {}
    for seed in cfg.seeds:
        tr = traces[seed]
        last = tr.records[-1]
        fv = tr.column("frechet_var")
        bc = tr.column("bound_consensus")
        with np.errstate(invalid="ignore"):
            violations = int(np.sum(fv > bc)) if not np.all(np.isnan(bc)) else None
        per_seed[str(seed)] = {
            "final_t": last.t,
            "final_consensus_db": db(last.consensus),
            "final_msd_db": db(last.msd),
            "final_fgap_bar": last.fgap_bar,
            "clip_total": tr.clip_total,
            "flag_events": tr.flag_events,
            "consensus_bound_violations": violations,
        }
    final_means = {
        name: float(np.mean([getattr(traces[s].records[-1], name)
                             for s in cfg.seeds]))
        for name in ("consensus", "frechet_var", "msd", "fgap_bar")
    }
    summary = {
        "algorithm": cfg.algorithm,
        "graph": built.graph_label,
        "n_agents": built.mixing.n,
        "T": cfg.T,
        "seeds": list(cfg.seeds),
        "eta0": built.eta0, "eta_fixed": cfg.eta_fixed, "s": built.s,
        "constants": _constants_dict(built, certified),
        "per_seed": per_seed,
        "final_seed_means": {
            **final_means,
            "consensus_db": db(final_means["consensus"]),
            "msd_db": db(final_means["msd"]),
        },
        "clip_total": int(sum(traces[s].clip_total for s in cfg.seeds)),
        "wall_time_s": time.perf_counter() - t_start,
    }
    summary_path = out / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return ExperimentResult(cfg, built, traces, trace_paths, aggregate_path,
                            summary_path, summary)


# -- CLI ---------------------------------------------------------------------------

def _cfg_from_args(args) -> ExperimentConfig:
    given = [x for x in (args.config, args.preset) if x]
    if len(given) != 1:
        raise ConfigError("provide exactly one of --config PATH or --preset NAME")
    cfg = (paper_preset(args.preset) if args.preset
           else load_config(args.config))
    updates = {}
    if getattr(args, "seeds", None):
        try:
            updates["seeds"] = tuple(int(x) for x in args.seeds.split(","))
        except ValueError:
            raise ConfigError("--seeds expects a comma-separated integer list")
    if getattr(args, "out", None):
        updates["output_dir"] = args.out
    if getattr(args, "record_every", None):
        updates["record_every"] = args.record_every
    if getattr(args, "threads", None):
        updates["threads"] = args.threads
    return replace(cfg, **updates) if updates else cfg


def _add_common(sub):
    sub.add_argument("config_pos", nargs="?", default=None, metavar="CONFIG",
                     help="config path (same as --config)")
    sub.add_argument("--config", help="path to a JSON experiment config")
    sub.add_argument("--preset", help=f"preset name, one of: {', '.join(preset_names())}")


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="riemdiff",
        description="Decentralized Riemannian diffusion experiments")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="run an experiment, write CSV traces")
    _add_common(p_run)
    p_run.add_argument("--seeds", help="comma-separated seed list override")
    p_run.add_argument("--out", help="output directory override")
    p_run.add_argument("--record-every", dest="record_every", type=int)
    p_run.add_argument("--threads", type=int)

    p_val = subs.add_parser("validate", help="validate config and assumptions")
    _add_common(p_val)

    p_con = subs.add_parser("constants", help="print the derived constants")
    _add_common(p_con)

    p_lem = subs.add_parser("lemmas", help="run the Monte-Carlo lemma suites")
    _add_common(p_lem)
    p_lem.add_argument("--triples", type=int, default=10_000,
                       help="triples per inequality suite (default 10000)")
    p_lem.add_argument("--configs", type=int, default=500,
                       help="configurations for the variance suites (default 500)")

    args = parser.parse_args(argv)
    if args.config_pos and not args.config:
        args.config = args.config_pos

    try:
        cfg = _cfg_from_args(args)
        if args.command == "run":
            result = run_experiment(cfg)
            s = result.summary
            print(f"wrote {len(result.trace_paths)} trace files and "
                  f"{result.aggregate_path}")
            print(f"final seed-mean consensus: "
                  f"{s['final_seed_means']['consensus_db']:.2f} dB, "
                  f"msd: {s['final_seed_means']['msd_db']:.2f} dB, "
                  f"clips: {s['clip_total']}")
            return 0
        if args.command == "validate":
            built = build_experiment(cfg)
            ok = certify_constants(built)
            print(f"manifold {built.manifold.manifold_id}, graph {built.graph_label}, "
                  f"n={built.mixing.n}, sigma2={built.mixing.sigma2:.6f}")
            print(f"constants certified: {ok}")
            if not ok:
                print("lemma certification failed; bounds will not be trusted",
                      file=sys.stderr)
                return 3
            print("ok")
            return 0
        if args.command == "constants":
            built = build_experiment(cfg)
            for k, v in _constants_dict(built, certify_constants(built)).items():
                print(f"{k} = {v}")
            return 0
        if args.command == "lemmas":
            built = build_experiment(cfg)
            rng = rngmod.substream(cfg.data_seed, _CERT_KEY)
            reports = [
                cosine_law_suite(built.manifold, built.gc, args.triples, rng),
                log_lipschitz_suite(built.manifold, built.gc, args.triples, rng),
            ]
            reports += variance_suite(built.manifold, built.gc, built.mixing,
                                      args.configs, rng)
            for r in reports:
                print(r.line())
            return 0 if all(r.ok for r in reports) else 3
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except UnknownPreset as e:
        print(str(e), file=sys.stderr)
        return 2
    except AssumptionViolation as e:
        print(f"assumption violated: {e}", file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(str(e), file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(cli_main())
