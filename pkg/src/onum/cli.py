"""Command-line experiment harness.

Subcommands: run, compare, adapt, worstcase, validate. Settings come from an
optional YAML file and are overridden by flags. Every CSV starts with a
comment line carrying the config hash and seed so a run can be replayed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import adversary, learner, validate
from .allocator import run_online, write_decision_log
from .baselines import ReservationParams, run_greedy, run_reservation
from .core import DomainError, Instance, make_value_function
from .ingest import (
    SLOTS_PER_EPISODE,
    TraceFormatError,
    UtilityDistSpec,
    coefficient_bounds,
    generate_synthetic_abilene,
    load_instance,
    load_routing,
    load_traffic,
    make_episodes,
    save_instance,
    synthesize_instance,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

ALGORITHMS = ("oa", "greedy", "reservation")
DRIFTS = ("none", "increasing", "decreasing")

PRESETS = {
    # utility vs mean, low / high variance
    "mean-lowvar": {"sweep_axis": "mean", "var": 0.1, "drift": "none"},
    "mean-highvar": {"sweep_axis": "mean", "var": 3.0, "drift": "none"},
    # utility vs variance under drifting means
    "var-increasing": {"sweep_axis": "var", "drift": "increasing"},
    "var-decreasing": {"sweep_axis": "var", "drift": "decreasing"},
    # learner convergence setup: mean (m+M)/2, variance 1
    "stationary": {"var": 1.0, "drift": "none"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    m: float = 1.0
    M: float = 10.0
    algorithm: str = "oa"
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    p: float = 0.5
    q: float = 0.5
    mean: float | None = None
    var: float = 1.0
    drift: str = "none"
    sweep_axis: str = "mean"
    sweep_values: list | None = None
    replications: int = 10
    seed: int = 0
    rate_scale: float = 0.5
    slot_start: int = 0
    slots: int = SLOTS_PER_EPISODE
    episodes: int = learner.DEFAULT_EPISODES
    training_episodes: int = 7
    eta: float = learner.DEFAULT_ETA
    grid_steps: int = learner.GRID_STEPS
    with_reservation: bool = True
    instance: str | None = None
    trace_traffic: str | None = None
    trace_routing: str | None = None
    synthetic: int | None = None
    preset: str | None = None
    workers: int = 1
    out_dir: str = "out"

    # not part of the replay identity
    _volatile = ("out_dir", "workers")

    def validate(self) -> None:
        if not 0 < self.m < self.M:
            raise ConfigError(f"need 0 < m < M, got m={self.m}, M={self.M}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"bad algorithm list {self.algorithms!r}")
        if self.drift not in DRIFTS:
            raise ConfigError(f"drift must be one of {DRIFTS}")
        if self.sweep_axis not in ("mean", "var"):
            raise ConfigError("sweep_axis must be 'mean' or 'var'")
        if self.sweep_values is not None and not self.sweep_values:
            raise ConfigError("sweep range is empty")
        if self.replications < 1 or self.episodes < 1 or self.training_episodes < 1:
            raise ConfigError("replications and episode counts must be >= 1")
        if self.var < 0 or not self.rate_scale > 0:
            raise ConfigError("need var >= 0 and rate_scale > 0")
        if (self.trace_traffic is None) != (self.trace_routing is None):
            raise ConfigError("--trace-traffic and --trace-routing go together")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")

    def digest(self) -> str:
        ident = {k: v for k, v in asdict(self).items() if k not in self._volatile}
        return hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()[:16]

    def header(self, command: str) -> str:
        return f"config_sha256={self.digest()} seed={self.seed} command={command}"

    @property
    def bounds(self) -> tuple[float, float]:
        return coefficient_bounds(self.m, self.M)

    def utility_spec(self, mean: float | None = None, var: float | None = None) -> UtilityDistSpec:
        lb, ub = self.bounds
        var = self.var if var is None else var
        if self.drift == "increasing":
            return UtilityDistSpec.drift(lb, ub, var, lb, ub)
        if self.drift == "decreasing":
            return UtilityDistSpec.drift(ub, lb, var, lb, ub)
        mu = mean if mean is not None else (self.mean if self.mean is not None else (lb + ub) / 2)
        return UtilityDistSpec.fixed(mu, var, lb, ub)

    def axis_values(self) -> list[float]:
        if self.sweep_values is not None:
            return [float(v) for v in self.sweep_values]
        if self.sweep_axis == "mean":
            lb, ub = self.bounds
            return [float(v) for v in np.linspace(lb, ub, 9)]
        return [0.1, 0.5, 1.0, 2.0, 3.0]


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        values.update({k.replace("-", "_"): v for k, v in loaded.items()})
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("command", "config", "func")}
    preset = flags.get("preset", values.get("preset"))
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        values = {**PRESETS[preset], **values}
    values.update(flags)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _seed(cfg: ExperimentConfig, name: str, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=(zlib.crc32(name.encode()), *key))


def load_network(cfg: ExperimentConfig):
    if cfg.trace_traffic:
        traffic, routing = load_traffic(cfg.trace_traffic), load_routing(cfg.trace_routing)
        if traffic.shape[1] != routing.shape[0]:
            raise ConfigError(f"traffic has {traffic.shape[1]} pairs, routing has {routing.shape[0]}")
        return traffic, routing
    return generate_synthetic_abilene(cfg.seed if cfg.synthetic is None else cfg.synthetic)


def run_algorithm(name: str, inst: Instance, cfg: ExperimentConfig):
    if name == "oa":
        return run_online(inst, make_value_function(cfg.m, cfg.M))
    if name == "greedy":
        return run_greedy(inst)
    return run_reservation(inst, ReservationParams(cfg.p, cfg.q, cfg.M))


def _out(cfg: ExperimentConfig, name: str) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _pmap(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(x: float) -> str:
    return repr(float(x))


def _mean_std(xs) -> tuple[float, float]:
    xs = np.asarray(xs, dtype=float)
    return float(xs.mean()), float(xs.std(ddof=1)) if xs.size > 1 else 0.0


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_run(cfg: ExperimentConfig) -> int:
    if cfg.instance:
        inst = load_instance(cfg.instance)
    else:
        traffic, routing = load_network(cfg)
        stop = cfg.slot_start + cfg.slots
        if not 0 <= cfg.slot_start < stop <= traffic.shape[0]:
            raise ConfigError(f"slot range [{cfg.slot_start}, {stop}) outside trace")
        inst = synthesize_instance(traffic, routing, (cfg.slot_start, stop), cfg.rate_scale,
                                   cfg.utility_spec(), _seed(cfg, "instance", 0, 0))
    result = run_algorithm(cfg.algorithm, inst, cfg)
    save_instance(inst, _out(cfg, "instance.csv"))
    with open(_out(cfg, f"run_{cfg.algorithm}.csv"), "w", newline="") as fh:
        write_decision_log(fh, inst, result, comment=cfg.header("run"))
    omega = ";".join(f"{w:.6g}" for w in result.final_state.omega)
    print(f"algorithm={cfg.algorithm} arrivals={len(inst)} "
          f"total_utility={result.total_utility:.10g} final_utilization={omega}")
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig) -> int:
    traffic, routing = load_network(cfg)
    stop = cfg.slot_start + cfg.slots
    if not 0 <= cfg.slot_start < stop <= traffic.shape[0]:
        raise ConfigError(f"slot range [{cfg.slot_start}, {stop}) outside trace")
    axis = cfg.axis_values()

    def task(key):
        i, r = key
        v = axis[i]
        spec = cfg.utility_spec(mean=v) if cfg.sweep_axis == "mean" else cfg.utility_spec(var=v)
        inst = synthesize_instance(traffic, routing, (cfg.slot_start, stop), cfg.rate_scale,
                                   spec, _seed(cfg, "instance", i, r))
        return {a: run_algorithm(a, inst, cfg).total_utility for a in cfg.algorithms}

    keys = [(i, r) for i in range(len(axis)) for r in range(cfg.replications)]
    results = dict(zip(keys, _pmap(task, keys, cfg.workers)))

    name = f"compare_{cfg.preset}.csv" if cfg.preset else f"compare_{cfg.sweep_axis}.csv"
    with open(_out(cfg, name), "w", newline="") as fh:
        fh.write(f"# {cfg.header('compare')} axis={cfg.sweep_axis} drift={cfg.drift}\n")
        fh.write("axis_value,algorithm,mean_utility,stddev\n")
        for i, v in enumerate(axis):
            for a in cfg.algorithms:
                mu, sd = _mean_std([results[(i, r)][a] for r in range(cfg.replications)])
                fh.write(f"{_fmt(v)},{a},{_fmt(mu)},{_fmt(sd)}\n")
    print(f"wrote {name}: {len(axis)} points x {len(cfg.algorithms)} algorithms "
          f"x {cfg.replications} replications")
    return EXIT_OK


def collect_episodes(cfg: ExperimentConfig, traffic, routing, count: int, stream: str) -> list[Instance]:
    """Day-long episodes, re-synthesizing over the trace until ``count`` are gathered."""
    spec = cfg.utility_spec()
    out: list[Instance] = []
    sweep = 0
    while len(out) < count:
        seed = int(_seed(cfg, stream, sweep).generate_state(1)[0])
        out.extend(make_episodes(traffic, routing, spec, seed, cfg.rate_scale))
        sweep += 1
    return out[:count]


def cmd_adapt(cfg: ExperimentConfig) -> int:
    traffic, routing = load_network(cfg)
    episodes = collect_episodes(cfg, traffic, routing, cfg.episodes, "adapt")
    training = collect_episodes(cfg, traffic, routing, cfg.training_episodes, "train")
    grid = learner.build_arm_grid(cfg.m, cfg.M, cfg.grid_steps)
    sample_seed = int(_seed(cfg, "sampling").generate_state(1)[0])

    adaptive = learner.run_adaptive(episodes, grid, cfg.eta, sample_seed, cfg.workers)
    with open(_out(cfg, "adapt_convergence.csv"), "w", newline="") as fh:
        adaptive.write_csv(fh, comment=cfg.header("adapt"))

    rows = [("alg", adaptive.played, "learned")]
    fixed = [run_online(ep, make_value_function(cfg.m, cfg.M)).total_utility for ep in episodes]
    rows.append(("alg-fixed", fixed, f"m={cfg.m};M={cfg.M}"))
    arm, _ = learner.best_fixed_arm(training, grid, cfg.workers)
    best = [run_online(ep, make_value_function(*arm)).total_utility for ep in episodes]
    rows.append(("alg-best", best, f"m={arm[0]!r};M={arm[1]!r}"))

    if cfg.with_reservation:
        pq = learner.build_pq_grid(cfg.grid_steps)
        res_adaptive = learner.run_adaptive_reservation(episodes, cfg.M, pq, cfg.eta,
                                                        sample_seed, cfg.workers)
        with open(_out(cfg, "adapt_reservation_convergence.csv"), "w", newline="") as fh:
            res_adaptive.write_csv(fh, comment=cfg.header("adapt"))
        rows.append(("res", res_adaptive.played, "learned"))
        res_fixed = [run_reservation(ep, ReservationParams(cfg.p, cfg.q, cfg.M)).total_utility
                     for ep in episodes]
        rows.append(("res-fixed", res_fixed, f"p={cfg.p};q={cfg.q}"))
    rows.append(("greedy", [run_greedy(ep).total_utility for ep in episodes], ""))

    with open(_out(cfg, "adapt_compare.csv"), "w", newline="") as fh:
        fh.write(f"# {cfg.header('adapt')}\n")
        fh.write("algorithm,mean_utility,stddev,params\n")
        for name, vals, params in rows:
            mu, sd = _mean_std(vals)
            fh.write(f"{name},{_fmt(mu)},{_fmt(sd)},{params}\n")
    print(f"adaptive: {len(episodes)} episodes, {len(grid)} arms; "
          f"mean played {np.mean(adaptive.played):.6g}, fixed {np.mean(fixed):.6g}")
    return EXIT_OK


def cmd_worstcase(args: argparse.Namespace) -> int:
    if any(L < 2 for L in args.L):
        print("worstcase: every L must be >= 2; the single-link case is covered by the "
              "two-arrival instance (ratio L/beta)", file=sys.stderr)
        return EXIT_CONFIG
    rows = adversary.ratio_curve(args.L, args.m, args.M, args.t, args.eps)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ident = json.dumps({"L": args.L, "m": args.m, "M": args.M, "t": args.t, "eps": args.eps},
                       sort_keys=True)
    digest = hashlib.sha256(ident.encode()).hexdigest()[:16]
    with open(out / "worstcase.csv", "w", newline="") as fh:
        adversary.write_curve(rows, fh, comment=f"config_sha256={digest} seed=none command=worstcase")
    for r in rows:
        print(f"L={r.L} ratio={r.ratio:.6f} L_alpha={r.L_alpha:.6f}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    results = validate.run_all(seed=args.seed or 0, inject_bad_alpha=args.inject_bad_alpha)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.seconds:6.2f}s  {r.detail}")
    ok = all(r.passed for r in results)
    print("all suites passed" if ok else "validation FAILED")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--config")
    p.add_argument("--trace-traffic", dest="trace_traffic")
    p.add_argument("--trace-routing", dest="trace_routing")
    p.add_argument("--synthetic", type=int, metavar="SEED",
                   help="seed of the synthetic Abilene-shaped network (default: --seed)")
    p.add_argument("--workers", type=int)


def _experiment(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=float)
    p.add_argument("--M", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--mean", type=float)
    p.add_argument("--var", type=float)
    p.add_argument("--drift", choices=DRIFTS)
    p.add_argument("--rate-scale", dest="rate_scale", type=float)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--slot-start", dest="slot_start", type=int)
    p.add_argument("--slots", type=int, help="slots per synthesized instance (run, compare)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one algorithm on one instance")
    _common(p)
    _experiment(p)
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--instance", help="instance CSV to replay instead of synthesizing")

    p = sub.add_parser("compare", help="sweep mean or variance across algorithms")
    _common(p)
    _experiment(p)
    p.add_argument("--sweep-axis", dest="sweep_axis", choices=("mean", "var"))
    p.add_argument("--sweep-values", dest="sweep_values", type=float, nargs="+")
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS)
    p.add_argument("--replications", type=int)

    p = sub.add_parser("adapt", help="exponential-weights parameter tuning")
    _common(p)
    _experiment(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--training-episodes", dest="training_episodes", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--grid-steps", dest="grid_steps", type=int)
    p.add_argument("--no-reservation", dest="with_reservation", action="store_const", const=False)

    p = sub.add_parser("worstcase", help="empirical ratio of the tightness construction")
    p.add_argument("--L", type=int, nargs="+", default=[2, 3, 4, 5])
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--M", type=float, default=math.e)
    p.add_argument("--t", type=int, default=1000)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--out-dir", dest="out_dir", default="out")

    p = sub.add_parser("validate", help="run the invariant suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-bad-alpha", action="store_true",
                   help="halve alpha in the condition suite (should fail)")
    return parser


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "adapt": cmd_adapt}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "worstcase":
            return cmd_worstcase(args)
        if args.command == "validate":
            return cmd_validate(args)
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TraceFormatError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
