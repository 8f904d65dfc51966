"""Command-line entry point: solve, evaluate, simulate, sweeps, and reference reproductions.

Configs are JSON documents::

    {
      "model": {"m": 2, "N": [40, 50], "theta": [0.015, 0.02], "T": 40},
      "utility": {"kind": "identity", "gamma": null},
      "uncertainty": {"kind": "singleton", "profiles": [[0.2, 0.8]]},
      "simulation": {"runs": 10000, "seed": 1, "scoring_profile": [0.2, 0.8], "histogram_bins": 50},
      "output_dir": "out"
    }

Every CSV starts with a ``#`` line carrying the tool version, seed and a
digest of the config, then a header row.  Exit codes: 0 success,
2 validation, 3 capacity, 4 failed acceptance check, 5 I/O.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import CapacityError, ModelSpec, ModselError, UnsupportedError, UtilitySpec, ValidationError, Violation, validate_model
from .dp import PolicyTable, SolveReport, evaluate_policy, solve, solve_min_defects
from .experiments import EXPERIMENTS, SWEEP_HEADER, robust_row, run_risk_sweep, sweep_profile
from .simulate import SimulationConfig, export_histogram, simulate_many
from .uncertainty import UncertaintySet, UnsupportedGeometryError

log = logging.getLogger("modsel")

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_CHECK, EXIT_IO = 0, 2, 3, 4, 5


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    utility: UtilitySpec
    uncertainty: UncertaintySet
    simulation: SimulationConfig | None = None
    output_dir: str = "out"

    def to_dict(self) -> dict:
        m = self.model
        d = {
            "model": {"m": m.m, "N": list(m.N), "theta": list(m.theta), "T": m.T},
            "utility": {"kind": self.utility.kind, "gamma": self.utility.gamma},
            "uncertainty": self.uncertainty.to_dict(),
            "simulation": None,
            "output_dir": str(self.output_dir),
        }
        if self.simulation is not None:
            s = self.simulation
            d["simulation"] = {"runs": s.runs, "seed": s.seed, "scoring_profile": list(s.scoring_profile),
                               "histogram_bins": s.histogram_bins}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        missing = [k for k in ("model", "utility", "uncertainty") if k not in d]
        if missing:
            raise ValidationError([Violation(k, "missing") for k in missing])
        md = d["model"]
        try:
            model = validate_model(ModelSpec(md.get("m"), tuple(md["N"]), tuple(md["theta"]), md["T"]))
        except KeyError as e:
            raise ValidationError([Violation(f"model.{e.args[0]}", "missing")]) from None
        ud = d["utility"]
        utility = UtilitySpec(ud.get("kind", "identity"), ud.get("gamma"))
        unc = UncertaintySet.from_dict(d["uncertainty"])
        sim = None
        if d.get("simulation"):
            sd = d["simulation"]
            sim = SimulationConfig(sd["runs"], sd["seed"], tuple(sd["scoring_profile"]), sd.get("histogram_bins", 50))
        return cls(model, utility, unc, sim, d.get("output_dir", "out"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ValidationError([Violation("config", f"invalid JSON: {e}")]) from None
        except KeyError as e:
            raise ValidationError([Violation(str(e.args[0]), "missing")]) from None
        except (TypeError, AttributeError) as e:
            raise ValidationError([Violation("config", f"malformed: {e}")]) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.6g}"
    return str(v)


def write_csv(path, header, rows, meta: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# {meta}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def meta_line(digest: str, seed=None) -> str:
    return f"modsel {__version__} seed={'none' if seed is None else seed} config={digest}"


def _state_rows(shape):
    return [tuple(int(v) for v in idx) for idx in np.ndindex(*shape)]


def write_policy_csv(path, policy: PolicyTable, meta: str) -> Path:
    """One row per state: ``x_1..x_m`` then the module (1-based) chosen at ``t = 0..T-1``."""
    m = len(policy.shape)
    header = [f"x_{i + 1}" for i in range(m)] + [f"t{t}" for t in range(policy.T)]
    rows = [list(x) + [int(policy.choice[(t, *x)]) + 1 for t in range(policy.T)] for x in _state_rows(policy.shape)]
    return write_csv(path, header, rows, meta)


def read_policy_csv(path, model: ModelSpec) -> PolicyTable:
    choice = np.zeros((model.T, *model.shape), dtype=np.int16)
    with open(path, newline="") as f:
        reader = csv.reader(line for line in f if not line.startswith("#"))
        header = next(reader)
        m = sum(h.startswith("x_") for h in header)
        if m != model.m or len(header) - m != model.T:
            raise ValidationError([Violation("policy", f"{path} does not match the model (m={model.m}, T={model.T})")])
        for row in reader:
            x = tuple(int(v) for v in row[:m])
            choice[(slice(None), *x)] = [int(v) - 1 for v in row[m:]]
    return PolicyTable(choice)


def write_values_csv(path, report: SolveReport, meta: str) -> Path:
    V = report.values
    m = V.values.ndim - 1
    header = [f"x_{i + 1}" for i in range(m)] + [f"t{t}" for t in V.times]
    rows = [list(x) + [V.values[(k, *x)] for k in range(len(V.times))] for x in _state_rows(V.values.shape[1:])]
    return write_csv(path, header, rows, meta)


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError([Violation("list", f"cannot parse {text!r} as comma-separated numbers")]) from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _out_dir(args, cfg: ExperimentConfig | None) -> Path:
    out = Path(args.out or (cfg.output_dir if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _truth(args, cfg: ExperimentConfig):
    if args.truth:
        return tuple(_parse_floats(args.truth))
    if cfg.simulation is not None:
        return cfg.simulation.scoring_profile
    if cfg.uncertainty.kind == "singleton":
        return tuple(cfg.uncertainty.profiles[0])
    raise ValidationError([Violation("--truth", "needed when the uncertainty set is not a singleton")])


def cmd_solve(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = _out_dir(args, cfg)
    meta = meta_line(cfg.digest())
    if args.objective == "min-defects":
        rep = solve_min_defects(cfg.model)
    else:
        rep = solve(cfg.model, cfg.utility, cfg.uncertainty)
    write_policy_csv(out / "policy.csv", rep.policy, meta)
    write_values_csv(out / "values.csv", rep, meta)
    write_csv(out / "summary.csv", ["objective", "value_at_start", "states", "periods"],
              [[rep.objective, rep.value_at_start, cfg.model.n_states, cfg.model.T]], meta)
    label = "expected residual defects" if rep.objective == "min_defects" else "J_0(N)"
    print(f"{label} = {rep.value_at_start:.6g}  ({cfg.model.n_states} states, {rep.wall_time:.3f}s)")
    if cfg.model.n_states == 1:
        print("note: zero-defect model, every policy is equivalent")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = _out_dir(args, cfg)
    policy = read_policy_csv(args.policy or out / "policy.csv", cfg.model)
    truth = _truth(args, cfg)
    value = evaluate_policy(policy, cfg.model, cfg.utility, truth)
    write_csv(out / "evaluation.csv", ["truth", "expected_utility"], [[" ".join(fmt(v) for v in truth), value]],
              meta_line(cfg.digest()))
    print(f"expected utility = {value:.6g}")
    return EXIT_OK


def _sim_config(args, cfg: ExperimentConfig) -> SimulationConfig:
    base = cfg.simulation
    if base is None and not args.truth:
        raise ValidationError([Violation("simulation", "config has no simulation block")])
    runs = args.runs or (base.runs if base else 10_000)
    seed = args.seed if args.seed is not None else (base.seed if base else 0)
    prof = tuple(_parse_floats(args.truth)) if args.truth else base.scoring_profile
    return SimulationConfig(runs, seed, prof, base.histogram_bins if base else 50)


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = _out_dir(args, cfg)
    sim = _sim_config(args, cfg)
    if args.policy:
        policy = read_policy_csv(args.policy, cfg.model)
    else:
        policy = solve(cfg.model, cfg.utility, cfg.uncertainty).policy
    stats = simulate_many(cfg.model, policy, sim, workers=args.workers)
    meta = meta_line(cfg.digest(), sim.seed)
    export_histogram(stats, out / "histogram.csv", header=meta)
    write_csv(out / "stats.csv", ["mean", "variance", "runs", "seed", "variance_kind"],
              [[stats.mean, stats.variance, stats.runs, stats.seed, "population"]], meta)
    print(f"mean = {stats.mean:.6g}  variance = {stats.variance:.6g}  ({stats.runs} runs, seed {stats.seed})")
    return EXIT_OK


def cmd_sweep_profile(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = _out_dir(args, cfg)
    values = _parse_floats(args.values)
    truth = _truth(args, cfg)
    modes = ["assumed", "truth"] if args.mode == "both" else [args.mode]
    rows = [r for mode in modes for r in sweep_profile(cfg.model, values, truth[0], mode, cfg.utility)]
    if cfg.uncertainty.kind != "singleton":
        rows.append(robust_row(cfg.model, cfg.uncertainty, truth, cfg.utility))
    write_csv(out / "gaps.csv", SWEEP_HEADER, [[r[k] for k in SWEEP_HEADER] for r in rows], meta_line(cfg.digest()))
    for r in rows:
        print(f"{r['mode']:>8}  assumed={fmt(r['assumed_p1']):>6}  truth={fmt(r['true_p1']):>6}  gap={r['gap_pct']:.4f}%")
    return EXIT_OK


def cmd_sweep_gamma(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = _out_dir(args, cfg)
    sim = _sim_config(args, cfg)
    gammas = _parse_floats(args.gammas)
    bad = [Violation("gamma", f"{g} <= 0") for g in gammas if g <= 0]
    if bad:
        raise ValidationError(bad)
    meta = meta_line(cfg.digest(), sim.seed)
    rows = []
    for g in gammas:
        rep = solve(cfg.model, UtilitySpec.exponential(g), cfg.uncertainty)
        stats = simulate_many(cfg.model, rep.policy, sim, workers=args.workers)
        export_histogram(stats, out / f"hist_gamma_{g:g}.csv", header=meta)
        rows.append([g, stats.mean, stats.variance, stats.runs, sim.seed])
        print(f"gamma={g:g}  mean={stats.mean:.4f}  variance={stats.variance:.4f}")
    write_csv(out / "risk_sweep.csv", ["gamma", "mean", "variance", "runs", "seed"], rows, meta)
    return EXIT_OK


def cmd_repro(args) -> int:
    out = Path(args.out or "out") / args.name
    if args.name == "risk-sweep":
        runs = args.runs or (100 if args.smoke else 10_000)
        kw = {"runs": runs, "smoke": args.smoke, "workers": args.workers}
        if args.seed is not None:
            kw["seed"] = args.seed
        res = run_risk_sweep(**kw)
        seed = kw.get("seed", "default")
    else:
        res = EXPERIMENTS[args.name]()
        seed = None
    digest = hashlib.sha256(args.name.encode()).hexdigest()[:16]
    for stem, (header, rows) in res.tables.items():
        write_csv(out / f"{stem}.csv", header, rows, meta_line(digest, seed))
    write_csv(out / "checks.csv", ["check", "passed", "detail"],
              [[c.name, c.passed, c.line()] for c in res.checks], meta_line(digest, seed))
    for c in res.checks:
        print(c.line())
    print(f"{args.name}: {'PASS' if res.passed else 'FAIL'}")
    return EXIT_OK if res.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modsel", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory (default: config output_dir)" if config else "output root (default: out)")
        return p

    p = common(sub.add_parser("solve", help="solve the dynamic program and write policy/value tables"))
    p.add_argument("--objective", choices=["utility", "min-defects"], default="utility")
    p.set_defaults(func=cmd_solve)

    p = common(sub.add_parser("evaluate", help="exact expected utility of a policy CSV under a true profile"))
    p.add_argument("--policy", help="policy CSV (default: OUT/policy.csv)")
    p.add_argument("--truth", help="true profile, comma-separated")
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("simulate", help="Monte Carlo distribution of delivered reliability"))
    p.add_argument("--policy", help="policy CSV (default: solve the config)")
    p.add_argument("--truth", help="scoring profile, comma-separated")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("sweep-profile", help="gaps from a mis-specified first-module share (m = 2)"))
    p.add_argument("--values", default="0.48,0.50,0.52,0.54,0.56,0.58,0.60,0.62")
    p.add_argument("--truth", help="fixed profile, comma-separated")
    p.add_argument("--mode", choices=["assumed", "truth", "both"], default="both")
    p.set_defaults(func=cmd_sweep_profile)

    p = common(sub.add_parser("sweep-gamma", help="exponential-utility policies: simulate each risk tolerance"))
    p.add_argument("--gammas", default="0.001,0.01,0.1,1")
    p.add_argument("--truth", help="scoring profile, comma-separated")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep_gamma)

    p = common(sub.add_parser("repro", help="run a built-in reference experiment and check it"), config=False)
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--smoke", action="store_true", help="few runs, tolerances widened tenfold")
    p.set_defaults(func=cmd_repro)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValidationError, UnsupportedGeometryError, UnsupportedError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ModselError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
