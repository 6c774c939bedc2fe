"""Command-line experiment runner.

Every subcommand writes a table: CSV with a ``#``-prefixed metadata block,
or JSON lines (first line is the metadata object). Transmit powers on the
command line and in sweeps are in dBW unless stated otherwise; everything
inside the library is SI.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .circuit import CoilGeometry, NetworkInstance, SystemParams, coil_constant, harvested_power
from .game import EquilibriumError, GameSpec, solve_equilibrium
from .montecarlo import SimConfig, simulate_outage_loose, simulate_outage_strong
from .stochastic import (OutageQuery, QuadratureConfig, QuadratureError, lambda_threshold,
                         min_power_zero_outage, outage_loose, outage_strong)

ANCHOR_DB = 24.5847
FIG2_CASES = ((1.0, 1.5), (2.0, 1.5), (1.0, 3.0), (2.0, 3.0))
FIG4_MUTUAL_INDUCTANCES = (-0.0921e-6, 0.0402e-6, 0.0370e-6, 0.0245e-6)
FIG4_POWER_DB = 10.0
# Power axes are estimates bracketing the visible transitions of each figure.
DEFAULT_SWEEPS = {
    "fig2": {"start": -5.0, "stop": 40.0, "step": 5.0},
    "fig3": {"start": 0.0, "stop": 45.0, "step": 5.0},
    "custom": {"start": 0.0, "stop": 40.0, "step": 5.0},
}


class ConfigError(ValueError):
    pass


def db_to_watts(db: float) -> float:
    return 10.0 ** (db / 10.0)


def watts_to_db(watts: float) -> float:
    if not watts > 0:
        raise ValueError("power must be positive to express in dB")
    return 10.0 * math.log10(watts)


def calibrate_omega(anchor_db: float, q: OutageQuery, *, coil_constant: float,
                    tx_resistance: float = 1.3440, rx_resistance: float = 0.0672,
                    cell_radius: float = 5.0) -> float:
    """Angular frequency at which the zero-outage power equals ``anchor_db`` (dBW)."""
    anchor = db_to_watts(anchor_db)
    r, x = rx_resistance, q.load
    num = cell_radius ** 6 * q.threshold * tx_resistance * (r + x) ** 2
    den = anchor * coil_constant ** 2 * q.alignment ** 2 * x
    if not (num > 0 and den > 0):
        raise ConfigError("omega calibration needs strictly positive inputs")
    return math.sqrt(num / den)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_PARAM_KEYS = {f.name for f in dataclasses.fields(SystemParams)} - {"transmit_power"}
_SCHEMA = {
    "experiment": None,
    "params": _PARAM_KEYS,
    "geometry": {f.name for f in dataclasses.fields(CoilGeometry)},
    "sweep": {"variable", "start", "stop", "step", "scale"},
    "simulation": {f.name for f in dataclasses.fields(SimConfig)},
    "quadrature": {f.name for f in dataclasses.fields(QuadratureConfig)},
    "calibration": {"anchor_db", "alignment", "load", "threshold"},
    "query": {"alignment", "distance", "load", "threshold", "regime"},
    "game": {"mutual_inductances", "tolerance", "max_sweeps", "order", "initial"},
    "output": None,
}


def load_config(path: Optional[str]) -> Dict[str, Any]:
    """Read a YAML config and reject unknown sections or keys."""
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    for section, body in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        allowed = _SCHEMA[section]
        if allowed is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        unknown = set(body) - allowed
        if unknown:
            raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(sorted(unknown))}")
    return data


@dataclasses.dataclass
class ExperimentConfig:
    """Resolved settings for one run."""

    experiment: str
    params: SystemParams
    sweep: Dict[str, Any]
    sim: SimConfig
    quad: QuadratureConfig
    query: Dict[str, Any]
    game: Dict[str, Any]
    output: Optional[str]
    omega_source: str

    def sweep_values(self) -> np.ndarray:
        s = self.sweep
        if s.get("variable", "power") != "power":
            raise ConfigError("only the transmit power can be swept")
        if not s["step"] > 0 or s["stop"] < s["start"]:
            raise ConfigError("sweep needs step > 0 and stop >= start")
        n = int(math.floor((s["stop"] - s["start"]) / s["step"] + 1e-9)) + 1
        return s["start"] + s["step"] * np.arange(n)

    def sweep_watts(self, value: float) -> float:
        return db_to_watts(value) if self.sweep.get("scale", "db") == "db" else float(value)

    def digest(self) -> str:
        # Output path and thread count do not change results.
        state = dataclasses.asdict(self)
        state.pop("output")
        state["sim"].pop("workers")
        blob = json.dumps(_jsonable(state), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj)
    return obj


def _resolve_load(value, params_r: float) -> float:
    if value == "r":
        return params_r
    return float(value)


def _numeric(section: Dict[str, Any], name: str) -> Dict[str, float]:
    # YAML 1.1 reads exponents without a sign (1.0e7) as strings.
    try:
        return {k: float(v) for k, v in section.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric value in {name!r}: {exc}") from None


def build_config(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    raw = load_config(args.config)
    if "experiment" in raw and raw["experiment"] not in (experiment, "custom"):
        raise ConfigError(f"config is for experiment {raw['experiment']!r}, not {experiment!r}")

    overrides = _numeric(raw.get("params", {}), "params")
    geom = CoilGeometry(**_numeric(raw.get("geometry", {}), "geometry"))
    overrides.setdefault("coil_constant", coil_constant(geom))

    if args.power_db is not None:
        power = db_to_watts(args.power_db)
    elif args.power_watts is not None:
        power = args.power_watts
    else:
        power = db_to_watts(FIG4_POWER_DB)

    omega_source = "config"
    if args.omega is not None:
        overrides["omega"] = args.omega
        omega_source = "flag"
    elif args.calibrate_omega:
        cal = dict(raw.get("calibration", {}))
        probe = SystemParams(power, 1.0, **{k: v for k, v in overrides.items() if k != "omega"})
        q = OutageQuery(threshold=float(cal.get("threshold", probe.power_threshold)),
                        alignment=float(cal.get("alignment", 0.5)), distance=1.0,
                        load=_resolve_load(cal.get("load", "r"), probe.rx_resistance))
        overrides["omega"] = calibrate_omega(
            float(cal.get("anchor_db", ANCHOR_DB)), q, coil_constant=probe.coil_constant,
            tx_resistance=probe.tx_resistance, rx_resistance=probe.rx_resistance,
            cell_radius=probe.cell_radius)
        omega_source = "calibrated"
    if "omega" not in overrides:
        raise ConfigError("omega is required: pass --omega or --calibrate-omega")

    params = SystemParams(power, **overrides)

    sweep = dict(DEFAULT_SWEEPS.get(experiment, DEFAULT_SWEEPS["custom"]))
    sweep.update(raw.get("sweep", {}))

    sim_kw = dict(raw.get("simulation", {}))
    if args.seed is not None:
        sim_kw["seed"] = args.seed
    if args.trials is not None:
        sim_kw["trials"] = args.trials
    if getattr(args, "workers", None):
        sim_kw["workers"] = args.workers
    if getattr(args, "angle_mode", None):
        sim_kw["angle_mode"] = args.angle_mode
    sim = SimConfig(**sim_kw)
    quad = QuadratureConfig(**raw.get("quadrature", {}))

    query = dict(raw.get("query", {}))
    game = dict(raw.get("game", {}))
    output = args.out or raw.get("output")
    return ExperimentConfig(experiment, params, sweep, sim, quad, query, game, output,
                            omega_source)


def _query(cfg: ExperimentConfig, **fixed) -> OutageQuery:
    """Query from config, with ``fixed`` entries taking precedence."""
    q = {"threshold": cfg.params.power_threshold, "alignment": 1.0, "distance": 1.5,
         "load": 2.0}
    q.update({k: v for k, v in cfg.query.items() if k != "regime"})
    q.update(fixed)
    q["load"] = _resolve_load(q["load"], cfg.params.rx_resistance)
    return OutageQuery(**{k: (v if k == "load" else float(v)) for k, v in q.items()})


def _point_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0])


def _map(fn, items: Sequence, workers: int) -> List:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_fig2(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    """Strong-coupling outage versus transmit power for the four reference receivers.

    Each row carries the analytic value and Monte Carlo estimates with unit
    and with exact (randomly drawn) alignment of the interfering receivers.
    """
    values = list(cfg.sweep_values())
    points = [(c, k) for c in range(len(FIG2_CASES)) for k in range(len(values))]

    def row(item):
        case, k = item
        (I0, d0), value = FIG2_CASES[case], values[k]
        params = cfg.params.replace(transmit_power=cfg.sweep_watts(value))
        q = _query(cfg, alignment=I0, distance=d0)
        out = {"case": case, "alignment": I0, "distance": d0, "power_db": value,
               "power_w": params.transmit_power, "lambda": lambda_threshold(params, q)}
        try:
            res = outage_strong(params, q, cfg.quad)
            out.update(analytic=res.probability, analytic_error=res.error,
                       feasible=res.feasible, status="ok")
        except QuadratureError as exc:
            out.update(analytic=float("nan"), analytic_error=float("nan"),
                       feasible=True, status=f"quadrature-error: {exc}")
        for mode in ("unit", "exact"):
            sim = dataclasses.replace(cfg.sim, angle_mode=mode, typical_mode="fixed", workers=1,
                                      seed=_point_seed(cfg.sim.seed, 2, case, k))
            est = simulate_outage_strong(params, q, sim)
            out[f"mc_{mode}_mean"] = est.mean
            out[f"mc_{mode}_se"] = est.standard_error
        return out

    return _map(row, points, cfg.sim.workers)


def fig3_cases(r: float) -> List[Dict[str, float]]:
    """Loose-coupling curves: the R comparison at I_0 = 0.25 and the load comparison at 0.5."""
    return [
        {"alignment": 0.25, "load": 2.0, "tx_resistance": 1.3440},
        {"alignment": 0.25, "load": 2.0, "tx_resistance": 2.5},
        {"alignment": 0.5, "load": r, "tx_resistance": 1.3440},
        {"alignment": 0.5, "load": 1.0, "tx_resistance": 1.3440},
        {"alignment": 0.5, "load": 2.0, "tx_resistance": 1.3440},
        {"alignment": 0.5, "load": r, "tx_resistance": 2.5},
    ]


def run_fig3(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    """Loosely coupled outage (closed form and simulation) versus transmit power."""
    cases = fig3_cases(cfg.params.rx_resistance)
    values = list(cfg.sweep_values())
    points = [(c, k) for c in range(len(cases)) for k in range(len(values))]

    def row(item):
        c, k = item
        case = cases[c]
        params = cfg.params.replace(transmit_power=cfg.sweep_watts(values[k]),
                                    tx_resistance=case["tx_resistance"])
        q = OutageQuery(cfg.params.power_threshold, case["alignment"], 1.0, case["load"])
        sim = dataclasses.replace(cfg.sim, typical_mode="uniform", workers=1,
                                  seed=_point_seed(cfg.sim.seed, 3, c, k))
        est = simulate_outage_loose(params, q, sim)
        return {"case": c, "alignment": case["alignment"], "load": case["load"],
                "tx_resistance": case["tx_resistance"], "power_db": values[k],
                "power_w": params.transmit_power, "analytic": outage_loose(params, q),
                "min_power_db": watts_to_db(min_power_zero_outage(params, q)),
                "mc_mean": est.mean, "mc_se": est.standard_error}

    return _map(row, points, cfg.sim.workers)


def _game_spec(cfg: ExperimentConfig) -> GameSpec:
    g = cfg.game
    m = tuple(float(v) for v in g.get("mutual_inductances", FIG4_MUTUAL_INDUCTANCES))
    return GameSpec(m, cfg.params, tolerance=float(g.get("tolerance", 1e-8)),
                    max_sweeps=int(g.get("max_sweeps", 1000)),
                    order=g.get("order", "sequential"))


def run_fig4(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    """Per-receiver power under equilibrium loads, ``x = r`` and ``x = x_u``."""
    spec = _game_spec(cfg)
    eq = solve_equilibrium(spec, cfg.game.get("initial"))
    r, upper = cfg.params.rx_resistance, cfg.params.load_upper
    policies = {"equilibrium": eq.loads, "matched": (r,) * spec.players,
                "upper": (upper,) * spec.players}
    rows = []
    for name, loads in policies.items():
        powers = harvested_power(cfg.params, NetworkInstance(spec.mutual_inductances, loads))
        for i, (x, p) in enumerate(zip(loads, powers)):
            rows.append({"receiver": i + 1, "mutual_inductance": spec.mutual_inductances[i],
                         "policy": name, "load": x, "power_w": float(p),
                         "power_db": watts_to_db(float(p)) if p > 0 else float("-inf")})
    return rows


def run_equilibrium(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    spec = _game_spec(cfg)
    eq = solve_equilibrium(spec, cfg.game.get("initial"))
    return [{"receiver": i + 1, "mutual_inductance": m, "load": x, "power_w": u,
             "residual": res, "sweeps": eq.sweeps}
            for i, (m, x, u, res) in enumerate(zip(spec.mutual_inductances, eq.loads,
                                                    eq.utilities, eq.residuals))]


def run_outage(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    regime = cfg.query.get("regime", "strong")
    q = _query(cfg)
    row = {"regime": regime, "power_w": cfg.params.transmit_power,
           "power_db": watts_to_db(cfg.params.transmit_power) if cfg.params.transmit_power > 0
           else float("-inf"),
           "alignment": q.alignment, "distance": q.distance, "load": q.load,
           "threshold": q.threshold}
    if regime == "strong":
        res = outage_strong(cfg.params, q, cfg.quad)
        row.update({"lambda": lambda_threshold(cfg.params, q)})
        row.update(analytic=res.probability,
                   analytic_error=res.error, feasible=res.feasible)
    elif regime == "loose":
        row.update(analytic=outage_loose(cfg.params, q),
                   min_power_db=watts_to_db(min_power_zero_outage(cfg.params, q)))
    else:
        raise ConfigError("query.regime must be 'strong' or 'loose'")
    return [row]


def run_simulate(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    regime = cfg.query.get("regime", "strong")
    q = _query(cfg)
    if regime == "strong":
        est = simulate_outage_strong(cfg.params, q, cfg.sim)
    elif regime == "loose":
        est = simulate_outage_loose(cfg.params, q, cfg.sim)
    else:
        raise ConfigError("query.regime must be 'strong' or 'loose'")
    return [{"regime": regime, "power_w": cfg.params.transmit_power,
             "angle_mode": cfg.sim.angle_mode, "trials": est.trials,
             "mc_mean": est.mean, "mc_se": est.standard_error}]


RUNNERS = {"fig2": run_fig2, "fig3": run_fig3, "fig4": run_fig4, "outage": run_outage,
           "equilibrium": run_equilibrium, "simulate": run_simulate}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def render(rows: List[Dict[str, Any]], meta: Dict[str, Any], fmt: str = "csv") -> str:
    buf = io.StringIO()
    if fmt == "json-lines":
        buf.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for row in rows:
            clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                     for k, v in row.items()}
            buf.write(json.dumps(clean) + "\n")
        return buf.getvalue()
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _metadata(cfg: ExperimentConfig, command: str) -> Dict[str, Any]:
    return {"tool": f"mrcwpt {__version__}", "command": command,
            "config_sha256": cfg.digest(), "seed": cfg.sim.seed, "trials": cfg.sim.trials,
            "omega": _fmt(cfg.params.omega), "omega_source": cfg.omega_source}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, needs_omega: bool = True) -> None:
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--seed", type=int, help="Monte Carlo seed (64-bit)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    p.add_argument("--workers", type=int, help="threads for sweep points and MC blocks")
    p.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    if needs_omega:
        om = p.add_mutually_exclusive_group()
        om.add_argument("--omega", type=float, help="angular frequency (rad/s)")
        om.add_argument("--calibrate-omega", action="store_true",
                        help="derive omega from the zero-outage power anchor")
    pw = p.add_mutually_exclusive_group()
    pw.add_argument("--power-db", type=float, help="transmit power in dBW")
    pw.add_argument("--power-watts", type=float, help="transmit power in W")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrcwpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("fig2", "strong-coupling outage sweep"),
                       ("fig3", "loose-coupling outage sweep"),
                       ("fig4", "per-receiver power under three load policies"),
                       ("outage", "analytic outage for one query"),
                       ("equilibrium", "solve the load-adjustment game"),
                       ("simulate", "Monte Carlo outage for one query")):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "simulate":
            p.add_argument("--angle-mode", choices=("unit", "exact"))
    cal = sub.add_parser("calibrate-omega", help="omega from the zero-outage power anchor")
    _common(cal, needs_omega=False)
    cal.add_argument("--anchor-db", type=float, default=ANCHOR_DB)
    cal.add_argument("--alignment", type=float, default=0.5)
    cal.add_argument("--load", default="r", help="load in ohms or 'r'")
    return parser


def _calibrate_command(args) -> str:
    raw = load_config(args.config)
    overrides = _numeric(raw.get("params", {}), "params")
    overrides.pop("omega", None)
    geom = CoilGeometry(**_numeric(raw.get("geometry", {}), "geometry"))
    overrides.setdefault("coil_constant", coil_constant(geom))
    probe = SystemParams(1.0, 1.0, **overrides)
    q = OutageQuery(probe.power_threshold, args.alignment, 1.0,
                    _resolve_load(args.load, probe.rx_resistance))
    omega = calibrate_omega(args.anchor_db, q, coil_constant=probe.coil_constant,
                            tx_resistance=probe.tx_resistance,
                            rx_resistance=probe.rx_resistance, cell_radius=probe.cell_radius)
    check = watts_to_db(min_power_zero_outage(probe.replace(omega=omega), q))
    rows = [{"anchor_db": args.anchor_db, "omega": omega, "coil_constant": probe.coil_constant,
             "roundtrip_db": check}]
    return render(rows, {"tool": f"mrcwpt {__version__}", "command": "calibrate-omega"},
                  args.format)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "calibrate-omega":
            text = _calibrate_command(args)
            out = args.out
        else:
            cfg = build_config(args, args.command)
            rows = RUNNERS[args.command](cfg)
            text = render(rows, _metadata(cfg, args.command), args.format)
            out = cfg.output
    except (ConfigError, QuadratureError, EquilibriumError, ValueError, OSError) as exc:
        print(f"mrcwpt: error: {exc}", file=sys.stderr)
        return 1
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
