"""Command-line entry point: every campaign and solver as a subcommand.

Configs are flat UTF-8 text with dotted keys (``model.alpha = 1.0``); every
campaign writes one machine-readable verdict JSON plus CSV series into the
output directory, and ``report`` collates the verdicts into a single summary.
Outputs are byte-reproducible for a fixed (config, seed, workers); wall-clock
metadata goes to a separate ``run_meta.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments, localtime, moments, variational
from .model import (ExistenceError, ModelParams, TheoreticalConstants,
                    ldp_rate_constant, rho_upper_bound)
from .stablesim import TimeGrid, save_sheet, simulate_sheet
from .variational import LatticeModel, UniformGrid


class ConfigError(ValueError):
    """A config file failed validation; the message names the field."""


def _parse_value(raw: str):
    text = raw.strip()
    if "," in text:
        return [_parse_value(part) for part in text.split(",")]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text: str) -> dict:
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = _parse_value(raw)
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


class RunConfig:
    """Validated model parameters plus typed access to campaign blocks."""

    def __init__(self, raw: dict, *, seed_override=None, workers_override=None):
        self.raw = dict(raw)
        try:
            self.model = ModelParams(
                d=self._coerce_int("model.d", raw.get("model.d", 1)),
                p=self._coerce_int("model.p", raw.get("model.p", 2)),
                alpha=self._coerce_float("model.alpha", raw.get("model.alpha", 1.0)),
                c=self._coerce_float("model.c", raw.get("model.c", 1.0)),
            )
        except ExistenceError as exc:
            raise ConfigError(f"model: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc
        seed = raw.get("seed", 12345) if seed_override is None else seed_override
        self.seed = self._coerce_int("seed", seed)
        workers = raw.get("workers", 1) if workers_override is None else workers_override
        self.workers = self._coerce_int("workers", workers)
        if self.workers < 1:
            raise ConfigError("workers: must be at least 1")

    @staticmethod
    def _coerce_int(field: str, value) -> int:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{field}: expected a number, got {value!r}")
        if float(value) != int(value):
            raise ConfigError(f"{field}: expected an integer, got {value!r}")
        return int(value)

    @staticmethod
    def _coerce_float(field: str, value) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{field}: expected a number, got {value!r}")
        return float(value)

    def get_int(self, key: str, default: int) -> int:
        return self._coerce_int(key, self.raw.get(key, default))

    def get_float(self, key: str, default: float) -> float:
        return self._coerce_float(key, self.raw.get(key, default))

    def get_bool(self, key: str, default: bool) -> bool:
        value = self.raw.get(key, default)
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value

    def get_list(self, key: str, default: list) -> list:
        value = self.raw.get(key, default)
        if not isinstance(value, list):
            value = [value]
        return value

    def grid(self, prefix: str, half_width: float, spacing: float) -> UniformGrid:
        return UniformGrid(
            half_width=self.get_float(f"{prefix}.half_width", half_width),
            spacing=self.get_float(f"{prefix}.spacing", spacing),
            d=self.model.d,
        )


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_json_ready(payload), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _verdict(name: str, cfg: RunConfig, values: dict, tolerance: dict,
             status: str) -> dict:
    return {
        "name": name,
        "params": {"d": cfg.model.d, "p": cfg.model.p,
                   "alpha": cfg.model.alpha, "c": cfg.model.c},
        "values": values,
        "tolerance": tolerance,
        "status": status,
        "seed": cfg.seed,
    }


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _rho_reference(cfg: RunConfig, out: Path) -> float:
    """rho_hat from the config when given, else solved on the configured grid."""
    override = cfg.raw.get("rho.value")
    if override is not None:
        return cfg._coerce_float("rho.value", override)
    grid = cfg.grid("rho", 40.0, 0.05)
    sol = variational.solve_rho(cfg.model, grid,
                                restarts=cfg.get_int("rho.restarts", 6),
                                seed=cfg.seed, workers=cfg.workers)
    return sol.value


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: RunConfig, out: Path, svg: bool) -> dict:
    grid = TimeGrid(cfg.get_float("simulate.t_max", 1.0),
                    cfg.get_int("simulate.steps", 400))
    stream = cfg.get_int("simulate.stream", 0)
    sheet = simulate_sheet(cfg.model, grid, cfg.seed, stream)
    save_sheet(sheet, out / "sheet.bin")
    endpoints = [float(v) for v in sheet.positions[:, -1].ravel()]
    return _verdict("simulate", cfg,
                    {"t_max": grid.t_max, "steps": grid.steps,
                     "stream": stream, "endpoints": endpoints},
                    {}, "pass")


def cmd_localtime(cfg: RunConfig, out: Path, svg: bool) -> dict:
    t = cfg.get_float("localtime.t", 1.0)
    steps = cfg.get_int("localtime.steps", 400)
    stream = cfg.get_int("localtime.stream", 0)
    sheet = simulate_sheet(cfg.model, TimeGrid(t, steps), cfg.seed, stream)
    width = sheet.grid.dt ** (1.0 / cfg.model.alpha)
    sgrid = localtime.SpatialGrid.for_sheet(sheet, t, width)
    fld = localtime.occupation_histogram(sheet, sgrid, t)
    localtime.field_to_csv(fld, out / "localtime_field.csv")
    summary = localtime.field_summary(fld)
    expected = t ** cfg.model.p
    mass_err = abs(fld.mass() - expected) / expected
    ok = mass_err <= 1e-10
    return _verdict("localtime", cfg,
                    {**summary, "mass_relative_error": mass_err,
                     "origin_value": fld.origin_value()},
                    {"mass_relative_error": 1e-10}, _status(ok))


def cmd_moments(cfg: RunConfig, out: Path, svg: bool) -> dict:
    orders = [int(n) for n in cfg.get_list("moments.orders", [1, 2])]
    mc_samples = cfg.get_int("moments.mc_samples", 20000)
    replicas = cfg.get_int("moments.sim_replicas", 3000)
    estimates = []
    for n in orders:
        if cfg.model.d == 1 and n <= 3:
            estimates.append(moments.exp_time_moment_quadrature(cfg.model, n))
        estimates.append(moments.exp_time_moment_mc(
            cfg.model, n, mc_samples, seed=cfg.seed, stream_id=1000 + n))
    sim_samples = moments.sample_exp_time_local_times(
        cfg.model, replicas, seed=cfg.seed, base_stream=2000,
        dt_target=cfg.get_float("moments.dt_target", 0.02))
    for n in orders:
        estimates.append(moments.exp_time_moment_sim(
            cfg.model, n, replicas, samples=sim_samples))
    write_csv(out / "moments.csv", ["n", "method", "value", "std_error"],
              [(e.n, e.method, e.value, e.std_error) for e in estimates])
    # cross-method gate: every pair for the same order within 3 combined
    # errors plus the simulation's declared discretization band
    ok = True
    for n in orders:
        group = [e for e in estimates if e.n == n]
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                tol = 3.0 * math.hypot(a.std_error, b.std_error)
                tol += a.meta.get("discretization_band", 0.0)
                tol += b.meta.get("discretization_band", 0.0)
                tol += 0.005 * max(abs(a.value), abs(b.value))
                if abs(a.value - b.value) > tol:
                    ok = False
    values = {"estimates": [{"n": e.n, "method": e.method, "value": e.value,
                             "std_error": e.std_error} for e in estimates]}
    return _verdict("moments", cfg, values,
                    {"cross_method": "3 sigma + declared bands"}, _status(ok))


def cmd_rho(cfg: RunConfig, out: Path, svg: bool) -> dict:
    grid = cfg.grid("rho", 40.0, 0.05)
    restarts = cfg.get_int("rho.restarts", 10)
    sol = variational.solve_rho(cfg.model, grid, restarts=restarts,
                                seed=cfg.seed, workers=cfg.workers)
    write_csv(out / "rho_history.csv", ["iteration", "objective"],
              list(enumerate(sol.history)))
    upper = sol.meta["upper_bound"]
    ok = 0.0 < sol.value <= upper * (1.0 + 1e-6)
    drift = None
    if cfg.get_bool("rho.refine", False):
        fine = variational.solve_rho(cfg.model, grid.refined(), restarts=restarts,
                                     seed=cfg.seed, workers=cfg.workers)
        drift = abs(fine.value - sol.value) / sol.value
        ok = ok and drift <= 0.02
    values = {"value": sol.value, "upper_bound": upper,
              "iterations": sol.iterations, "grad_norm": sol.grad_norm,
              "converged": sol.converged, "restarts": sol.restarts}
    if drift is not None:
        values["refinement_drift"] = drift
    return _verdict("rho", cfg, values,
                    {"upper_bound": "value <= kernel-power integral",
                     "refinement_drift": 0.02}, _status(ok))


def _lattice_from_config(cfg: RunConfig) -> LatticeModel:
    support = [int(v) for v in cfg.get_list("lattice.support", [-1, 0, 1])]
    weights = [float(w) for w in cfg.get_list("lattice.weights",
                                              [1.0 / 3.0] * len(support))]
    if len(weights) != len(support):
        raise ConfigError("lattice.weights: length must match lattice.support")
    kind = cfg.raw.get("lattice.q", "inverse_linear")
    if kind == "inverse_linear":
        qfun = lambda pts: 1.0 / (1.0 + np.abs(np.asarray(pts, dtype=float)).sum(axis=-1))
    elif kind == "gaussian":
        scale = cfg.get_float("lattice.q_scale", 4.0)
        qfun = lambda pts: np.exp(-(np.asarray(pts, dtype=float) ** 2).sum(axis=-1) / scale)
    else:
        raise ConfigError(f"lattice.q: unknown kernel {kind!r}")
    return LatticeModel(support=np.array([[s] for s in support]),
                        weights=np.array(weights), qfun=qfun,
                        power=cfg.get_int("lattice.power", cfg.model.p))


def cmd_rho_lattice(cfg: RunConfig, out: Path, svg: bool) -> dict:
    model = _lattice_from_config(cfg)
    cutoff = cfg.get_int("lattice.cutoff", 12)
    sol = variational.solve_rho_lattice(model, cutoff, seed=cfg.seed,
                                        workers=cfg.workers,
                                        tail_tol=cfg.get_float("lattice.tail_tol", 0.1))
    write_csv(out / "rho_lattice_history.csv", ["iteration", "objective"],
              list(enumerate(sol.history)))
    ok = sol.value > 0
    return _verdict("rho-lattice", cfg,
                    {"value": sol.value, "cutoff": cutoff,
                     "iterations": sol.iterations, "converged": sol.converged},
                    {"positive": True}, _status(ok))


def cmd_rho_m(cfg: RunConfig, out: Path, svg: bool) -> dict:
    m_values = [float(m) for m in cfg.get_list("rho_m.m_values", [8, 16, 32, 64])]
    rho_hat = _rho_reference(cfg, out)
    rows = variational.rho_m_trend(cfg.model, m_values, rho_hat=rho_hat,
                                   restarts=cfg.get_int("rho_m.restarts", 6),
                                   seed=cfg.seed, workers=cfg.workers)
    write_csv(out / "rho_m_trend.csv",
              ["M", "rho_M", "normalized", "reference", "relative_gap"],
              [(r["M"], r["rho_M"], r["normalized"], r["reference"],
                r["relative_gap"]) for r in rows])
    tol = cfg.get_float("rho_m.final_gap", 0.05)
    ok = rows[-1]["relative_gap"] <= tol
    return _verdict("rho-m", cfg,
                    {"rho_hat": rho_hat, "rows": rows},
                    {"final_relative_gap": tol}, _status(ok))


def cmd_mpsi(cfg: RunConfig, out: Path, svg: bool) -> dict:
    grid = cfg.grid("mpsi", 20.0, 0.05)
    sol = variational.solve_m_psi(cfg.model, grid,
                                  restarts=cfg.get_int("mpsi.restarts", 8),
                                  seed=cfg.seed, workers=cfg.workers)
    rho_hat = _rho_reference(cfg, out)
    target = variational.m_psi_from_rho(cfg.model, rho_hat)
    gap = abs(sol.value - target) / target
    tol = cfg.get_float("mpsi.gap", 0.05)
    return _verdict("mpsi", cfg,
                    {"value": sol.value, "rho_hat": rho_hat,
                     "target_from_rho": target, "relative_gap": gap},
                    {"relative_gap": tol}, _status(gap <= tol))


def cmd_discrete(cfg: RunConfig, out: Path, svg: bool) -> dict:
    model = _lattice_from_config(cfg)
    cutoff = cfg.get_int("lattice.cutoff", 12)
    orders = [int(n) for n in cfg.get_list("discrete.orders", [5, 6, 7, 8, 9])]
    sol = variational.solve_rho_lattice(model, cutoff, seed=cfg.seed,
                                        workers=cfg.workers)
    values = [variational.discrete_moment_bruteforce(model, n) for n in orders]
    write_csv(out / "discrete_moments.csv", ["n", "S_n"],
              list(zip(orders, values)))
    slope = float(np.polyfit(orders, np.log(values), 1)[0])
    target = math.log(sol.value)
    gap = abs(slope - target) / abs(target)
    tol = cfg.get_float("discrete.slope_gap", 0.15)
    return _verdict("discrete", cfg,
                    {"orders": orders, "S_n": values, "log_slope": slope,
                     "log_rho_lattice": target, "relative_gap": gap},
                    {"relative_gap": tol}, _status(gap <= tol))


def cmd_tails(cfg: RunConfig, out: Path, svg: bool) -> dict:
    n_samples = cfg.get_int("tails.samples", 100000)
    steps = cfg.get_int("tails.steps", 400)
    rho_hat = _rho_reference(cfg, out)
    fit = experiments.tail_ldp_fit(cfg.model, n_samples, cfg.seed, steps=steps,
                                   rho_hat=rho_hat)
    write_csv(out / "tail_fit.csv",
              ["threshold", "exceedances", "regressor", "log_prob",
               "wilson_low", "wilson_high"],
              zip(fit.thresholds, fit.exceed_counts, fit.regressors,
                  fit.log_prob, fit.wilson_low, fit.wilson_high))
    if svg:
        _plot_tail_fit(fit, out / "tail_fit.svg")
    ratio = fit.slope_ratio
    ok = fit.r_squared > 0.9 and ratio is not None and 0.5 <= ratio <= 2.0
    return _verdict("tails", cfg,
                    {"slope": fit.slope, "intercept": fit.intercept,
                     "r_squared": fit.r_squared, "kappa_theory": fit.kappa_theory,
                     "slope_ratio": ratio, "rho_hat": rho_hat,
                     "n_samples": fit.n_samples},
                    {"r_squared": 0.9, "slope_ratio": [0.5, 2.0]},
                    _status(ok))


def cmd_scaling(cfg: RunConfig, out: Path, svg: bool) -> dict:
    t1 = cfg.get_float("scaling.t1", 1.0)
    t2 = cfg.get_float("scaling.t2", 2.0)
    n_samples = cfg.get_int("scaling.samples", 2000)
    steps = cfg.get_int("scaling.steps", 400)
    shift = cfg.get_float("scaling.control_shift", 0.3)
    s1 = experiments.sample_field_statistics(cfg.model, t1, n_samples, cfg.seed,
                                             steps=steps, stream_base=0,
                                             want_sup=True)
    s2 = experiments.sample_field_statistics(cfg.model, t2, n_samples, cfg.seed,
                                             steps=steps, stream_base=n_samples,
                                             want_sup=True)
    report = experiments.scaling_check(cfg.model, t1, t2, n_samples, cfg.seed,
                                       steps=steps, samples=(s1, s2))
    control = experiments.scaling_check(cfg.model, t1, t2, n_samples, cfg.seed,
                                        steps=steps, exponent_shift=shift,
                                        samples=(s1, s2))
    write_csv(out / "scaling_samples.csv", ["t", "origin", "sup"],
              [(t1, float(a), float(b)) for a, b in zip(s1.origin, s1.sup)]
              + [(t2, float(a), float(b)) for a, b in zip(s2.origin, s2.sup)])
    ok = (report.ks_origin[1] > 0.01 and report.ks_sup[1] > 0.01
          and control.ks_origin[1] < 0.01)
    values = {"ks_origin": report.ks_origin, "ks_sup": report.ks_sup,
              "exponent": report.exponent,
              "control_ks_origin": control.ks_origin,
              "control_shift": shift, "n_samples": n_samples}
    return _verdict("scaling", cfg, values,
                    {"p_value": 0.01, "control_p_value": 0.01}, _status(ok))


def cmd_lil(cfg: RunConfig, out: Path, svg: bool) -> dict:
    horizon = cfg.get_float("lil.horizon", 1e4)
    paths = cfg.get_int("lil.paths", 50)
    dt = cfg.get_float("lil.dt", 0.25)
    rho_hat = _rho_reference(cfg, out)
    trace = experiments.lil_tracker(cfg.model, cfg.get_float("lil.x", 0.0),
                                    horizon, paths, cfg.seed, dt=dt,
                                    rho_hat=rho_hat)
    write_csv(out / "lil_trace.csv", ["t", "running_max"],
              zip(trace.checkpoints, trace.running_max))
    if svg:
        _plot_lil_trace(trace, out / "lil_trace.svg")
    values = {"final_running_max": trace.final, "c_lil": trace.c_lil,
              "bracket": list(trace.bracket),
              "within_bracket": trace.within_bracket(),
              "horizon": horizon, "paths": paths}
    return _verdict("lil", cfg, values,
                    {"bracket": "order-of-magnitude diagnostic"}, "diagnostic")


def cmd_identity(cfg: RunConfig, out: Path, svg: bool) -> dict:
    n_samples = cfg.get_int("identity.samples", 2000)
    steps = cfg.get_int("identity.steps", 400)
    report = experiments.intersection_identity_check(cfg.model, n_samples,
                                                     cfg.seed, steps=steps)
    control = experiments.intersection_identity_check(cfg.model, n_samples,
                                                      cfg.seed, steps=steps,
                                                      dependent=True)
    ok = (report.p_value > 0.01 and control.p_value < 0.01
          and report.means_compatible())
    values = {"ks_stat": report.ks_stat, "p_value": report.p_value,
              "mean_additive": report.mean_additive,
              "mean_intersection": report.mean_intersection,
              "control_p_value": control.p_value, "n_samples": n_samples}
    return _verdict("identity", cfg, values,
                    {"p_value": 0.01, "control_p_value": 0.01,
                     "means": "3 combined standard errors"}, _status(ok))


def cmd_report(out: Path) -> tuple[dict, int]:
    verdicts = []
    for path in sorted(out.glob("*_verdict.json")):
        verdicts.append(json.loads(path.read_text(encoding="utf-8")))
    if not verdicts:
        print("no verdicts found", file=sys.stderr)
        return {}, 1
    n_fail = sum(1 for v in verdicts if v.get("status") == "fail")
    summary = {
        "verdicts": verdicts,
        "n_pass": sum(1 for v in verdicts if v.get("status") == "pass"),
        "n_fail": n_fail,
        "n_diagnostic": sum(1 for v in verdicts if v.get("status") == "diagnostic"),
        "all_hard_gates_pass": n_fail == 0,
    }
    write_json(out / "summary.json", summary)
    return summary, 0 if n_fail == 0 else 1


# ---------------------------------------------------------------------------
# plots (optional, deterministic SVG)


def _plot_tail_fit(fit: experiments.TailFit, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(fit.regressors, fit.log_prob, "o", label="empirical")
    xs = np.linspace(fit.regressors.min(), fit.regressors.max(), 50)
    ax.plot(xs, fit.slope * xs + fit.intercept, "-",
            label=f"fit slope {fit.slope:.3f}")
    if fit.kappa_theory is not None:
        ref = fit.log_prob[0] + (-fit.kappa_theory) * (xs - fit.regressors[0])
        ax.plot(xs, ref, "--", label=f"rate constant {-fit.kappa_theory:.3f}")
    ax.set_xlabel("threshold^(alpha/d)")
    ax.set_ylabel("log exceedance probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _plot_lil_trace(trace: experiments.LilTrace, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(trace.checkpoints, trace.running_max, "-", label="running max")
    if trace.c_lil is not None:
        ax.axhline(trace.c_lil, linestyle="--", label="theoretical constant")
    ax.set_xlabel("t")
    ax.set_ylabel("normalized local time")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# driver


_COMMANDS = {
    "simulate": cmd_simulate,
    "localtime": cmd_localtime,
    "moments": cmd_moments,
    "rho": cmd_rho,
    "rho-lattice": cmd_rho_lattice,
    "rho-m": cmd_rho_m,
    "mpsi": cmd_mpsi,
    "discrete": cmd_discrete,
    "tails": cmd_tails,
    "scaling": cmd_scaling,
    "lil": cmd_lil,
    "identity": cmd_identity,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="addstable",
        description="campaigns and solvers for additive stable local times")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS) + ["report"])
    parser.add_argument("--config", type=str, default=None,
                        help="flat config file with dotted keys")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=str, default="out")
    parser.add_argument("--svg", action="store_true")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.subcommand == "report":
        _, code = cmd_report(out)
        return code

    try:
        raw = load_config(args.config) if args.config else {}
        cfg = RunConfig(raw, seed_override=args.seed,
                        workers_override=args.workers)
        started = time.time()
        verdict = _COMMANDS[args.subcommand](cfg, out, args.svg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    name = args.subcommand.replace("-", "_")
    write_json(out / f"{name}_verdict.json", verdict)
    write_json(out / "run_meta.json",
               {"command": args.subcommand,
                "finished_unix": time.time(),
                "duration_s": time.time() - started})
    print(f"{args.subcommand}: {verdict['status']}")
    return 0 if verdict["status"] in ("pass", "diagnostic") else 1


if __name__ == "__main__":
    sys.exit(main())
