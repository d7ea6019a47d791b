"""Command-line entry point.

Every run merges three layers, later ones winning: built-in defaults, an
optional TOML config file, then command-line flags.  Outputs are CSV files
whose first line is ``# {json}`` recording the full merged configuration,
plus a JSON summary.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import __version__

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("spectrum", "chern", "phase-map", "evolve", "coherent", "lifetime",
            "semiclassical", "floquet", "route")

# Defaults double as the schema: a key is valid iff it appears here, and its
# value fixes the accepted type.
DEFAULTS = {
    "model": {"g": 1.0, "delta": 0.0},
    "run": {"seed": 0, "workers": 0, "output_dir": ".", "prefix": ""},
    "spectrum": {"N": 20, "d_max": 0.15, "chiral_fraction": 0.5, "band_fraction": 0.4},
    "chern": {"m_from": -5.0, "m_to": 10.0, "step": 0.05, "grid": 48},
    "phase-map": {"N": 30, "resolution": 0, "grid": 36},
    "evolve": {"N": 40, "periods": 2.0, "per_period": 40, "source_cavity": 3,
               "method": "auto", "kind": "none", "strength": 0.0, "realization": 0},
    "coherent": {"nbar": 50.0, "periods": 1.0, "per_period": 40, "tail_tol": 1e-8,
                 "method": "auto"},
    "lifetime": {"kind": "coupling_generic", "strength": 0.1, "realizations": 100,
                 "N": [16, 24, 32], "q_max": 30, "threshold": 0.9, "per_period": 40},
    "semiclassical": {"N": 30.0, "epsilon": 0.0, "periods": 2.0, "tol": 1e-10,
                      "n_samples": 2001, "start": "fixed_point"},
    "floquet": {"N": 6, "omega_0": 10.0, "omega_d": 5000.0, "periods": 2.0, "n_max": 0,
                "sample_every": 50, "steps_per_period": 64, "leak_tol": 1e-6},
    "route": {"F0": [2.0, 0.0], "sigma_pulse": 0.1, "omega": 1.0, "r_in": 0.02, "r_out": 2.0,
              "cutoffs": [7, 7, 7, 7, 7], "periods": 2.0, "dt": 0.05, "rtol": 1e-10,
              "floor_tol": 1e-10, "leak_tol": 1e-4},
}


class ConfigError(ValueError):
    pass


def _check_type(where: str, default, value):
    if isinstance(default, bool) or isinstance(value, bool):
        ok = isinstance(default, bool) and isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float))
        value = float(value) if ok else value
    elif isinstance(default, int):
        ok = isinstance(value, int)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                             for v in value)
        if ok and default and isinstance(default[0], int) and not isinstance(default[0], bool):
            ok = all(isinstance(v, int) for v in value)
    else:
        ok = False
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")
    return value


def merge_config(command: str, file_data: dict | None, overrides: dict) -> dict:
    """Defaults < file < flags, restricted to the sections ``command`` uses."""
    sections = ("model", "run", command)
    cfg = {s: copy.deepcopy(DEFAULTS[s]) for s in sections}
    for layer in (file_data or {}, overrides):
        for sec, table in layer.items():
            if sec not in DEFAULTS:
                raise ConfigError(f"unknown config section [{sec}]")
            if not isinstance(table, dict):
                raise ConfigError(f"[{sec}] must be a table")
            if sec not in cfg:
                continue   # another subcommand's table; validated but unused
            for key, val in table.items():
                if key not in DEFAULTS[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                cfg[sec][key] = _check_type(f"[{sec}].{key}", DEFAULTS[sec][key], val)
    # validate every table of the file, including ones this command ignores
    for sec, table in (file_data or {}).items():
        for key, val in table.items():
            if key not in DEFAULTS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            _check_type(f"[{sec}].{key}", DEFAULTS[sec][key], val)
    return cfg


def load_config_file(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def read_header(path) -> dict:
    """Parse the ``# {json}`` first line of an output file."""
    with open(path) as fh:
        line = fh.readline()
    if not line.startswith("# "):
        raise ConfigError(f"{path} has no header line")
    try:
        return json.loads(line[2:])
    except json.JSONDecodeError as exc:
        raise ConfigError(f"unreadable header in {path}") from exc


# ------------------------------------------------------------------ parser

# per-command flags: (flag name, type); dest is "<command>.<key>"
_FLAGS = {
    "spectrum": [("N", int), ("d-max", float), ("chiral-fraction", float), ("band-fraction", float)],
    "chern": [("m-from", float), ("m-to", float), ("step", float), ("grid", int)],
    "phase-map": [("N", int), ("resolution", int), ("grid", int)],
    "evolve": [("N", int), ("periods", float), ("per-period", int), ("source-cavity", int),
               ("method", str), ("kind", str), ("strength", float), ("realization", int)],
    "coherent": [("nbar", float), ("periods", float), ("per-period", int), ("tail-tol", float),
                 ("method", str)],
    "lifetime": [("kind", str), ("realizations", int), ("q-max", int), ("threshold", float),
                 ("per-period", int)],
    "semiclassical": [("N", float), ("epsilon", float), ("periods", float), ("tol", float),
                      ("n-samples", int), ("start", str)],
    "floquet": [("N", int), ("omega-0", float), ("omega-d", float), ("periods", float),
                ("n-max", int), ("sample-every", int), ("steps-per-period", int),
                ("leak-tol", float)],
    "route": [("sigma-pulse", float), ("omega", float), ("r-in", float), ("r-out", float),
              ("periods", float), ("dt", float), ("rtol", float), ("floor-tol", float),
              ("leak-tol", float)],
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _complex(text: str) -> list[float]:
    try:
        z = complex(text.replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a complex number, got {text!r}") from exc
    return [z.real, z.imag]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photon-lattice",
                                description="Three-cavity, one-qubit photon lattice simulator.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp_ = sub.add_parser(cmd)
        sp_.add_argument("--config", help="TOML config file")
        sp_.add_argument("--replay", metavar="FILE",
                         help="rerun with the configuration recorded in an output header")
        sp_.add_argument("--g", type=float, dest="model.g")
        if cmd == "lifetime":
            # here --delta is the disorder strength; detuning comes from [model]
            sp_.add_argument("--delta", type=float, dest=f"{cmd}.strength")
            sp_.add_argument("--N", type=_int_list, dest=f"{cmd}.N")
        else:
            sp_.add_argument("--delta", type=float, dest="model.delta")
        if cmd == "route":
            sp_.add_argument("--F0", type=_complex, dest="route.F0")
            sp_.add_argument("--cutoffs", type=_int_list, dest="route.cutoffs")
        sp_.add_argument("--seed", type=int, dest="run.seed")
        sp_.add_argument("--workers", type=int, dest="run.workers")
        sp_.add_argument("--output-dir", dest="run.output_dir")
        sp_.add_argument("--prefix", dest="run.prefix")
        for flag, typ in _FLAGS[cmd]:
            sp_.add_argument(f"--{flag}", type=typ, dest=f"{cmd}.{flag.replace('-', '_')}")
    return p


def _overrides(ns: argparse.Namespace) -> dict:
    out: dict = {}
    for key, val in vars(ns).items():
        if "." in key and val is not None:
            sec, name = key.split(".", 1)
            out.setdefault(sec, {})[name] = val
    return out


# ------------------------------------------------------------------ output

class Output:
    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.dir = Path(cfg["run"]["output_dir"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.stem = cfg["run"]["prefix"] + command.replace("-", "_")
        self.files: list[str] = []

    def header(self) -> str:
        meta = {"schema_version": SCHEMA_VERSION, "code_version": __version__,
                "command": self.command, "seed": self.cfg["run"]["seed"],
                "config": self.cfg, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
        return "# " + json.dumps(meta, sort_keys=True)

    def path(self, suffix: str) -> Path:
        p = self.dir / f"{self.stem}{suffix}"
        self.files.append(str(p))
        return p

    def csv(self, writer, suffix: str = ".csv"):
        writer(self.path(suffix), header_line=self.header())

    def summary(self, data: dict) -> dict:
        path = self.path("_summary.json")
        doc = {"header": json.loads(self.header()[2:]), "files": self.files, "summary": data}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return doc


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _write_rows(path, header_line, columns, rows):
    import csv
    with open(path, "w", newline="") as fh:
        fh.write(header_line + "\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])


# ------------------------------------------------------------------ commands

def _workers(cfg) -> int | None:
    return cfg["run"]["workers"] or None


def run_spectrum(cfg, out: Output) -> dict:
    from .spectral import BandThresholds, sector_diagnostics
    c, m = cfg["spectrum"], cfg["model"]
    th = BandThresholds(c["d_max"], c["chiral_fraction"], c["band_fraction"])
    diag = sector_diagnostics(c["N"], m["g"], m["delta"], th)
    out.csv(diag.write_csv)
    d, C = diag.boundary_means()
    return {"dim": len(diag.energies), "gap_estimate": diag.gap_estimate,
            "gap_over_g_sqrtN": diag.gap_estimate / (abs(m["g"]) * np.sqrt(c["N"])),
            "boundary_states": len(diag.boundary_indices),
            "boundary_mean_d_over_N": d, "boundary_mean_C_over_gN2": C}


def run_chern(cfg, out: Output) -> dict:
    from .lda_topology import chern_scan
    c = cfg["chern"]
    if c["step"] <= 0 or c["m_to"] < c["m_from"]:
        raise ConfigError("need step > 0 and m_to >= m_from")
    n = int(np.floor((c["m_to"] - c["m_from"]) / c["step"] + 1e-9)) + 1
    ms = c["m_from"] + c["step"] * np.arange(n)
    scan = chern_scan(ms, c["grid"])
    # C is undefined where the bulk gap closes; those m go to the summary only,
    # keeping the C column integer
    rows = [(float(m), C) for m, C in scan if C is not None]
    out.csv(lambda p, header_line: _write_rows(p, header_line, ["m", "C"], rows))
    return {"points": len(rows), "gapless_m": [float(m) for m, C in scan if C is None],
            "chern_values": sorted({C for _, C in rows})}


def run_phase_map(cfg, out: Output) -> dict:
    from .lda_topology import local_phase_map, write_phase_map_csv
    c, m = cfg["phase-map"], cfg["model"]
    cells = local_phase_map(c["N"], m["delta"], c["resolution"] or None, m["g"], c["grid"])
    out.csv(lambda p, header_line: write_phase_map_csv(cells, p, header_line))
    return {"cells": len(cells), "trivial_cells": sum(x.trivial for x in cells),
            "topological_cells": sum(x.chern not in (0, None) for x in cells)}


def run_evolve(cfg, out: Output) -> dict:
    from .dynamics import circulate_fock, crossing_period, default_times
    from .operators import ModelParams, PerturbationSpec, sample_perturbation
    c, m = cfg["evolve"], cfg["model"]
    params = ModelParams(g=m["g"], delta=m["delta"], N=c["N"])
    pert = sample_perturbation(PerturbationSpec(c["kind"], c["strength"], cfg["run"]["seed"]),
                               c["realization"])
    times = default_times(m["g"], c["periods"], c["per_period"])
    ts = circulate_fock(params, c["N"], times, source_cavity=c["source_cavity"], pert=pert,
                        method=c["method"], with_fidelity=True)
    out.csv(ts.write_csv)
    T = params.period
    early = times <= 0.5 * T
    k = int(np.argmax(np.where(early, ts.n_exp[0], -np.inf)))
    summary = {"period_T": T, "first_n1_peak_over_N": ts.n_exp[0, k] / c["N"],
               "first_n1_peak_time_over_T": times[k] / T,
               "photon_number_drift": float(np.abs(ts.total_photons - c["N"]).max())}
    try:
        summary["sx_crossing_period_over_T"] = crossing_period(times, ts.sigma_exp[0]) / T
    except ValueError:
        summary["sx_crossing_period_over_T"] = None
    return summary


def run_coherent(cfg, out: Output) -> dict:
    from .dynamics import circulate_coherent, default_times
    from .operators import ModelParams
    c, m = cfg["coherent"], cfg["model"]
    params = ModelParams(g=m["g"], delta=m["delta"])
    times = default_times(m["g"], c["periods"], c["per_period"])
    ts = circulate_coherent(params, np.sqrt(c["nbar"]), times, c["tail_tol"], method=c["method"])
    out.csv(ts.write_csv)
    r = np.linalg.norm(ts.sigma_exp[:2], axis=0)
    return {"nbar": c["nbar"], "min_qubit_radius": float(r.min()),
            "max_total_photon_deviation": float(np.abs(ts.total_photons - c["nbar"]).max())}


def run_lifetime(cfg, out: Output) -> dict:
    from .dynamics import lifetime_sweep
    from .operators import PerturbationSpec
    c, m = cfg["lifetime"], cfg["model"]
    pert = PerturbationSpec(c["kind"], c["strength"], cfg["run"]["seed"])
    res = lifetime_sweep(c["N"], pert, c["realizations"], c["q_max"], g=m["g"], delta=m["delta"],
                         threshold=c["threshold"], per_period=c["per_period"],
                         workers=_workers(cfg))
    out.csv(res.write_revivals_csv)
    return {"beta": res.beta, "prefactor": res.prefactor,
            "t_star": {str(tb.N): tb.t_star for tb in res.tables},
            "censored": {str(tb.N): tb.censored for tb in res.tables}}


def run_semiclassical(cfg, out: Output) -> dict:
    from .operators import ModelParams
    from .semiclassical import (delta_from_epsilon, fock_like_state, integrate, measure_period,
                                solve_circulating_point, trajectory_averages)
    c, m = cfg["semiclassical"], cfg["model"]
    summary: dict = {}
    if c["start"] == "fixed_point":
        fp = solve_circulating_point(c["N"], c["epsilon"], m["g"])
        state, params = fp.initial_state(), fp.params
        summary.update(B_z=fp.B_z, fixed_point_residual=fp.residual(), predicted_period=fp.period)
    elif c["start"] == "fock":
        state = fock_like_state(c["N"])
        params = ModelParams(g=m["g"], delta=delta_from_epsilon(c["epsilon"], m["g"]))
    else:
        raise ConfigError("[semiclassical].start must be 'fixed_point' or 'fock'")
    T = ModelParams(g=m["g"]).period
    traj = integrate(state, params, c["periods"] * T, c["tol"], c["n_samples"])
    out.csv(traj.write_csv)
    E = traj.energies()
    summary.update(energy_drift=float(np.abs(E - E[0]).max()),
                   photon_drift=float(np.abs(traj.photons.sum(axis=0) - c["N"]).max()))
    try:
        period = measure_period(traj)
        d, C = trajectory_averages(traj, period)
        summary.update(measured_period=period, mean_d_over_N=d, mean_C_over_gN2=C)
    except ValueError:
        summary.update(measured_period=None)
    return summary


def run_floquet(cfg, out: Output) -> dict:
    from .floquet import default_drive_solution, floquet_run, target_match_residual, validity_report
    from .sector_basis import enumerate_sector
    c, m = cfg["floquet"], cfg["model"]
    drive = default_drive_solution(m["g"], c["omega_d"], c["N"], c["omega_0"])
    series = floquet_run(m["g"], c["N"], c["omega_0"], c["omega_d"], c["periods"],
                         c["n_max"] or None, c["sample_every"], c["steps_per_period"],
                         c["leak_tol"])
    out.csv(series.write_csv)
    return {"max_deviation_vs_static": float(np.nanmax(series.deviation)),
            "max_total_photon_drift": float(np.abs(series.total - c["N"]).max()),
            "max_leakage": float(np.max(series.leakage)),
            "covariance_residual": drive.covariance_residual(),
            "target_match_residual": target_match_residual(drive, m["g"], enumerate_sector(c["N"])),
            "validity": validity_report(m["g"], c["N"], c["omega_0"], c["omega_d"])}


def run_route(cfg, out: Output) -> dict:
    from .operators import circulation_period
    from .router import RouterConfig, evolve_router
    c, m = cfg["route"], cfg["model"]
    if len(c["F0"]) != 2:
        raise ConfigError("[route].F0 is [real, imag]")
    rc = RouterConfig(F0=complex(*c["F0"]), sigma_pulse=c["sigma_pulse"], omega=c["omega"],
                      r_in=c["r_in"], r_out=c["r_out"], g=m["g"], delta=m["delta"],
                      cutoffs=tuple(c["cutoffs"]),
                      t_final=c["periods"] * circulation_period(m["g"]), dt=c["dt"],
                      rtol=c["rtol"], floor_tol=c["floor_tol"], leak_tol=c["leak_tol"])
    res = evolve_router(rc)
    out.csv(res.write_csv)
    return {"final_imbalance": float(res.imbalance[-1]),
            "max_imbalance": float(res.imbalance.max()), "min_imbalance": float(res.imbalance.min()),
            "top_level_weight": res.top_weight, "final_norm": float(np.sqrt(res.norm_sq[-1]))}


RUNNERS = {"spectrum": run_spectrum, "chern": run_chern, "phase-map": run_phase_map,
           "evolve": run_evolve, "coherent": run_coherent, "lifetime": run_lifetime,
           "semiclassical": run_semiclassical, "floquet": run_floquet, "route": run_route}


def _numerical_errors() -> tuple:
    from .floquet import LeakageError
    from .krylov import KrylovError
    from .lda_topology import GaplessError
    from .router import CutoffLeakageError, FloorBreachError
    return (KrylovError, LeakageError, CutoffLeakageError, FloorBreachError, GaplessError,
            RuntimeError, ArithmeticError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = ns.command
    try:
        if ns.replay:
            meta = read_header(ns.replay)
            if meta.get("command") != command:
                raise ConfigError(f"{ns.replay} was written by {meta.get('command')!r}")
            file_data = meta["config"]
        else:
            file_data = load_config_file(ns.config) if ns.config else None
        cfg = merge_config(command, file_data, _overrides(ns))
        out = Output(command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = RUNNERS[command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _numerical_errors() as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    doc = out.summary(summary)
    print(json.dumps(doc["summary"], sort_keys=True, default=_jsonable))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
