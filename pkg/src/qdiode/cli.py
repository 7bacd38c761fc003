"""Command-line front end.

    qdiode <command> --config <path> [--out <path>] [--format csv|json]
                     [--seed N] [--threads N]

Configs are flat ``key = value`` files; ``#`` starts a comment. Times are in
units of 1/gamma, rates and detunings in gamma, amplitudes in sqrt(gamma) and
powers in gamma. Exit status: 0 success, 2 bad configuration, 3 a numerical
invariant failed.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__, correlations, diode, flapper, liouville, slh
from .errors import NumericalInvariantError

COMMANDS = ("steady", "scatter", "sweep-power", "sweep-efficiency", "correlate", "emission",
            "flap-compare")
FORMATS = ("csv", "json")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# fixed CSV headers, one per command
HEADERS = {
    "steady": ["row", "col", "rho_re", "rho_im"],
    "scatter": ["output", "input", "s_re", "s_im", "t"],
    "sweep-power": ["power [gamma]", "T_alpha", "T_beta", "efficiency"],
    "sweep-efficiency": ["pi_minus_phi [rad]", "domega1 [gamma]", "efficiency"],
    "correlate": ["model", "tau [1/gamma]", "g1_ref_re", "g1_ref_im", "g2_ref",
                  "g1_trans_re", "g1_trans_im", "g2_trans"],
    "emission": ["time [1/gamma]", "flux_left [gamma]", "flux_right [gamma]"],
    "flap-compare": ["tau [1/gamma]", "g2_ref_analytic", "g2_ref_mc", "g2_ref_mc_se",
                     "g2_ref_full", "g2_trans_analytic", "g2_trans_mc", "g2_trans_mc_se",
                     "g2_trans_full"],
}


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None, source="<config>"):
        where = source if line is None else f"{source}:{line}"
        what = f" field '{key}':" if key else ""
        super().__init__(f"{where}:{what} {message}")
        self.line, self.key = line, key


@dataclass(frozen=True)
class GridSpec:
    min: float
    max: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("grid needs at least 2 points")
        if not self.max > self.min:
            raise ValueError("grid max must exceed min")
        if self.scale not in ("linear", "log"):
            raise ValueError("scale must be 'linear' or 'log'")
        if self.scale == "log" and not self.min > 0:
            raise ValueError("log grid needs a positive min")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: slh.DiodeParams = field(default_factory=slh.DiodeParams)
    delta: float | None = None
    mode: str = diode.FULL_NUMERIC
    power: GridSpec | None = None
    dphi: GridSpec | None = None
    domega1: GridSpec | None = None
    tau: GridSpec | None = None
    tau_include_zero: bool = True
    time: GridSpec | None = None
    n_trajectories: int = 200
    t_span: float = 50.0
    samples_per_unit: int = 4000
    exact_rates: bool = False
    seed: int = 0
    threads: int = 1
    output_path: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        if self.mode not in diode.REGIMES:
            raise ValueError(f"mode must be one of {diode.REGIMES}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.n_trajectories < 1 or self.samples_per_unit < 1 or not self.t_span > 0:
            raise ValueError("trajectory settings must be positive")
        if self.delta is not None and not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("delta must be positive")

    def resolved(self) -> dict:
        """Plain-data view of every setting, defaults included."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (GridSpec, slh.DiodeParams)):
                v = {k: _jsonable(x) for k, x in asdict(v).items()}
            out[f.name] = _jsonable(v)
        return out


# --- parsing ----------------------------------------------------------------

_PARAM_KEYS = ("gamma1", "gamma2", "domega1", "domega2", "dphi")
_AMP_KEYS = ("alpha", "beta")
_GRID_DEFAULTS = {
    "power": "log",
    "dphi": "linear",
    "domega1": "linear",
    "tau": "log",
    "time": "linear",
}
_SCALARS = {
    "command": str, "delta": float, "mode": str, "tau_include_zero": "bool",
    "n_trajectories": int, "t_span": float, "samples_per_unit": int, "exact_rates": "bool",
    "seed": int, "threads": int, "out": str, "format": str,
}


def _allowed_keys():
    keys = set(_PARAM_KEYS) | set(_AMP_KEYS) | set(_SCALARS)
    for g in _GRID_DEFAULTS:
        keys |= {f"{g}_min", f"{g}_max", f"{g}_points", f"{g}_scale"}
    return keys


def read_config_text(text: str, source: str = "<config>") -> dict:
    """``{key: (raw value, line number)}`` from flat ``key = value`` text."""
    entries = {}
    allowed = _allowed_keys()
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", n, None, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in allowed:
            raise ConfigError("unknown key", n, key, source)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {entries[key][1]})", n, key, source)
        if not value:
            raise ConfigError("empty value", n, key, source)
        entries[key] = (value, n)
    return entries


def _convert(kind, value: str):
    if kind == "bool":
        low = value.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if kind is int:
        return int(value)
    if kind is float:
        x = float(value)
        if not math.isfinite(x):
            raise ValueError("must be finite")
        return x
    if kind is complex:
        z = complex(value.replace(" ", ""))
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ValueError("must be finite")
        return z
    return value


def build_config(entries: dict, command: str | None = None, source: str = "<config>") -> RunConfig:
    def get(key, kind, default=None):
        if key not in entries:
            return default
        value, line = entries[key]
        try:
            return _convert(kind, value)
        except ValueError as exc:
            raise ConfigError(str(exc), line, key, source) from None

    def line_of(*keys):
        for k in keys:
            if k in entries:
                return entries[k][1], k
        return None, keys[0] if keys else None

    cfg_command = get("command", str)
    if command is None:
        command = cfg_command
    elif cfg_command is not None and cfg_command != command:
        ln, _ = line_of("command")
        raise ConfigError(f"config is for '{cfg_command}', not '{command}'", ln, "command", source)
    if command is None:
        raise ConfigError("no command given", None, "command", source)

    delta = get("delta", float)
    pkw = {k: get(k, float) for k in _PARAM_KEYS if k in entries}
    pkw.update({k: get(k, complex) for k in _AMP_KEYS if k in entries})
    if delta is not None:
        clash = [k for k in ("domega1", "domega2", "dphi") if k in pkw]
        if clash:
            ln, key = line_of(*clash)
            raise ConfigError("cannot be combined with 'delta' (which fixes the optimal slice)",
                              ln, key, source)
        pkw.update(domega1=-delta, domega2=0.0, dphi=-delta)
    try:
        params = slh.DiodeParams(**pkw)
    except ValueError as exc:
        ln, key = line_of(*pkw)
        raise ConfigError(str(exc), ln, key, source) from None

    grids = {}
    for g, scale in _GRID_DEFAULTS.items():
        keys = [f"{g}_{s}" for s in ("min", "max", "points", "scale")]
        if not any(k in entries for k in keys):
            continue
        missing = [k for k in keys[:3] if k not in entries]
        if missing:
            raise ConfigError("grid needs _min, _max and _points", None, missing[0], source)
        try:
            grids[g] = GridSpec(get(keys[0], float), get(keys[1], float), get(keys[2], int),
                                get(keys[3], str, scale))
        except ValueError as exc:
            ln, key = line_of(*keys)
            raise ConfigError(str(exc), ln, key, source) from None

    kw = dict(command=command, params=params, delta=delta, **grids)
    for key, kind in _SCALARS.items():
        if key in ("command", "delta") or key not in entries:
            continue
        kw["output_path" if key == "out" else key] = get(key, kind)
    try:
        cfg = RunConfig(**kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), None, None, source) from None
    _check_command_needs(cfg, entries, source)
    return cfg


def _check_command_needs(cfg: RunConfig, entries: dict, source: str):
    needs = {
        "sweep-power": ["delta", "power"],
        "sweep-efficiency": ["dphi", "domega1"],
        "correlate": ["delta"],
        "emission": ["delta"],
        "flap-compare": ["delta"],
    }.get(cfg.command, [])
    for name in needs:
        if getattr(cfg, name) is None:
            raise ConfigError(f"required by '{cfg.command}'", None, name, source)
    a = cfg.params.alpha
    if cfg.command in ("correlate", "flap-compare") and (a == 0 or cfg.params.beta != 0):
        raise ConfigError("needs alpha != 0 and beta = 0", entries.get("alpha", (0, None))[1],
                          "alpha", source)
    if cfg.command == "emission" and (a != 0 or cfg.params.beta != 0):
        raise ConfigError("emission is undriven; alpha and beta must be 0",
                          entries.get("alpha", entries.get("beta", (0, None)))[1], "alpha", source)
    if cfg.command == "sweep-efficiency" and a == 0:
        raise ConfigError("needs a nonzero alpha", None, "alpha", source)
    if cfg.command == "scatter" and a == 0 and cfg.params.beta == 0:
        raise ConfigError("needs alpha or beta nonzero", None, "alpha", source)


def load_config(path: str, command: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", None, None, path) from None
    return build_config(read_config_text(text, path), command, path)


# --- commands ---------------------------------------------------------------

@dataclass
class Result:
    rows: list
    results: dict
    regime: object


def _jsonable(x):
    if isinstance(x, complex) or isinstance(x, np.complexfloating):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()] if x.dtype == complex else x.tolist()
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def run_steady(cfg: RunConfig) -> Result:
    t = slh.build_cascade(cfg.params)
    l = liouville.assemble(t)
    rho = liouville.steady_state(l, fallback_initial=liouville.ground_state())
    m = rho.rho
    rows = [(i, j, m[i, j].real, m[i, j].imag) for i in range(4) for j in range(4)]
    p_g, p_d = liouville.populations(rho)
    return Result(rows, {
        "rho": m, "basis": "gg,ge,eg,ee", "degenerate": rho.degenerate,
        "p_G": p_g, "p_D": p_d, "concurrence": liouville.concurrence(rho),
        "stationarity_residual": liouville.stationarity_residual(l, rho),
    }, diode.FULL_NUMERIC)


def run_scatter(cfg: RunConfig) -> Result:
    sm = diode.scattering(cfg.params, cfg.mode)
    if max(abs(cfg.params.alpha), abs(cfg.params.beta)) <= 0.1:
        sm.check_low_power()
    rows = [(i, j, sm.s[i, j].real, sm.s[i, j].imag, sm.t[i, j]) for i in range(2) for j in range(2)]
    return Result(rows, {"s": sm.s, "t": sm.t, "T_alpha": sm.t_alpha, "T_beta": sm.t_beta,
                         "R_alpha": sm.r_alpha, "R_beta": sm.r_beta,
                         "efficiency": diode.efficiency_from(sm.t_alpha, sm.t_beta)},
                  sm.regime_tag)


def run_sweep_power(cfg: RunConfig) -> Result:
    tab = diode.transmittance_curve(cfg.delta, cfg.power.values(), workers=cfg.threads)
    rows = list(zip(tab.power, tab.t_alpha, tab.t_beta, tab.efficiency))
    return Result(rows, {"power": tab.power, "T_alpha": tab.t_alpha, "T_beta": tab.t_beta,
                         "efficiency": tab.efficiency}, diode.FULL_NUMERIC)


def run_sweep_efficiency(cfg: RunConfig) -> Result:
    d, o = cfg.dphi, cfg.domega1
    em = diode.efficiency_map((d.min, d.max), (o.min, o.max), cfg.params.alpha,
                              (d.points, o.points), workers=cfg.threads)
    rows = [(x, y, em.eff[i, j]) for i, x in enumerate(em.dphi_grid)
            for j, y in enumerate(em.domega1_grid)]
    x, y, e = em.argmax
    results = {"pi_minus_phi": em.dphi_grid, "domega1": em.domega1_grid, "eff": em.eff,
               "argmax": {"pi_minus_phi": x, "domega1": y, "efficiency": e}}
    cut = _optimal_slice_cut(em)
    if cut is not None:
        results["optimal_slice_cut"] = cut
    return Result(rows, results, diode.FULL_NUMERIC)


def _optimal_slice_cut(em: diode.EfficiencyMap):
    """``{"delta": [...], "efficiency": [...]}`` along pi - phi = -domega1, if on the grid."""
    scale = max(np.max(np.abs(em.dphi_grid)), np.max(np.abs(em.domega1_grid)))
    deltas, effs = [], []
    for i, x in enumerate(em.dphi_grid):
        j = int(np.argmin(np.abs(em.domega1_grid + x)))
        if abs(em.domega1_grid[j] + x) <= 1e-12 * scale:
            deltas.append(x)
            effs.append(em.eff[i, j])
    return {"delta": deltas, "efficiency": effs} if len(deltas) >= 2 else None


def _tau_grid(cfg: RunConfig, gamma_tot: float) -> np.ndarray:
    if cfg.tau is None:
        return correlations.default_tau_grid(gamma_tot, 120, include_zero=cfg.tau_include_zero)
    taus = cfg.tau.values()
    if cfg.tau_include_zero and taus[0] != 0:
        taus = np.concatenate([[0.0], taus])
    return taus


def run_correlate(cfg: RunConfig) -> Result:
    p = cfg.params
    model = flapper.RateModel.from_diode(cfg.delta, p.alpha, cfg.exact_rates)
    taus = _tau_grid(cfg, model.gamma_tot)
    rows, results = [], {"tau": taus}
    for name in ("full", "eliminated"):
        series = correlations.driven_correlators(p, taus, name)
        ref, tr = series["ref"], series["trans"]
        rows += [(name, tau, ref.g1[k].real, ref.g1[k].imag, ref.g2[k],
                  tr.g1[k].real, tr.g1[k].imag, tr.g2[k]) for k, tau in enumerate(taus)]
        results[name] = {"g1_ref": ref.g1, "g2_ref": ref.g2, "g1_trans": tr.g1,
                         "g2_trans": tr.g2, "g1_ref_inf": ref.g1_infinity,
                         "g1_trans_inf": tr.g1_infinity, "g2_ref_zero": ref.g2_zero,
                         "g2_trans_zero": tr.g2_zero}
    an = flapper.analytic_correlators(model, p.alpha, taus)
    rows += [("flapper", tau, an.g1["ref"][k], 0.0, an.g2["ref"][k], an.g1["trans"][k], 0.0,
              an.g2["trans"][k]) for k, tau in enumerate(taus)]
    results["flapper"] = {"g1_ref": an.g1["ref"], "g2_ref": an.g2["ref"],
                          "g1_trans": an.g1["trans"], "g2_trans": an.g2["trans"]}
    results["closed_form"] = correlations.closed_form_limits(p.alpha, cfg.delta)
    regime = {"full": diode.FULL_NUMERIC, "eliminated": "adiabatic-eliminated",
              "flapper": "rate-limit" if not cfg.exact_rates else "rate-exact"}
    return Result(rows, results, regime)


def run_emission(cfg: RunConfig) -> Result:
    gamma_d = cfg.delta ** 2
    grid = cfg.time or GridSpec(0.0, 20.0 / gamma_d, 401)
    times = grid.values()
    start = liouville.dark_state()
    recs = correlations.emission_profile(cfg.params, start, times)
    left, right = correlations.integrated_emission(cfg.params, start, float(times[-1]))
    rows = [(t, r.flux_left, r.flux_right) for t, r in zip(times, recs)]
    total = left + right
    return Result(rows, {"initial_state": "D", "t_max": float(times[-1]), "energy_left": left,
                         "energy_right": right, "energy_total": total,
                         "left_fraction": left / total if total > 0 else float("nan"),
                         "dark_rates": liouville.dark_decay_rates(cfg.delta)},
                  diode.FULL_NUMERIC)


def run_flap_compare(cfg: RunConfig) -> Result:
    p = cfg.params
    model = flapper.RateModel.from_diode(cfg.delta, p.alpha, cfg.exact_rates)
    if cfg.tau is None:
        taus = np.linspace(0.0, 3.0 / model.gamma_tot, 16)
    else:
        taus = cfg.tau.values()
        if cfg.tau_include_zero and taus[0] != 0:
            taus = np.concatenate([[0.0], taus])
    an = flapper.analytic_correlators(model, p.alpha, taus)
    trajs = flapper.sample_many(model, cfg.t_span / model.gamma_tot, cfg.n_trajectories,
                                cfg.seed, workers=cfg.threads)
    emp = flapper.empirical_correlators(trajs, model, taus, cfg.samples_per_unit)
    full = correlations.driven_correlators(p, taus, "full")
    se = {k: emp.stderr[k] / model.stationary(r) for k, r in (("ref", 1), ("trans", 0))}
    rows = [(tau, an.g2["ref"][k], emp.g2["ref"][k], se["ref"][k], full["ref"].g2[k],
             an.g2["trans"][k], emp.g2["trans"][k], se["trans"][k], full["trans"].g2[k])
            for k, tau in enumerate(taus)]

    def zmax(name):
        err = np.abs(emp.g2[name] - an.g2[name])
        s = se[name]
        return float(np.max(np.where(s > 0, err / np.where(s > 0, s, 1), np.where(err > 0, np.inf, 0))))

    def rel(name):
        return float(np.max(np.abs(full[name].g2 - an.g2[name]) / an.g2[name]))

    dwells = int(sum(len(t.switch_times) for t in trajs))
    return Result(rows, {
        "tau": taus, "rates": {"gamma01": model.gamma01, "gamma10": model.gamma10,
                               "gamma_tot": model.gamma_tot},
        "switch_events": dwells, "mc_max_z": {"ref": zmax("ref"), "trans": zmax("trans")},
        "full_vs_analytic_max_rel": {"ref": rel("ref"), "trans": rel("trans")},
        "trajectory_seeds": flapper.child_seeds(cfg.seed, cfg.n_trajectories)[:8],
    }, {"mc": "flapper-monte-carlo", "analytic": "flapper-closed-form", "full": diode.FULL_NUMERIC})


RUNNERS = {
    "steady": run_steady,
    "scatter": run_scatter,
    "sweep-power": run_sweep_power,
    "sweep-efficiency": run_sweep_efficiency,
    "correlate": run_correlate,
    "emission": run_emission,
    "flap-compare": run_flap_compare,
}


# --- output -----------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.16e" % float(v)


def format_csv(command: str, rows: list) -> str:
    buf = io.StringIO()
    buf.write(",".join(HEADERS[command]) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def format_json(cfg: RunConfig, res: Result) -> str:
    doc = {
        "tool": "qdiode",
        "version": __version__,
        "command": cfg.command,
        "config": cfg.resolved(),
        "regime": _jsonable(res.regime),
        "columns": HEADERS[cfg.command],
        "results": _jsonable(res.results),
    }
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=True) + "\n"


def run(cfg: RunConfig) -> str:
    """Execute ``cfg`` and return the serialised artifact."""
    res = RUNNERS[cfg.command](cfg)
    return format_csv(cfg.command, res.rows) if cfg.format == "csv" else format_json(cfg, res)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdiode", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out")
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--version", action="version", version=f"qdiode {__version__}")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        overrides = {k: v for k, v in (("seed", args.seed), ("threads", args.threads),
                                       ("format", args.format), ("output_path", args.out))
                     if v is not None}
        if overrides:
            try:
                cfg = replace(cfg, **overrides)
            except ValueError as exc:
                raise ConfigError(str(exc), None, None, "command line") from None
        text = run(cfg)
    except NumericalInvariantError as exc:
        print(f"qdiode: numerical invariant '{exc.invariant}' failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"qdiode: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK
