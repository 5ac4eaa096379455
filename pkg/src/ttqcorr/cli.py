"""Batch command-line interface.

Every command writes a CSV whose `# key = value` header records the full
effective configuration; re-running the command with that configuration
reproduces the file byte for byte.  Exit codes: 0 success, 2 configuration
error, 3 input-data error, 4 insufficient statistics.
"""
from __future__ import annotations

import argparse
import gzip
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import measures as ms
from . import production as pr
from . import tomography as tm
from . import witnesses as wt
from .decay import EventBatch, ProductionSource, generate_events, read_events_csv, write_events_csv
from .states import BEAM, HELICITY, TwoQubitState, validate_state

_EXCLUDED_FROM_HEADER = {"out", "config", "threads"}


class ConfigError(Exception):
    pass


class InputDataError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _open_out(path):
    path = Path(path)
    return gzip.open(path, "wt", encoding="utf-8") if path.suffix == ".gz" \
        else open(path, "w", encoding="utf-8")


def _write_report(out, command, cfg, columns, rows):
    """CSV writer with the reproducibility header."""
    with _open_out(out) as fh:
        fh.write(f"# ttqcorr = {__version__}\n")
        fh.write(f"# command = {command}\n")
        for key, val in cfg.items():
            if key in _EXCLUDED_FROM_HEADER or val is None:
                continue
            fh.write(f"# {key} = {_fmt(val)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, bool) or isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                elif isinstance(v, (float, np.floating)):
                    cells.append(f"{v + 0.0 if v != 0.0 else 0.0:.17g}")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def read_header_config(path) -> dict:
    """Parse the `# key = value` header of an output file."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    cfg = {}
    with opener(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                cfg[key.strip()] = val.strip()
    return cfg


def _load_config_file(path) -> dict:
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"malformed config line: {line!r}")
                key, _, val = line.partition("=")
                cfg[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return cfg


_DEFAULTS = {
    "map": {"channel": None, "lumi": None, "beta_min": 0.0, "beta_max": 0.999,
            "n_beta": 50, "n_theta": 50, "mt_gev": pr.M_T_DEFAULT},
    "trajectory": {"lumi": None, "cuts": None, "mt_gev": pr.M_T_DEFAULT},
    "simulate": {"channel": None, "beta": None, "theta": None, "cperp": None,
                 "cz": None, "state_file": None, "lumi": None, "m_cut": None,
                 "n": 10000, "seed": 1, "frame": HELICITY, "mt_gev": pr.M_T_DEFAULT},
    "tomo": {"events": None},
    "discord-direct": {"events": None, "grid_size": 1000, "alpha": 0.2,
                       "extrapolate": False, "error_splits": 10},
    "ellipsoid": {"events": None, "grid_size": 1000, "alpha": 0.2},
    "classify": {"channel": None, "beta": None, "theta": None, "cperp": None,
                 "cz": None, "state_file": None},
    "witness": {"channel": None, "beta": None, "theta": None, "cperp": None,
                "cz": None, "state_file": None, "lumi": None, "m_cut": None,
                "helicity_integrated": False, "eps_b": None, "eps_c": None,
                "mt_gev": pr.M_T_DEFAULT},
}

_TYPES = {
    "beta_min": float, "beta_max": float, "n_beta": int, "n_theta": int,
    "mt_gev": float, "beta": float, "theta": float, "cperp": float, "cz": float,
    "m_cut": float, "n": int, "seed": int, "grid_size": int, "alpha": float,
    "extrapolate": lambda s: bool(int(s)), "error_splits": int,
    "helicity_integrated": lambda s: bool(int(s)),
}


def _merge_config(command, args) -> dict:
    cfg = dict(_DEFAULTS[command])
    file_cfg = _load_config_file(args.config) if args.config else {}
    for key, raw in file_cfg.items():
        if key in ("command",):
            continue
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r} for command {command}")
        cfg[key] = _TYPES.get(key, str)(raw)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["out"] = args.out
    cfg["threads"] = max(1, args.threads)
    return cfg


def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _load_lumi(path) -> pr.LuminosityTable:
    try:
        return pr.load_luminosity_csv(path)
    except (OSError, ValueError) as exc:
        raise InputDataError(f"luminosity table: {exc}") from exc


def _load_state_file(path) -> TwoQubitState:
    try:
        kv = {}
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                kv[key.strip()] = val.strip()
        bp = np.array([float(x) for x in kv["b_plus"].split(",")])
        bm = np.array([float(x) for x in kv["b_minus"].split(",")])
        C = np.array([float(x) for x in kv["c"].split(",")]).reshape(3, 3)
        state = TwoQubitState(bp, bm, C, kv.get("frame", HELICITY))
    except (OSError, KeyError, ValueError) as exc:
        raise InputDataError(f"state file: {exc}") from exc
    if not validate_state(state).is_physical:
        raise InputDataError("state file describes an unphysical state")
    return state


def _resolve_fixed_state(cfg) -> TwoQubitState:
    if cfg.get("state_file"):
        return _load_state_file(cfg["state_file"])
    if cfg.get("cperp") is not None or cfg.get("cz") is not None:
        if cfg.get("cperp") is None or cfg.get("cz") is None:
            raise ConfigError("cperp and cz must be given together")
        try:
            return pr.IntegratedTState(cfg["cperp"], cfg["cz"]).to_state()
        except ValueError as exc:
            raise InputDataError(str(exc)) from exc
    if cfg.get("channel"):
        if cfg.get("beta") is None or cfg.get("theta") is None:
            raise ConfigError("channel source needs --beta and --theta")
        try:
            return pr.spin_state(cfg["channel"], cfg["beta"], cfg["theta"])
        except ValueError as exc:
            raise InputDataError(str(exc)) from exc
    raise ConfigError("no state specified: use --state-file, --cperp/--cz, "
                      "or --channel/--beta/--theta")


def _load_events(path) -> EventBatch:
    try:
        return read_events_csv(path)
    except (OSError, ValueError) as exc:
        raise InputDataError(f"event file: {exc}") from exc


def _state_measures(state: TwoQubitState):
    d = ms.discord(state, "A").value
    ent = ms.is_entangled(state)
    steer = ms.steering_functional(state.corr)
    bell = ms.horodecki_parameter(state.corr)
    return d, ent.entangled, steer > 1.0 + ms.CLASSIFY_TOL, bell > 1.0 + ms.CLASSIFY_TOL


# ---------------------------------------------------------------------------
# commands


def _cmd_map(cfg) -> int:
    if (cfg["channel"] is None) == (cfg["lumi"] is None):
        raise ConfigError("map needs exactly one of --channel or --lumi")
    if cfg["n_beta"] < 2 or cfg["n_theta"] < 2:
        raise ConfigError("grid sizes must be at least 2")
    lumi = _load_lumi(cfg["lumi"]) if cfg["lumi"] else None
    betas = np.linspace(cfg["beta_min"], cfg["beta_max"], cfg["n_beta"])
    thetas = np.linspace(0.0, np.pi, cfg["n_theta"])
    if not 0.0 <= cfg["beta_min"] <= cfg["beta_max"] < 1.0:
        raise ConfigError("beta grid must satisfy 0 <= min <= max < 1")

    def one(bt):
        beta, theta = bt
        z = float(np.cos(theta))
        if lumi is None:
            state = pr.spin_state(cfg["channel"], beta, theta)
        else:
            m = pr.mass_from_beta(beta, cfg["mt_gev"])
            wg = lumi.channel_weight(pr.GG, m) * pr._gg_me(beta, z) / pr._gg_me_norm(beta)
            wq = lumi.channel_weight(pr.QQBAR, m) * pr._qq_me(beta, z) / pr._qq_me_norm(beta)
            if wg + wq <= 0.0:
                raise InputDataError(f"table has no weight at m = {m:.1f} GeV")
            state = pr.mixed_state([(pr.spin_state(pr.GG, beta, theta), wg),
                                    (pr.spin_state(pr.QQBAR, beta, theta), wq)])
        d, ent, steer, bell = _state_measures(state)
        C = state.corr
        return (beta, theta, d, ent, steer, bell,
                C[0, 0], C[2, 2], C[1, 1], C[0, 2])

    grid = [(b, t) for b in betas for t in thetas]
    rows = _pmap(one, grid, cfg["threads"])
    _write_report(cfg["out"], "map", cfg,
                  ["beta", "theta", "discord", "entangled", "steerable", "bell",
                   "c_kk", "c_rr", "c_nn", "c_kr"], rows)
    return 0


def _parse_cuts(spec: str):
    try:
        cuts = [float(c) for c in spec.split(",") if c.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad cuts list: {spec!r}") from exc
    if not cuts:
        raise ConfigError("empty cuts list")
    return cuts


def _cmd_trajectory(cfg) -> int:
    if not cfg["lumi"]:
        raise ConfigError("trajectory needs --lumi")
    if not cfg["cuts"]:
        raise ConfigError("trajectory needs --cuts m1,m2,...")
    lumi = _load_lumi(cfg["lumi"])
    cuts = _parse_cuts(cfg["cuts"])

    def one(cut):
        try:
            ts = pr.integrated_state(lumi, cut, cfg["mt_gev"])
        except ValueError as exc:
            raise InputDataError(str(exc)) from exc
        d = ms.discord_t_state(ts.c_perp, ts.c_perp, ts.c_z)
        cls = ms.classify(ts.to_state())
        return (cut, ts.c_perp, ts.c_z, d, cls.value)

    rows = _pmap(one, cuts, cfg["threads"])
    _write_report(cfg["out"], "trajectory", cfg,
                  ["m_cut", "c_perp", "c_z", "discord", "class"], rows)
    return 0


def _header_lines(command, cfg):
    lines = [f"command = {command}"]
    for key, val in cfg.items():
        if key in _EXCLUDED_FROM_HEADER or val is None:
            continue
        lines.append(f"{key} = {_fmt(val)}")
    return lines


def _cmd_simulate(cfg) -> int:
    if cfg["n"] < 1:
        raise ConfigError("need n >= 1 events")
    if cfg["frame"] not in (HELICITY, BEAM):
        raise ConfigError("frame must be helicity or beam")
    if cfg["lumi"]:
        if cfg["m_cut"] is None:
            raise ConfigError("production source needs --m-cut")
        source = ProductionSource(_load_lumi(cfg["lumi"]), cfg["m_cut"], cfg["mt_gev"])
    else:
        source = _resolve_fixed_state(cfg)
        if cfg["frame"] != source.frame:
            raise ConfigError(f"state is given in the {source.frame} frame; "
                              "--frame must match")
    try:
        batch = generate_events(source, cfg["n"], cfg["seed"], cfg["frame"])
    except ValueError as exc:
        raise InputDataError(str(exc)) from exc
    write_events_csv(batch, cfg["out"], extra_header=_header_lines("simulate", cfg))
    return 0


def _cmd_tomo(cfg) -> int:
    if not cfg["events"]:
        raise ConfigError("tomo needs --events")
    batch = _load_events(cfg["events"])
    est = tm.estimate_state(batch)
    tm.write_state_report(est, cfg["out"], header=_header_lines("tomo", cfg))
    return 0


def _cmd_discord_direct(cfg) -> int:
    if not cfg["events"]:
        raise ConfigError("discord-direct needs --events")
    batch = _load_events(cfg["events"])
    if cfg["error_splits"] > 1:
        value, sigma = tm.direct_discord_with_error(
            batch, cfg["grid_size"], cfg["alpha"], cfg["extrapolate"],
            cfg["error_splits"])
    else:
        value = tm.direct_discord(batch, cfg["grid_size"], cfg["alpha"],
                                  cfg["extrapolate"])
        sigma = float("nan")
    rows = [("discord_direct", value), ("sigma", sigma),
            ("n_events", len(batch)), ("grid_size", cfg["grid_size"]),
            ("alpha", cfg["alpha"]), ("extrapolate", int(cfg["extrapolate"]))]
    _write_report(cfg["out"], "discord-direct", cfg, ["key", "value"], rows)
    return 0


def _cmd_ellipsoid(cfg) -> int:
    if not cfg["events"]:
        raise ConfigError("ellipsoid needs --events")
    batch = _load_events(cfg["events"])
    ell, records, rms = tm.reconstruct_ellipsoid(batch, cfg["grid_size"], cfg["alpha"])
    tm.write_ellipsoid_report(cfg["out"], ell, records, rms,
                              header=_header_lines("ellipsoid", cfg))
    return 0


def _cmd_classify(cfg) -> int:
    state = _resolve_fixed_state(cfg)
    cls = ms.classify(state)
    da = ms.discord(state, "A").value
    db = ms.discord(state, "B").value
    ent = ms.is_entangled(state)
    rows = [("class", cls.value), ("discord_a", da), ("discord_b", db),
            ("negativity", ent.negativity),
            ("steering_functional", ms.steering_functional(state.corr)),
            ("horodecki", ms.horodecki_parameter(state.corr))]
    _write_report(cfg["out"], "classify", cfg, ["key", "value"], rows)
    return 0


def _cmd_witness(cfg) -> int:
    if cfg["lumi"]:
        if cfg["m_cut"] is None:
            raise ConfigError("integrated witness needs --m-cut")
        lumi = _load_lumi(cfg["lumi"])
        try:
            if cfg["helicity_integrated"]:
                state = pr.integrated_matrix_helicity(lumi, cfg["m_cut"], cfg["mt_gev"])
            else:
                state = pr.integrated_state(lumi, cfg["m_cut"], cfg["mt_gev"]).to_state()
        except ValueError as exc:
            raise InputDataError(str(exc)) from exc
    else:
        state = _resolve_fixed_state(cfg)
    scale = None
    if cfg["eps_b"] or cfg["eps_c"]:
        eps_b = np.array([float(x) for x in cfg["eps_b"].split(",")]) \
            if cfg["eps_b"] else np.zeros(3)
        comps = [float(x) for x in cfg["eps_c"].split(",")] if cfg["eps_c"] else [0.0] * 3
        if len(eps_b) != 3 or len(comps) != 3:
            raise ConfigError("eps_b and eps_c take 3 comma-separated numbers")
        inj = wt.inject_cp_violation(state, eps_b, wt.antisymmetric_matrix(*comps))
        state, scale = inj.state, inj.scale
    report = wt.witness_report(state)
    rows = [("delta_discord", report.delta_discord)]
    rows += [(f"center_asymmetry_{ax}", report.center_asymmetry[i])
             for i, ax in enumerate("xyz")]
    rows += [(f"semiaxis_asymmetry_{i}", report.semiaxis_asymmetry[i]) for i in range(3)]
    rows += [("orientation_angle", report.orientation_angle)]
    rows += [(f"b_asymmetry_{ax}", report.b_asymmetry[i]) for i, ax in enumerate("xyz")]
    rows += [("c_antisymmetry_norm", report.c_antisymmetry_norm)]
    if scale is not None:
        rows += [("injection_scale", scale)]
    _write_report(cfg["out"], "witness", cfg, ["key", "value"], rows)
    return 0


_HANDLERS = {
    "map": _cmd_map,
    "trajectory": _cmd_trajectory,
    "simulate": _cmd_simulate,
    "tomo": _cmd_tomo,
    "discord-direct": _cmd_discord_direct,
    "ellipsoid": _cmd_ellipsoid,
    "classify": _cmd_classify,
    "witness": _cmd_witness,
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ttqcorr",
        description="Quantum correlations of top-antitop spin states")
    p.add_argument("--version", action="version", version=f"ttqcorr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_, flags):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--out", required=False, help="output CSV (.gz accepted)")
        sp.add_argument("--threads", type=int, default=1)
        for flag, typ, help2 in flags:
            kw = {"help": help2}
            if typ is bool:
                kw["action"] = "store_const"
                kw["const"] = True
                kw["default"] = None
            else:
                kw["type"] = typ
                kw["default"] = None
            sp.add_argument(flag, **kw)
        return sp

    state_flags = [
        ("--channel", str, "production channel: gg or qqbar"),
        ("--beta", float, "top velocity in [0, 1)"),
        ("--theta", float, "production angle in [0, pi]"),
        ("--cperp", float, "integrated-family transverse correlation"),
        ("--cz", float, "integrated-family longitudinal correlation"),
        ("--state-file", str, "key = value file with b_plus, b_minus, c, frame"),
    ]
    add("map", "scan correlation measures over (beta, theta)", [
        ("--channel", str, "gg or qqbar"),
        ("--lumi", str, "luminosity CSV for a channel mixture"),
        ("--beta-min", float, "lowest beta"),
        ("--beta-max", float, "highest beta"),
        ("--n-beta", int, "beta grid points"),
        ("--n-theta", int, "theta grid points"),
        ("--mt-gev", float, "top mass in GeV"),
    ])
    add("trajectory", "integrated (c_perp, c_z) versus mass cut", [
        ("--lumi", str, "luminosity CSV"),
        ("--cuts", str, "comma-separated mass cuts in GeV"),
        ("--mt-gev", float, "top mass in GeV"),
    ])
    add("simulate", "generate dileptonic decay events", state_flags + [
        ("--lumi", str, "luminosity CSV (production source)"),
        ("--m-cut", float, "mass cut for the production source"),
        ("--n", int, "number of events"),
        ("--seed", int, "generator seed"),
        ("--frame", str, "helicity or beam"),
        ("--mt-gev", float, "top mass in GeV"),
    ])
    add("tomo", "moment tomography of an event file", [
        ("--events", str, "event CSV from simulate"),
    ])
    add("discord-direct", "discord from conditional distributions", [
        ("--events", str, "event CSV from simulate"),
        ("--grid-size", int, "measurement directions"),
        ("--alpha", float, "cone half-angle in radians"),
        ("--extrapolate", bool, "two-cone Richardson extrapolation"),
        ("--error-splits", int, "subsamples for the uncertainty (0 disables)"),
    ])
    add("ellipsoid", "reconstruct the steering ellipsoid from events", [
        ("--events", str, "event CSV from simulate"),
        ("--grid-size", int, "sweep directions"),
        ("--alpha", float, "cone half-angle in radians"),
    ])
    add("classify", "hierarchy class of a state", state_flags)
    add("witness", "CP witnesses of a state or integrated record", state_flags + [
        ("--lumi", str, "luminosity CSV"),
        ("--m-cut", float, "mass cut"),
        ("--helicity-integrated", bool, "integrate coefficients in the helicity basis"),
        ("--eps-b", str, "polarisation injection bx,by,bz"),
        ("--eps-c", str, "antisymmetric injection c_xy,c_xz,c_yz"),
        ("--mt-gev", float, "top mass in GeV"),
    ])
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge_config(args.command, args)
        if not cfg.get("out"):
            raise ConfigError("--out is required")
        return _HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"ttqcorr: configuration error: {exc}", file=sys.stderr)
        return 2
    except InputDataError as exc:
        print(f"ttqcorr: input error: {exc}", file=sys.stderr)
        return 3
    except tm.InsufficientStatistics as exc:
        print(f"ttqcorr: insufficient statistics: {exc}", file=sys.stderr)
        return 4


def entry_point():
    raise SystemExit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry_point()
