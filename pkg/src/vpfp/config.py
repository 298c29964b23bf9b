"""Run configuration: flat TOML with dotted sections.

Example::

    tau = 0.5
    delta = 10.0
    t_end = 2.0
    mode = "nonlinear"
    rho_star.kind = "cosine"
    rho_star.eps = 0.3
    init.spatial_band = 1

Unknown keys are rejected.  Every key has a type and a default.
"""
import hashlib
import json
import math

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from .diagnostics import select_gamma
from .equilibrium import (PBSolverConfig, cosine_density, load_density, product_density,
                          random_smooth_density, solve_poisson_boltzmann, uniform_density)
from .phase_space import Discretization, InitialDataSpec, make_initial_data
from .solver import MODES, SolverConfig, cfl_dt


class ConfigError(ValueError):
    pass


_num = (int, float)

SCHEMA = {
    "tau": (_num, None),
    "delta": (_num, 1.0),
    "dt": (_num, None),
    "cfl": (_num, 0.4),
    "t_end": (_num, 1.0),
    "mode": (str, "nonlinear"),
    "n_x": (int, 32),
    "n_v": (int, 16),
    "dealias": (bool, None),
    "record_every": (int, 10),
    "seed": (int, 0),
    "epsilon": (_num, 0.05),
    "beta": ((str, list), None),
    "regime": (str, None),
    "rho_star.kind": (str, "uniform"),
    "rho_star.eps": (_num, 0.0),
    "rho_star.eps2": (_num, 0.0),
    "rho_star.kx": (int, 1),
    "rho_star.ky": (int, 0),
    "rho_star.seed": (int, 0),
    "rho_star.path": (str, ""),
    "init.kind": (str, "random_band"),
    "init.norm": (_num, 1.0),
    "init.spatial_band": (int, 2),
    "init.hermite_band": (int, 2),
    "init.homogeneous": (bool, True),
    "init.mode_n": (list, [0, 0]),
    "init.mode_k": (list, [1, 0]),
    "init.path": (str, ""),
    "pb.tol": (_num, 1e-10),
    "pb.max_iter": (int, 50),
    "pb.damping": (int, 20),
    "sweep.tau": (list, None),
    "sweep.delta": (list, None),
    "sweep.seed": (list, None),
    "asymptotics.regime": (str, "ii"),
    "asymptotics.tau_list": (list, [0.2, 0.1, 0.05]),
    "asymptotics.horizon": (_num, None),
    "asymptotics.record_ds": (_num, 0.05),
    "asymptotics.window": (list, None),
    "diagnose.states": (int, 10),
    "diagnose.tol": (_num, 1e-9),
}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_config(text):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return validate(_flatten(raw))


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def validate(flat):
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for key, (typ, default) in SCHEMA.items():
        if key not in flat:
            cfg[key] = default
            continue
        val = flat[key]
        ok = isinstance(val, typ) and not (typ is _num and isinstance(val, bool))
        if typ is int and isinstance(val, bool):
            ok = False
        if not ok:
            raise ConfigError(f"config key {key!r} has the wrong type ({type(val).__name__})")
        cfg[key] = val
    if cfg["tau"] is None:
        raise ConfigError("tau is required")
    if not cfg["tau"] > 0:
        raise ConfigError("tau must be positive")
    if not cfg["delta"] > 0:
        raise ConfigError("delta must be positive")
    if not cfg["t_end"] > 0:
        raise ConfigError("t_end must be positive")
    if cfg["dt"] is not None and not cfg["dt"] > 0:
        raise ConfigError("dt must be positive")
    if cfg["mode"] not in MODES or cfg["mode"] == "frozen":
        raise ConfigError("mode must be one of linear_vfp, nonlinear")
    if not 0 < cfg["epsilon"] < 1:
        raise ConfigError("epsilon must lie in (0, 1)")
    if cfg["dealias"] is None:
        cfg["dealias"] = cfg["mode"] == "nonlinear"
    if cfg["n_x"] < 8 or cfg["n_x"] % 2:
        raise ConfigError("n_x must be an even integer >= 8")
    if cfg["n_v"] < 4:
        raise ConfigError("n_v must be >= 4")
    if not 0 <= cfg["init.spatial_band"] < cfg["n_x"] // 2:
        raise ConfigError("init.spatial_band must lie in [0, n_x/2)")
    if not 0 <= cfg["init.hermite_band"] < cfg["n_v"]:
        raise ConfigError("init.hermite_band must lie in [0, n_v)")
    if not 0 < cfg["cfl"] <= 1:
        raise ConfigError("cfl must lie in (0, 1]")
    if cfg["dt"] is not None:
        limit = cfl_dt(Discretization(cfg["n_x"], cfg["n_v"]), cfg["cfl"])
        if cfg["dt"] > limit * (1 + 1e-12):
            raise ConfigError(f"dt={cfg['dt']} exceeds the stability bound cfl*dx/v_max = {limit:.6g}")
    if cfg["regime"] not in (None, "diffusive", "collisional"):
        raise ConfigError("regime must be diffusive or collisional")
    for key in ("sweep.tau", "sweep.delta"):
        if cfg[key] is not None and any(not (isinstance(v, _num) and v > 0) for v in cfg[key]):
            raise ConfigError(f"{key} entries must be positive numbers")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def build_density(cfg):
    n = cfg["n_x"]
    kind = cfg["rho_star.kind"]
    if kind == "uniform":
        return uniform_density(n)
    if kind == "cosine":
        return cosine_density(n, cfg["rho_star.eps"], cfg["rho_star.kx"], cfg["rho_star.ky"])
    if kind == "product":
        return product_density(n, cfg["rho_star.eps"], cfg["rho_star.eps2"])
    if kind == "random":
        return random_smooth_density(n, cfg["rho_star.seed"], cfg["rho_star.eps"] or 0.4)
    if kind == "file":
        rho = load_density(cfg["rho_star.path"])
        if rho.n != n:
            raise ConfigError("density file size differs from n_x")
        return rho
    raise ConfigError(f"unknown rho_star.kind {kind!r}")


def build_equilibrium(cfg):
    pb = PBSolverConfig(tol=cfg["pb.tol"], max_iter=cfg["pb.max_iter"], damping=cfg["pb.damping"])
    return solve_poisson_boltzmann(build_density(cfg), cfg["delta"], pb)


def build_discretization(cfg):
    return Discretization(cfg["n_x"], cfg["n_v"], cfg["dealias"])


def build_initial(cfg, disc, eq):
    spec = InitialDataSpec(kind=cfg["init.kind"], seed=cfg["seed"], target_norm=cfg["init.norm"],
                           spatial_band=cfg["init.spatial_band"],
                           hermite_band=cfg["init.hermite_band"],
                           homogeneous=cfg["init.homogeneous"], mode_n=tuple(cfg["init.mode_n"]),
                           mode_k=tuple(cfg["init.mode_k"]), path=cfg["init.path"])
    return make_initial_data(spec, disc, eq)


def build_hypo(cfg):
    beta = cfg["beta"]
    if beta is None:
        beta = "diffusive" if cfg["tau"] <= 1 else "collisional"
    if isinstance(beta, list):
        beta = tuple(float(b) for b in beta)
    return select_gamma(cfg["epsilon"], beta, cfg["regime"])


def build_solver_config(cfg, store_states=False):
    return SolverConfig(tau=float(cfg["tau"]), delta=float(cfg["delta"]), t_end=float(cfg["t_end"]),
                        dt=cfg["dt"], cfl=float(cfg["cfl"]), mode=cfg["mode"],
                        record_every=cfg["record_every"], hypo=build_hypo(cfg),
                        store_states=store_states)


def sweep_cells(cfg):
    """Cartesian product of the sweep axes, in a fixed order."""
    taus = cfg["sweep.tau"] or [cfg["tau"]]
    deltas = cfg["sweep.delta"] or [cfg["delta"]]
    seeds = cfg["sweep.seed"] or [cfg["seed"]]
    cells = []
    for tau in taus:
        for delta in deltas:
            for seed in seeds:
                c = dict(cfg)
                c.update({"tau": tau, "delta": delta, "seed": seed,
                          "sweep.tau": None, "sweep.delta": None, "sweep.seed": None})
                cells.append(validate({k: v for k, v in c.items() if v is not None}))
    return cells


def finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def jsonable(obj):
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return finite_or_none(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
