"""Scenario files: one JSON object per run, versioned schema.

Top-level fields::

    schema_version  1
    mode            simulate | verify-boundary | verify-pair | green-check
                    | minimize | converge | sweep
    domain          {"kind": "unit_disk"}
                    {"kind": "disk", "center": [x, y], "radius": R}
                    {"kind": "ellipse", "a": a, "b": b, "samples": 256,
                     "center": [x, y], "angle": 0.0}
                    {"kind": "curve", "points": [[x, y], ...]}
    green           {"backend": "auto" | "image" | "bie", "panels": 256}
    tolerances      {"rel_tol", "abs_tol", "event_rel_tol", "check_tol"}
    params          mode parameters (see MODE_PARAMS)
    output          {"dir": "out"}
    seed            integer
    workers         integer or null (null: logical cores)
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import Domain

SCHEMA_VERSION = 1
MODES = ("simulate", "verify-boundary", "verify-pair", "green-check", "minimize",
         "converge", "sweep")

DEFAULT_TOLERANCES = {
    "rel_tol": 1e-9,
    "abs_tol": 1e-12,
    "event_rel_tol": 1e-10,
    "check_tol": 1e-6,
}

# required and optional parameters per mode, with defaults for the latter
MODE_PARAMS = {
    "simulate": (("positions", "moduli"),
                 {"T_max": 1.0, "collision_radius": None,
                  "continue_after_collision": False}),
    "verify-boundary": (("delta0", "gamma0"),
                        {"spectators": None, "K": 1.0, "boundary_parameter": 0.0,
                         "modulus": 1, "T_max": None, "collision_radius": None}),
    "verify-pair": (("zeta0", "eta0"),
                    {"spectators": None, "center": None, "direction": [1.0, 0.0],
                     "T_max": None, "collision_radius": None}),
    "green-check": ((), {"pairs": 100, "radius_fraction": 0.9}),
    "minimize": (("n",), {"eps": None, "datum": "uniform", "starts": None,
                          "tol": 1e-5, "max_iter": 200}),
    "converge": (("kind",), {"positions": None, "moduli": None, "centers": None,
                             "eps_list": [1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
                             "datum": "uniform"}),
    "sweep": (("n", "eps_list"), {"datum": "uniform", "starts": None, "tol": 1e-5,
                                  "max_iter": 200, "proxy": 0.8}),
}


def _require(cond, fld, message):
    if not cond:
        raise ConfigError(fld, message)


def _point(value, fld):
    try:
        p = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(fld, "must be a pair of numbers") from None
    _require(p.shape == (2,) and np.all(np.isfinite(p)), fld, "must be a pair of finite numbers")
    return p


def _points(value, fld):
    try:
        p = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(fld, "must be a list of [x, y] pairs") from None
    _require(p.ndim == 2 and p.shape[1] == 2 and len(p) > 0 and np.all(np.isfinite(p)),
             fld, "must be a non-empty list of [x, y] pairs")
    return p


def _positive(value, fld):
    _require(isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0,
             fld, "must be a positive number")
    return float(value)


def _moduli(value, fld, count):
    _require(isinstance(value, list) and all(v in (1, -1) for v in value)
             and not any(isinstance(v, bool) for v in value), fld,
             "must be a list of +1 / -1")
    _require(len(value) == count, fld, f"needs {count} entries to match the positions")
    return np.array(value, dtype=int)


def build_domain(block):
    _require(isinstance(block, dict), "domain", "must be an object")
    kind = block.get("kind")
    try:
        if kind == "unit_disk":
            return Domain.unit_disk()
        if kind == "disk":
            return Domain.disk(_point(block.get("center", [0, 0]), "domain.center"),
                               _positive(block.get("radius"), "domain.radius"))
        if kind == "ellipse":
            samples = block.get("samples", 256)
            _require(isinstance(samples, int) and samples >= 16, "domain.samples",
                     "must be an integer >= 16")
            return Domain.ellipse(_positive(block.get("a"), "domain.a"),
                                  _positive(block.get("b"), "domain.b"), samples,
                                  _point(block.get("center", [0, 0]), "domain.center"),
                                  float(block.get("angle", 0.0)))
        if kind == "curve":
            return Domain.from_samples(_points(block.get("points"), "domain.points"))
    except ConfigError:
        raise
    except Exception as exc:  # geometry validation errors name the block
        raise ConfigError("domain", str(exc)) from exc
    raise ConfigError("domain.kind", f"unknown kind {kind!r}")


@dataclass
class Scenario:
    mode: str
    domain: dict
    params: dict
    green: dict = field(default_factory=lambda: {"backend": "auto", "panels": 256})
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: dict = field(default_factory=lambda: {"dir": "out"})
    seed: int = 0
    workers: int | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data):
        _require(isinstance(data, dict), "scenario", "must be a JSON object")
        known = {"schema_version", "mode", "domain", "params", "green", "tolerances",
                 "output", "seed", "workers"}
        for key in data:
            _require(key in known, key, "unknown field")
        version = data.get("schema_version", SCHEMA_VERSION)
        _require(version == SCHEMA_VERSION, "schema_version",
                 f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
        mode = data.get("mode")
        _require(mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
        _require("domain" in data, "domain", "missing")
        green = {"backend": "auto", "panels": 256, **data.get("green", {})}
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(data.get("tolerances", {}))
        required, optional = MODE_PARAMS[mode]
        raw = data.get("params", {})
        _require(isinstance(raw, dict), "params", "must be an object")
        for key in raw:
            _require(key in required or key in optional, f"params.{key}",
                     f"not a parameter of mode {mode}")
        params = {**copy.deepcopy(optional), **copy.deepcopy(raw)}
        for key in required:
            _require(key in params, f"params.{key}", f"required for mode {mode}")
        scenario = cls(
            mode=mode,
            domain=copy.deepcopy(data["domain"]),
            params=params,
            green=green,
            tolerances=tol,
            output={"dir": "out", **data.get("output", {})},
            seed=data.get("seed", 0),
            workers=data.get("workers"),
            schema_version=version,
        )
        scenario.validate()
        return scenario

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "mode": self.mode,
            "domain": copy.deepcopy(self.domain),
            "params": copy.deepcopy(self.params),
            "green": dict(self.green),
            "tolerances": dict(self.tolerances),
            "output": dict(self.output),
            "seed": self.seed,
            "workers": self.workers,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("scenario", f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("scenario", f"cannot read {path}: {exc}") from exc
        return cls.from_json(text)

    # -- validation -----------------------------------------------------------

    def validate(self):
        for key, value in self.tolerances.items():
            _require(key in DEFAULT_TOLERANCES, f"tolerances.{key}", "unknown tolerance")
            _positive(value, f"tolerances.{key}")
        _require(self.green.get("backend") in ("auto", "image", "bie"), "green.backend",
                 "must be auto, image or bie")
        panels = self.green.get("panels")
        _require(isinstance(panels, int) and panels >= 16, "green.panels",
                 "must be an integer >= 16")
        _require(isinstance(self.seed, int) and not isinstance(self.seed, bool)
                 and self.seed >= 0, "seed", "must be a non-negative integer")
        _require(self.workers is None or (isinstance(self.workers, int) and self.workers > 0),
                 "workers", "must be a positive integer or null")
        _require(isinstance(self.output.get("dir"), str), "output.dir", "must be a string")
        build_domain(self.domain)
        getattr(self, "_check_" + self.mode.replace("-", "_"))(self.params)

    def _check_time(self, p):
        for key in ("T_max", "collision_radius"):
            if p.get(key) is not None:
                _positive(p[key], f"params.{key}")

    def _check_spectators(self, p):
        spec = p.get("spectators")
        if spec is None:
            return
        _require(isinstance(spec, dict), "params.spectators",
                 "must be an object with positions and moduli")
        pos = _points(spec.get("positions"), "params.spectators.positions")
        _moduli(spec.get("moduli"), "params.spectators.moduli", len(pos))

    def _check_simulate(self, p):
        pos = _points(p["positions"], "params.positions")
        _moduli(p["moduli"], "params.moduli", len(pos))
        self._check_time(p)

    def _check_verify_boundary(self, p):
        _positive(p["delta0"], "params.delta0")
        _positive(p["gamma0"], "params.gamma0")
        _positive(p["K"], "params.K")
        _require(p["modulus"] in (1, -1), "params.modulus", "must be +1 or -1")
        self._check_spectators(p)
        self._check_time(p)

    def _check_verify_pair(self, p):
        _positive(p["zeta0"], "params.zeta0")
        _positive(p["eta0"], "params.eta0")
        if p.get("center") is not None:
            _point(p["center"], "params.center")
        d = _point(p["direction"], "params.direction")
        _require(np.hypot(*d) > 0, "params.direction", "must be non-zero")
        self._check_spectators(p)
        self._check_time(p)

    def _check_green_check(self, p):
        _require(isinstance(p["pairs"], int) and p["pairs"] > 0, "params.pairs",
                 "must be a positive integer")
        f = p["radius_fraction"]
        _require(isinstance(f, (int, float)) and 0 < f < 1, "params.radius_fraction",
                 "must lie in (0, 1)")

    def _check_datum(self, p):
        datum = p.get("datum", "uniform")
        if datum == "uniform":
            return
        table = np.asarray(datum, dtype=float) if isinstance(datum, list) else None
        _require(table is not None and table.ndim == 2 and table.shape[1] == 2
                 and len(table) >= 2, "params.datum",
                 'must be "uniform" or a list of [arc, value] pairs')

    def _check_minimize(self, p):
        _require(isinstance(p["n"], int) and p["n"] >= 1, "params.n",
                 "must be a positive integer")
        if p.get("eps") is not None:
            _positive(p["eps"], "params.eps")
        if p.get("starts") is not None:
            _require(isinstance(p["starts"], int) and p["starts"] > 0, "params.starts",
                     "must be a positive integer")
        _positive(p["tol"], "params.tol")
        _require(isinstance(p["max_iter"], int) and p["max_iter"] > 0, "params.max_iter",
                 "must be a positive integer")
        self._check_datum(p)

    def _check_eps_list(self, p):
        eps = p["eps_list"]
        _require(isinstance(eps, list) and len(eps) >= 2, "params.eps_list",
                 "must be a list of at least two radii")
        for i, e in enumerate(eps):
            _positive(e, f"params.eps_list[{i}]")
        _require(all(a > b for a, b in zip(eps, eps[1:])), "params.eps_list",
                 "must be strictly decreasing")

    def _check_converge(self, p):
        _require(p["kind"] in ("core_energy", "datum"), "params.kind",
                 "must be core_energy or datum")
        self._check_eps_list(p)
        if p["kind"] == "core_energy":
            pos = _points(p.get("positions"), "params.positions")
            _moduli(p.get("moduli"), "params.moduli", len(pos))
        else:
            _points(p.get("centers"), "params.centers")
            self._check_datum(p)

    def _check_sweep(self, p):
        self._check_minimize({**p, "eps": None})
        self._check_eps_list(p)
        _positive(p["proxy"], "params.proxy")
