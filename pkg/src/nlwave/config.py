"""TOML scenario files: defaults, validation and construction of solver objects.

A scenario has the tables ``grid``, ``kernel``, ``multipoint``,
``nonlinearity``, ``data`` (with sub-tables ``phi`` and ``psi``), ``run``
and ``output``.  Missing keys take the defaults below; unknown keys are
rejected with the nearest known key as a hint, and every problem in the
file is reported together.
"""
from __future__ import annotations

import copy
import difflib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli

from .errors import ParseError, ValidationError
from .kernels import KernelSpec, builtin_kernel
from .linear import MultipointSpec
from .nonlinear import FixedPointConfig, NonlinearitySpec, builtin_nonlinearity
from .spectral import Field, Grid

KERNELS = ("bessel", "gaussian", "constant", "zero")
NONLINEARITIES = ("zero", "quadratic", "cubic", "focusing-cubic", "sine")
SHAPES = ("zero", "gaussian", "gaussian-dx", "sech2", "harmonic", "random-smooth")

_FIELD_DEFAULTS = {"shape": "zero", "amplitude": 1.0, "width": 1.0, "center": 0.0, "k": 1, "bumps": 4}

DEFAULTS = {
    "grid": {"n": 1, "N": 256, "L": 40.0},
    "kernel": {
        "a": 0.0,
        "b": "gaussian", "b_r": 2.0, "b_sigma": 1.0, "b_c": 1.0,
        "g": "bessel", "g_r": 2.0, "g_sigma": 1.0, "g_c": 1.0,
    },
    "multipoint": {"m": 0, "alpha": [], "beta": [], "lambda": []},
    "nonlinearity": {"name": "zero", "scale": 1.0, "alpha_order": None},
    "data": {"phi": dict(_FIELD_DEFAULTS), "psi": dict(_FIELD_DEFAULTS)},
    "run": {
        "T_total": 1.0, "dt": 1e-3, "tol_fp": 1e-9, "max_iter": 30, "tol_mp": 1e-7, "tol_E": 1e-5,
        "tol_d0": 1e-8, "blowup_threshold": 1e6, "overflow": 1e8, "seed": 0, "C0": 1.0, "C1": 1.0,
        "auto_calibrate": True, "T_cap": None, "restart": "cauchy", "p": 2.0, "min_steps": 2,
        "localize": "warn", "energy_policy": "strict", "s": 2.0,
        "dt_ladder": [4e-3, 2e-3, 1e-3, 5e-4], "N_ladder": [64, 128, 256],
    },
    "output": {"dir": "out", "formats": ["csv"], "every": 0},
}


def _suggest(key, known):
    near = difflib.get_close_matches(key, list(known), n=1, cutoff=0.5)
    return f" (did you mean {near[0]!r}?)" if near else ""


def _merge(defaults, given, path, problems):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            problems.append(f"unknown key {where!r}{_suggest(key, defaults)}")
            continue
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                problems.append(f"{where} must be a table")
                continue
            out[key] = _merge(defaults[key], val, where, problems)
        else:
            out[key] = val
    return out


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _validate(c, problems):
    def need(cond, msg):
        if not cond:
            problems.append(msg)
        return cond

    # type pass: every scalar must match the type of its default
    def types(defaults, values, path):
        for key, d in defaults.items():
            v = values[key]
            where = f"{path}.{key}" if path else key
            if isinstance(d, dict):
                types(d, v, where)
            elif d is None:
                need(v is None or _is_num(v), f"{where} must be a number")
            elif isinstance(d, bool):
                need(isinstance(v, bool), f"{where} must be true or false")
            elif isinstance(d, int):
                need(_is_int(v), f"{where} must be an integer")
            elif isinstance(d, float):
                need(_is_num(v), f"{where} must be a number")
            elif isinstance(d, str):
                need(isinstance(v, str), f"{where} must be a string")
            elif isinstance(d, list):
                need(isinstance(v, list), f"{where} must be an array")
    before = len(problems)
    types(DEFAULTS, c, "")
    if len(problems) > before:
        return

    g = c["grid"]
    need(g["n"] in (1, 2, 3), f"grid.n must be 1, 2 or 3, got {g['n']}")
    need(g["N"] >= 4 and g["N"] & (g["N"] - 1) == 0, f"grid.N must be a power of two >= 4, got {g['N']}")
    need(g["L"] > 0, f"grid.L must be positive, got {g['L']}")

    k = c["kernel"]
    need(k["a"] >= 0, f"kernel.a must be >= 0, got {k['a']}")
    for side in ("b", "g"):
        need(k[side] in KERNELS, f"kernel.{side} must be one of {KERNELS}, got {k[side]!r}"
             f"{_suggest(k[side], KERNELS)}")
        for par in ("r", "sigma", "c"):
            need(k[f"{side}_{par}"] > 0, f"kernel.{side}_{par} must be positive")
    if k["b"] == "zero":
        need(k["a"] > 0, "kernel.a must be positive when kernel.b is 'zero'")

    mp = c["multipoint"]
    m = mp["m"]
    need(m >= 0, f"multipoint.m must be >= 0, got {m}")
    for key in ("alpha", "beta", "lambda"):
        arr = mp[key]
        need(len(arr) == m, f"multipoint.{key} has {len(arr)} entries but m = {m}")
        need(all(_is_num(v) for v in arr), f"multipoint.{key} entries must be real numbers")
    if all(_is_num(v) for v in mp["lambda"]):
        need(all(v > 0 for v in mp["lambda"]), "multipoint.lambda entries must be positive")

    nl = c["nonlinearity"]
    need(nl["name"] in NONLINEARITIES, f"nonlinearity.name must be one of {NONLINEARITIES}, "
                                       f"got {nl['name']!r}{_suggest(nl['name'], NONLINEARITIES)}")
    if nl["alpha_order"] is not None:
        need(nl["alpha_order"] >= 1, "nonlinearity.alpha_order must be >= 1")

    for which in ("phi", "psi"):
        d = c["data"][which]
        need(d["shape"] in SHAPES, f"data.{which}.shape must be one of {SHAPES}, got {d['shape']!r}"
                                   f"{_suggest(d['shape'], SHAPES)}")
        need(d["width"] > 0, f"data.{which}.width must be positive")
        need(d["bumps"] >= 1, f"data.{which}.bumps must be >= 1")

    r = c["run"]
    for key in ("T_total", "dt", "tol_fp", "tol_mp", "tol_E", "tol_d0", "blowup_threshold", "overflow",
                "C0", "C1"):
        need(r[key] > 0, f"run.{key} must be positive, got {r[key]}")
    need(r["max_iter"] >= 1, "run.max_iter must be >= 1")
    need(r["min_steps"] >= 1, "run.min_steps must be >= 1")
    need(r["seed"] >= 0, "run.seed must be nonnegative")
    need(r["p"] >= 1, "run.p must be >= 1")
    need(r["T_cap"] is None or r["T_cap"] > 0, "run.T_cap must be positive")
    need(r["restart"] in ("cauchy", "multipoint"), f"run.restart must be 'cauchy' or 'multipoint', "
                                                   f"got {r['restart']!r}")
    need(r["localize"] in ("warn", "raise", "off"), "run.localize must be 'warn', 'raise' or 'off'")
    need(r["energy_policy"] in ("strict", "projected"), "run.energy_policy must be 'strict' or 'projected'")
    need(len(r["dt_ladder"]) >= 2 and all(_is_num(v) and v > 0 for v in r["dt_ladder"]),
         "run.dt_ladder needs at least two positive steps")
    need(len(r["N_ladder"]) >= 2 and all(_is_int(v) and v >= 4 and v & (v - 1) == 0 for v in r["N_ladder"]),
         "run.N_ladder needs at least two powers of two")

    o = c["output"]
    need(o["every"] >= 0, "output.every must be >= 0")
    need(all(f in ("csv", "bin") for f in o["formats"]), "output.formats entries must be 'csv' or 'bin'")


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario; ``resolved`` is the full table with defaults filled."""

    resolved: dict

    def __getitem__(self, block):
        return self.resolved[block]

    def with_seed(self, seed: int) -> "ScenarioConfig":
        c = copy.deepcopy(self.resolved)
        c["run"]["seed"] = int(seed)
        return ScenarioConfig(c)

    def with_values(self, block: str, **values) -> "ScenarioConfig":
        c = copy.deepcopy(self.resolved)
        c[block].update(values)
        return from_dict(c)

    def grid(self, N: int | None = None) -> Grid:
        g = self["grid"]
        return Grid(g["n"], g["N"] if N is None else N, float(g["L"]))

    def kernel(self) -> KernelSpec:
        k = self["kernel"]
        param = {"bessel": "r", "gaussian": "sigma", "constant": "c", "zero": None}

        def sym(side):
            name = k[side]
            p = param[name]
            return builtin_kernel(name, None if p is None else k[f"{side}_{p}"])
        r = k["g_r"] if k["g"] == "bessel" else 0.0
        return KernelSpec(float(k["a"]), sym("b"), sym("g"), r, label=f"b={k['b']},g={k['g']}")

    def multipoint(self) -> MultipointSpec:
        mp = self["multipoint"]
        return MultipointSpec(tuple(mp["alpha"]), tuple(mp["beta"]), tuple(float(v) for v in mp["lambda"]))

    def nonlinearity(self) -> NonlinearitySpec:
        nl = self["nonlinearity"]
        return builtin_nonlinearity(nl["name"], float(nl["scale"]))

    def data(self, grid: Grid | None = None):
        grid = self.grid() if grid is None else grid
        seed = self["run"]["seed"]
        return (make_field(grid, self["data"]["phi"], seed),
                make_field(grid, self["data"]["psi"], seed + 1))

    def fixed_point(self, dt: float | None = None) -> FixedPointConfig:
        r = self["run"]
        return FixedPointConfig(
            dt=float(r["dt"] if dt is None else dt), C0=float(r["C0"]), C1=float(r["C1"]),
            tol_fp=float(r["tol_fp"]), max_iter=r["max_iter"], p=float(r["p"]),
            auto_calibrate=r["auto_calibrate"], seed=r["seed"], overflow=float(r["overflow"]),
            blowup_threshold=float(r["blowup_threshold"]), min_steps=r["min_steps"],
            restart=r["restart"], tol_d0=float(r["tol_d0"]),
            T_cap=None if r["T_cap"] is None else float(r["T_cap"]),
        )


def make_field(grid: Grid, spec: dict, seed: int = 0) -> Field:
    """Initial datum from a data sub-table (all shapes are real)."""
    shape = spec["shape"]
    amp, w, c = float(spec["amplitude"]), float(spec["width"]), float(spec["center"])
    x = grid.x
    r2 = np.sum((x - c) ** 2, axis=0)
    if shape == "zero":
        vals = np.zeros(grid.shape)
    elif shape == "gaussian":
        vals = amp * np.exp(-r2 / w ** 2)
    elif shape == "gaussian-dx":
        # odd in the first coordinate, hence mean zero
        vals = amp * (x[0] - c) / w * np.exp(-r2 / w ** 2)
    elif shape == "sech2":
        vals = amp / np.cosh(np.sqrt(r2) / w) ** 2
    elif shape == "harmonic":
        # a lattice mode: cos(2 pi k x_1 / L)
        vals = amp * np.cos(2 * np.pi * spec["k"] * x[0] / grid.L)
    elif shape == "random-smooth":
        # normalised by the sum of |weights| so the datum does not depend on N
        rng = np.random.default_rng(seed)
        vals = np.zeros(grid.shape)
        total = 0.0
        for _ in range(spec["bumps"]):
            centre = rng.uniform(-grid.L / 8, grid.L / 8, size=(grid.n,) + (1,) * grid.n)
            weight = rng.standard_normal()
            total += abs(weight)
            vals += weight * np.exp(-np.sum((x - centre) ** 2, axis=0) / w ** 2)
        vals = amp * vals / total
    else:
        raise ValidationError([f"unknown data shape {shape!r}"])
    return Field(grid, values=vals)


def from_dict(raw: dict) -> ScenarioConfig:
    problems = []
    resolved = _merge(DEFAULTS, raw, "", problems)
    _validate(resolved, problems)
    if problems:
        raise ValidationError(problems)
    return ScenarioConfig(resolved)


def parse_config(path) -> ScenarioConfig:
    """Read and validate a TOML scenario file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return from_dict(raw)
