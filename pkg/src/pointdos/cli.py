"""Command line entry point: ``pointdos <subcommand> --config run.json``.

Every subcommand reads a JSON run configuration, writes CSV/JSON artifacts
into the output directory and embeds the configuration, the tool version and
the certificates it relied on.  Results are cached by content hash under
``<out>/.cache``; a cache hit rewrites byte-identical files.

Exit codes: 0 success, 2 regime/gap violation, 3 numerical failure,
4 configuration error.
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .dos import Truncation, conductivity_probe, dos_density
from .errors import (ConfigError, DomainError, NumericalError, PointDosError,
                     RegimeError)
from .expansion import averaged_kernel_table, mc_average
from .io import ResultCache, dumps, format_csv, tool_version
from .kernels import SpectralPoint, dz_free_kernel, free_kernel, renorm_diag
from .lattice import band_window, lattice_sum_S
from .sites import SingleSiteLaw, gap_at, pole_gap, regime_map

SUBCOMMANDS = ("kernels", "gap-check", "sweep", "band", "expand", "dos",
               "mc-validate", "conductivity")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["dimension", "law", "energy"],
    "additionalProperties": False,
    "properties": {
        "dimension": {"type": "integer", "enum": [1, 2, 3]},
        "kappa0": _pos,
        "law": {
            "type": "object",
            "required": ["kind", "alpha", "beta"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["uniform", "point_mass"]},
                "alpha": _num, "beta": {"type": "number", "exclusiveMaximum": 0},
                "delta": _nonneg, "delta_prime": _nonneg,
            },
        },
        "energy": {
            "type": "object",
            "required": ["I_min", "I_max"],
            "additionalProperties": False,
            "properties": {
                "I_min": {"type": "number", "exclusiveMaximum": 0},
                "I_max": {"type": "number", "exclusiveMaximum": 0},
                "grid_points": {"type": "integer", "minimum": 1},
                "eps_schedule": {"type": "array", "items": _pos, "minItems": 3},
            },
        },
        "truncation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 0, "maximum": 24},
                "r_hop": {"type": "number", "minimum": 1},
                "sum_tol": _pos,
                "budget": _pos,
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": {"type": "integer", "minimum": 0},
                "samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "band": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"q0": _num, "theta_samples": {"type": "integer", "minimum": 1},
                           "E_min": {"type": "number", "exclusiveMaximum": 0},
                           "E_max": {"type": "number", "exclusiveMaximum": 0},
                           "grid_points": {"type": "integer", "minimum": 2}},
        },
        "conductivity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"eps": _pos, "nu_max": _pos,
                           "nu_points": {"type": "integer", "minimum": 6},
                           "n_max": {"type": "integer", "minimum": 0, "maximum": 6},
                           "r_hop": {"type": "number", "minimum": 1}},
        },
        "flags": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"d1_sign_flip": {"type": "boolean"}},
        },
        "gap": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"grid": {"type": "integer", "minimum": 2}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"directory": {"type": "string"},
                           "formats": {"type": "array",
                                       "items": {"enum": ["csv", "json"]}}},
        },
    },
}

DEFAULTS = {
    "kappa0": 1.0,
    "energy": {"grid_points": 5, "eps_schedule": [0.1 * 2.0 ** -k for k in range(9)]},
    "truncation": {"n_max": 8, "r_hop": 2, "sum_tol": 1e-12, "budget": 1e8},
    "mc": {"L": 8, "samples": 1000, "seed": 0},
    "band": {"theta_samples": 9, "grid_points": 41},
    "conductivity": {"eps": 0.05, "nu_max": 0.02, "nu_points": 9, "n_max": 3, "r_hop": 1},
    "flags": {"d1_sign_flip": False},
    "gap": {"grid": 201},
    "output": {"directory": "out", "formats": ["csv", "json"]},
}


class RunConfig:
    """Validated run configuration with defaults filled in."""

    def __init__(self, data: dict):
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config: {exc.message}") from None
        merged = copy.deepcopy(DEFAULTS)
        for key, value in data.items():
            if isinstance(value, dict):
                merged.setdefault(key, {}).update(value)
            else:
                merged[key] = value
        self.data = merged
        e = merged["energy"]
        if e["I_min"] > e["I_max"]:
            raise ConfigError("energy.I_min must not exceed energy.I_max")
        try:
            self.law = SingleSiteLaw(**merged["law"])
        except ConfigError:
            raise
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls(data)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def d(self) -> int:
        return self.data["dimension"]

    @property
    def flip(self) -> bool:
        return self.data["flags"]["d1_sign_flip"]

    @property
    def I(self):
        return (self.data["energy"]["I_min"], self.data["energy"]["I_max"])

    def energy_grid(self):
        lo, hi = self.I
        n = self.data["energy"]["grid_points"]
        return np.linspace(lo, hi, n) if n > 1 else np.array([lo])

    def point(self, z) -> SpectralPoint:
        return SpectralPoint(z, self.d, self.data["kappa0"], self.flip)

    def truncation(self) -> Truncation:
        t = self.data["truncation"]
        return Truncation(t["n_max"], t["r_hop"], t["budget"])


# --------------------------------------------------------------------------
# Subcommands.  Each returns {filename: text}.
# --------------------------------------------------------------------------

def _meta(cfg, certificates=None):
    return {"config": cfg.data, "tool_version": tool_version(),
            "certificates": certificates or {},
            "note": "Delta G is the averaged Green function minus the free part"}


def _certificate(cfg):
    return pole_gap(cfg.law, cfg.d, cfg["kappa0"], cfg.I, cfg["gap"]["grid"], cfg.flip)


def _emit(cfg, stem, rows, columns, payload, certificates=None):
    out = {}
    formats = cfg["output"]["formats"]
    meta = _meta(cfg, certificates)
    if "csv" in formats and rows is not None:
        out[f"{stem}.csv"] = format_csv(rows, columns, meta)
    if "json" in formats:
        out[f"{stem}.json"] = dumps({**meta, "result": payload}) + "\n"
    return out


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_kernels(cfg, threads):
    rows = []
    for E in cfg.energy_grid():
        p = cfg.point(E)
        for r in (0.0, 1.0, 2.0, 3.0):
            g = renorm_diag(p) if r == 0 else free_kernel(p, r)
            dz = dz_free_kernel(p, r)
            rows.append({"E": float(E), "r": r, "G_re": g.real, "G_im": g.imag,
                         "dz_re": dz.real, "dz_im": dz.imag})
    cols = ("E", "r", "G_re", "G_im", "dz_re", "dz_im")
    return _emit(cfg, "kernels", rows, cols, rows)


def cmd_gap_check(cfg, threads):
    cert = _certificate(cfg)
    return _emit(cfg, "gap_certificate", None, (), cert.to_dict(), {"gap": cert.to_dict()})


def cmd_sweep(cfg, threads):
    tol = cfg["truncation"]["sum_tol"]

    def row(E):
        p = cfg.point(E)
        S = lattice_sum_S(p, tol=tol)
        gap = gap_at(cfg.law, p)
        ratio = S.upper / gap if gap > 0 else float("inf")
        return {"E": float(E), "S": S.value, "tail_bound": S.tail_bound,
                "radius": S.truncation_radius, "gap": gap, "ratio": ratio,
                "small_hopping": bool(ratio < 1.0)}

    rows = _map(row, cfg.energy_grid(), threads)
    cols = ("E", "S", "tail_bound", "radius", "gap", "ratio", "small_hopping")
    return _emit(cfg, "sweep", rows, cols, rows)


def cmd_band(cfg, threads):
    b = cfg["band"]
    law = cfg.law
    q0 = b.get("q0", 0.5 * (law.alpha + law.beta))
    bw = band_window(cfg.d, q0, cfg["kappa0"], b["theta_samples"], cfg.flip)
    lo = b.get("E_min", min(cfg.I[0], bw.E_minus))
    hi = b.get("E_max", max(cfg.I[1], bw.E_plus))
    grid = np.linspace(lo, hi, b["grid_points"])
    rows = regime_map(law, cfg.d, grid, q0, cfg["kappa0"], cfg.flip, b["theta_samples"])
    overlap = [r for r in rows if r["certified"] and r["in_band"]]
    payload = {"band_window": bw.to_dict(), "overlap_points": len(overlap),
               "overlap": overlap}
    cols = ("E", "S_upper", "gap", "ratio", "certified", "band_q0", "in_band")
    out = _emit(cfg, "regime_map", rows, cols, payload)
    return out


def cmd_expand(cfg, threads):
    trunc = cfg.truncation()

    def rows_at(E):
        p = cfg.point(E)
        table, res = averaged_kernel_table(cfg.law, p, trunc.n_max, trunc.r_hop,
                                           None, trunc.budget)
        out = []
        for n in sorted(table, key=lambda v: (sum(x * x for x in v), v)):
            if sum(x * x for x in n) <= 4:
                v = table[n]
                out.append({"E": float(E), "n": " ".join(map(str, n)), "re": v.real,
                            "im": v.imag, "tail_bound": res.tail_bound,
                            "hop_tail": res.hop_tail})
        return out

    rows = [r for block in _map(rows_at, cfg.energy_grid(), threads) for r in block]
    cols = ("E", "n", "re", "im", "tail_bound", "hop_tail")
    return _emit(cfg, "expansion", rows, cols, {"rows": len(rows), **trunc.to_dict()})


def cmd_dos(cfg, threads):
    trunc = cfg.truncation()
    eps = tuple(cfg["energy"]["eps_schedule"])
    cert = _certificate(cfg)
    delta = None if cert.method == "exact" else cert.delta_star

    def row(E):
        pt = dos_density(float(E), cfg.law, cfg.d, eps, trunc, cfg["kappa0"], cfg.flip, delta)
        return {"E": pt.E, "Re": pt.re, "Im": pt.im, "n": pt.n,
                "tail_bound": pt.tail_bound, "extrap_err": pt.extrapolation_error}

    rows = _map(row, cfg.energy_grid(), threads)
    cols = ("E", "Re", "Im", "n", "tail_bound", "extrap_err")
    return _emit(cfg, "dos", rows, cols, {"eps_schedule": list(eps), **trunc.to_dict()},
                 {"gap": cert.to_dict()})


def cmd_mc_validate(cfg, threads):
    trunc = cfg.truncation()
    mc = cfg["mc"]
    rows = []
    for E in cfg.energy_grid():
        p = cfg.point(E)
        table, res = averaged_kernel_table(cfg.law, p, trunc.n_max, trunc.r_hop, None,
                                           trunc.budget)
        F0 = table[(0,) * cfg.d]
        m = mc_average(cfg.law, p, mc["L"], mc["samples"], mc["seed"])
        budget = 3.0 * m.stderr[0] + res.tail_bound + m.edge_bound[0]
        diff = abs(m.mean[0] - F0)
        rows.append({"E": float(E), "F_re": F0.real, "F_im": F0.imag,
                     "mc_re": m.mean[0].real, "mc_im": m.mean[0].imag,
                     "stderr": float(m.stderr[0]), "tail_bound": res.tail_bound,
                     "edge_bound": float(m.edge_bound[0]), "deviation": float(diff),
                     "pass": bool(diff <= budget)})
    cols = ("E", "F_re", "F_im", "mc_re", "mc_im", "stderr", "tail_bound", "edge_bound",
            "deviation", "pass")
    out = _emit(cfg, "mc_validate", rows, cols, rows)
    if not all(r["pass"] for r in rows):
        raise _ValidationFailed(out)
    return out


def cmd_conductivity(cfg, threads):
    c = cfg["conductivity"]
    E = 0.5 * (cfg.I[0] + cfg.I[1])
    nu = np.linspace(-c["nu_max"], c["nu_max"], c["nu_points"])
    probe = conductivity_probe(E, nu, c["eps"], cfg.law, cfg.d, c["n_max"], c["r_hop"],
                               cfg["kappa0"], cfg.flip)
    rows = [{"nu": float(v), "re": f.real, "im": f.imag, "tail_bound": float(t)}
            for v, f, t in zip(probe.nu, probe.F2, probe.tail_bound)]
    return _emit(cfg, "conductivity", rows, ("nu", "re", "im", "tail_bound"), probe.to_dict())


COMMANDS = {"kernels": cmd_kernels, "gap-check": cmd_gap_check, "sweep": cmd_sweep,
            "band": cmd_band, "expand": cmd_expand, "dos": cmd_dos,
            "mc-validate": cmd_mc_validate, "conductivity": cmd_conductivity}


class _ValidationFailed(NumericalError):
    def __init__(self, artifacts):
        super().__init__("Monte Carlo comparison outside the error budget")
        self.artifacts = artifacts


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, RegimeError):
        return 2
    if isinstance(exc, NumericalError):
        return 3
    if isinstance(exc, (ConfigError, DomainError)):
        return 4
    return 3


def _write(out_dir: Path, artifacts: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in artifacts.items():
        (out_dir / name).write_text(text)


def run(subcommand: str, config_path, out=None, threads: int = 1, seed=None,
        use_cache: bool = True) -> int:
    """Run one subcommand; returns the process exit code."""
    try:
        if subcommand not in COMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        cfg = RunConfig.from_file(config_path)
        if seed is not None:
            cfg.data["mc"]["seed"] = int(seed)
        out_dir = Path(out if out is not None else cfg["output"]["directory"])
        cache = ResultCache(out_dir / ".cache")
        key = ResultCache.key({"config": cfg.data, "version": tool_version()}, subcommand)
        artifacts = cache.get(key) if use_cache else None
        if artifacts is None:
            try:
                artifacts = COMMANDS[subcommand](cfg, max(1, int(threads)))
            except _ValidationFailed as exc:
                _write(out_dir, exc.artifacts)
                raise
            cache.put(key, artifacts)
        _write(out_dir, artifacts)
        return 0
    except PointDosError as exc:
        code = exit_code_for(exc)
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(err), file=sys.stderr)
        return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointdos",
        description="Averaged Green function and density of states of random "
                    "lattice point interactions.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for grids")
    parser.add_argument("--seed", type=int, default=None, help="override mc.seed")
    parser.add_argument("--no-cache", action="store_true", help="ignore the result cache")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.threads, args.seed,
               not args.no_cache)


if __name__ == "__main__":
    sys.exit(main())
