"""
Command-line front end
======================

``fpt <transform|density|validate|simulate> --config run.json [--set key=value ...]
--out table.csv [--format csv|json] [--seed N]``

The run is described by one JSON document (see :data:`CONFIG_SCHEMA`);
``--set`` overrides dotted keys with JSON-parsed values and the dedicated
flags override ``output.path``, ``output.format`` and ``simulation.seed``.

Exit codes: 0 on success, 1 on a configuration or I/O error, 2 when a
validation campaign fails its tolerances.

Tables are written with 12 significant digits.  CSV output gets a
``<out>.meta.json`` sidecar holding the full configuration and seed; JSON
output embeds the same block under ``"metadata"``.  No timings or thread
counts are written, so equal seeds give byte-identical files.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import jsonschema
import numpy as np

from .inversion import InversionParams, transition_density
from .montecarlo import SimConfig, density_histogram, simulate_hitting
from .spectral import DriftSpec
from .transforms import (
    BoundarySpec,
    TransformQuery,
    joint_lt,
    phi_quadruple,
    phi_tilde_quadruple,
    reflected_hit_lt,
    two_sided_exit_lt,
    variant_labels,
)

__all__ = [
    "CONFIG_SCHEMA",
    "TRANSFORM_COLUMNS",
    "DENSITY_COLUMNS",
    "VALIDATION_COLUMNS",
    "SIMULATE_COLUMNS",
    "ConfigError",
    "RunConfig",
    "run",
    "main",
]

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2

TRANSFORM_COLUMNS = ("system", "mu1", "mu2", "c", "b", "lambda", "alpha", "theta", "x",
                     "value", "method", "variant", "quantity")
DENSITY_COLUMNS = ("system", "mu1", "mu2", "c", "x", "t", "y", "density", "method")
VALIDATION_COLUMNS = TRANSFORM_COLUMNS + ("t", "y", "density", "mc_density", "mc_value",
                                          "mc_se", "z", "pass")
SIMULATE_COLUMNS = ("system", "mu1", "mu2", "c", "b", "lambda", "x", "hit_kind", "count",
                    "fraction", "mean_tau", "mean_tau_se", "mean_x_tau")

TRANSFORM_QUANTITIES = ("joint_lt", "phi", "exit")
VALIDATE_QUANTITIES = ("joint_lt", "density")

_NUM = {"type": "number"}
_NUM_LIST = {"type": "array", "items": _NUM}

CONFIG_SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["drift", "boundary"],
    "properties": {
        "systems": {"type": "array", "minItems": 1, "uniqueItems": True,
                    "items": {"enum": ["free", "reflected"]}},
        "drift": {
            "type": "object", "additionalProperties": False,
            "required": ["mu1", "mu2", "c"],
            "properties": {"mu1": _NUM, "mu2": _NUM, "c": _NUM},
        },
        "boundary": {
            "type": "object", "additionalProperties": False,
            "required": ["b", "lambda"],
            "properties": {
                "b": {"type": "number", "exclusiveMinimum": 0},
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "atoms": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "items": _NUM,
                                    "minItems": 2, "maxItems": 2}},
                "uniform": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            },
            "oneOf": [{"required": ["atoms"]}, {"required": ["uniform"]}],
        },
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "alpha": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "theta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "x": _NUM_LIST,
                "t": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "y": _NUM_LIST,
            },
        },
        "quantities": {"type": ["array", "null"], "uniqueItems": True,
                       "items": {"enum": sorted(set(TRANSFORM_QUANTITIES + VALIDATE_QUANTITIES))}},
        "variants": {"type": ["array", "null"], "uniqueItems": True,
                     "items": {"type": "string"}},
        "inversion": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "method": {"enum": ["euler", "gaver-stehfest"]},
                "terms": {"type": "integer", "minimum": 1},
                "target_tol": {"type": "number", "exclusiveMinimum": 0},
                "cross_validate": {"type": "boolean"},
            },
        },
        "simulation": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2},
                "n_paths": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "bridge_correction": {"type": "boolean"},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "reflection": {"enum": ["projection", "skorokhod"]},
                "block_stepping": {"type": "boolean"},
            },
        },
        "validation": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "transform_z": {"type": "number", "exclusiveMinimum": 0},
                "density_z": {"type": "number", "exclusiveMinimum": 0},
                "bins": {"type": "integer", "minimum": 1},
                "max_censored_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
            },
        },
    },
}

_DEFAULTS: dict = {
    "systems": ["free", "reflected"],
    "grid": {"alpha": [0.5], "theta": [0.5], "x": [1.0], "t": [1.0], "y": []},
    "quantities": None,
    "variants": None,
    "inversion": {"method": "euler", "terms": 40, "target_tol": 1e-11, "cross_validate": False},
    "simulation": {k: v for k, v in SimConfig().to_dict().items()},
    "validation": {"transform_z": 3.0, "density_z": 4.0, "bins": 50,
                   "max_censored_fraction": 1e-4},
    "output": {"path": "", "format": "csv"},
}


class ConfigError(ValueError):
    """Invalid configuration, override or output path."""


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    """A validated, defaults-filled run description.

    ``data`` is the canonical JSON-compatible dictionary; :meth:`to_dict`
    returns a copy and ``RunConfig.from_dict(cfg.to_dict()) == cfg``.
    """

    data: dict

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.to_json() == other.to_json()

    def __hash__(self) -> int:
        return hash(self.to_json())

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            where = ".".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigError(f"config error at {where}: {e.message}") from None
        data = _merge(_DEFAULTS, raw)
        data["systems"] = list(data["systems"])
        cfg = cls(data)
        cfg._check_domains()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2)

    def with_overrides(self, pairs: Sequence[str]) -> "RunConfig":
        """Apply ``key.sub=value`` overrides; values are parsed as JSON when possible."""
        data = self.to_dict()
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"--set expects key=value, got {pair!r}")
            key, text = pair.split("=", 1)
            parts = key.strip().split(".")
            if not all(parts):
                raise ConfigError(f"bad --set key {key!r}")
            try:
                value = json.loads(text)
            except json.JSONDecodeError:
                value = text
            node = data
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    node[p] = {}
                node = node[p]
            node[parts[-1]] = value
        return RunConfig.from_dict(data)

    # -- typed views -------------------------------------------------------

    @property
    def systems(self) -> list[str]:
        return list(self.data["systems"])

    @property
    def drift(self) -> DriftSpec:
        d = self.data["drift"]
        return DriftSpec(float(d["mu1"]), float(d["mu2"]), float(d["c"]))

    @property
    def boundary(self) -> BoundarySpec:
        d = self.data["boundary"]
        b, lam = float(d["b"]), float(d["lambda"])
        if "atoms" in d:
            return BoundarySpec(b, lam, atoms=tuple((y, w) for y, w in d["atoms"]))
        lo, hi = map(float, d["uniform"])
        return BoundarySpec(b, lam, density=lambda y: np.full_like(np.asarray(y, float),
                                                                    1.0 / (hi - lo)),
                            support=(lo, hi), label=f"uniform({lo:g}, {hi:g})")

    @property
    def grid(self) -> dict:
        return {k: [float(v) for v in vs] for k, vs in self.data["grid"].items()}

    @property
    def inversion(self) -> InversionParams:
        return InversionParams(**self.data["inversion"])

    @property
    def simulation(self) -> SimConfig:
        return SimConfig(**self.data["simulation"])

    @property
    def validation(self) -> dict:
        return dict(self.data["validation"])

    @property
    def output(self) -> dict:
        return dict(self.data["output"])

    def variants(self, system: str) -> list[str]:
        labels = variant_labels(system)
        chosen = self.data["variants"]
        if chosen is None:
            return labels
        return [v for v in chosen if v in labels]

    def quantities(self, command: str) -> list[str]:
        allowed = TRANSFORM_QUANTITIES if command == "transform" else VALIDATE_QUANTITIES
        chosen = self.data["quantities"]
        if chosen is None:
            return list(allowed) if command != "transform" else ["joint_lt"]
        return [q for q in chosen if q in allowed]

    def _check_domains(self) -> None:
        try:
            self.drift
            self.boundary
            self.inversion
            self.simulation
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config error: {e}") from None
        for v in self.data["grid"]["x"] + self.data["grid"]["y"]:
            if not math.isfinite(v):
                raise ConfigError("grid values must be finite")
        chosen = self.data["variants"]
        if chosen is not None:
            known = set(variant_labels("free")) | set(variant_labels("reflected"))
            bad = [v for v in chosen if v not in known]
            if bad:
                raise ConfigError(f"unknown variants {bad}; known: {sorted(known)}")


# ---------------------------------------------------------------------------
# tables


def _fmt(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.12g}")
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _render(rows: list[dict], columns: Sequence[str], fmt: str, meta: dict) -> tuple[str, str | None]:
    clean = [{c: _fmt(r.get(c, "")) for c in columns} for r in rows]
    if fmt == "json":
        doc = {"metadata": meta, "columns": list(columns), "rows": clean}
        return json.dumps(doc, indent=2) + "\n", None
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\r\n")
    w.writeheader()
    for r in clean:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue(), json.dumps(meta, indent=2, sort_keys=True) + "\n"


def _check_writable(path: str) -> None:
    if not path:
        raise ConfigError("no output path (use --out or output.path)")
    parent = os.path.dirname(os.path.abspath(path)) or "."
    if os.path.isdir(path):
        raise ConfigError(f"output path {path!r} is a directory")
    if not os.path.isdir(parent):
        raise ConfigError(f"output directory {parent!r} does not exist")
    if not os.access(parent, os.W_OK) or (os.path.exists(path) and not os.access(path, os.W_OK)):
        raise ConfigError(f"output path {path!r} is not writable")


def _write(path: str, text: str, sidecar: str | None) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        if sidecar is not None:
            with open(path + ".meta.json", "w", encoding="utf-8") as f:
                f.write(sidecar)
    except OSError as e:
        raise ConfigError(f"cannot write {path!r}: {e}") from None


def _model_cols(system: str, drift: DriftSpec, boundary: BoundarySpec) -> dict:
    return {"system": system, "mu1": drift.mu1, "mu2": drift.mu2, "c": drift.c,
            "b": boundary.b, "lambda": boundary.lam}


# ---------------------------------------------------------------------------
# subcommands


def transform_rows(cfg: RunConfig) -> list[dict]:
    """Analytic transform table over the ``(alpha, theta, x)`` grid."""
    drift, boundary, grid = cfg.drift, cfg.boundary, cfg.grid
    rows = []
    for system in cfg.systems:
        base = _model_cols(system, drift, boundary)
        for q in cfg.quantities("transform"):
            for x in grid["x"]:
                for theta in grid["theta"]:
                    if q == "exit":
                        rows.extend(_exit_rows(base, system, drift, boundary, theta, x))
                        continue
                    for alpha in grid["alpha"]:
                        cell = dict(base, alpha=alpha, theta=theta, x=x)
                        if q == "joint_lt":
                            for v in cfg.variants(system):
                                val = joint_lt(system, drift, boundary,
                                               TransformQuery(alpha, theta, x), variant=v)
                                method = "degenerate" if val.degenerate else "killed-expectation"
                                rows.append(dict(cell, value=float(val), method=method,
                                                 variant=v, quantity="joint_lt"))
                        else:
                            rows.extend(_phi_rows(cell, system, drift, boundary, alpha, theta, x))
    return rows


def _phi_rows(cell, system, drift, boundary, alpha, theta, x) -> list[dict]:
    lo_ok = x > 0.0 if system == "free" else x >= 0.0
    if not (lo_ok and x <= boundary.b):
        return []
    f = phi_quadruple if system == "free" else phi_tilde_quadruple
    vals = f(drift, boundary, alpha, theta, x)
    return [dict(cell, value=v, method="closed-form", variant="", quantity=f"phi{i + 1}")
            for i, v in enumerate(vals)]


def _exit_rows(base, system, drift, boundary, theta, x) -> list[dict]:
    if not 0.0 <= x <= boundary.b:
        return []
    cell = dict(base, alpha="", theta=theta, x=x, method="closed-form", variant="")
    if system == "free":
        w1, w2 = two_sided_exit_lt(drift, theta, boundary.b, x)
        return [dict(cell, value=w1, quantity="exit_lower"),
                dict(cell, value=w2, quantity="exit_upper")]
    return [dict(cell, value=reflected_hit_lt(drift, theta, boundary.b, x), quantity="hit_upper")]


def density_rows(cfg: RunConfig) -> list[dict]:
    """Transition density table over the ``(x, t, y)`` grid."""
    drift, grid, params = cfg.drift, cfg.grid, cfg.inversion
    if not grid["y"]:
        raise ConfigError("density needs a non-empty grid.y")
    rows = []
    for system in cfg.systems:
        for x in grid["x"]:
            for t in grid["t"]:
                ys = [y for y in grid["y"] if system == "free" or y >= 0.0]
                if system == "reflected" and x < 0:
                    continue
                vals = transition_density(system, drift, t, x, np.asarray(ys), params)
                for y, d in zip(ys, np.atleast_1d(vals)):
                    rows.append({"system": system, "mu1": drift.mu1, "mu2": drift.mu2,
                                 "c": drift.c, "x": x, "t": t, "y": y, "density": float(d),
                                 "method": params.method})
    return rows


def simulate_rows(cfg: RunConfig) -> list[dict]:
    """Hit-kind summaries of the raw path samples, one block per ``(system, x)``."""
    drift, boundary, sim = cfg.drift, cfg.boundary, cfg.simulation
    rows = []
    for system in cfg.systems:
        base = _model_cols(system, drift, boundary)
        for x in cfg.grid["x"]:
            h = simulate_hitting(system, drift, boundary, x, sim)
            names = ("lower", "upper", "boundary-jump", "censored")
            for k, name in enumerate(names + ("all",)):
                mask = h.kind == k if name != "all" else np.ones(len(h), dtype=bool)
                m = int(mask.sum())
                tau = h.tau[mask]
                rows.append(dict(base, x=x, hit_kind=name, count=m, fraction=m / len(h),
                                 mean_tau=float(tau.mean()) if m else math.nan,
                                 mean_tau_se=float(tau.std(ddof=1) / math.sqrt(m)) if m > 1 else math.nan,
                                 mean_x_tau=float(h.x_tau[mask].mean()) if m else math.nan))
    return rows


@dataclass
class ValidationReport:
    """Rows plus the per-variant verdicts of a validation campaign."""

    rows: list[dict]
    variant_pass: dict
    density_pass: dict
    censored_ok: bool

    @property
    def passed(self) -> bool:
        transforms_ok = all(any(v.values()) for v in self.variant_pass.values())
        return transforms_ok and all(self.density_pass.values()) and self.censored_ok

    def summary(self) -> dict:
        return {"passed": self.passed, "variants": self.variant_pass,
                "densities": self.density_pass, "censoring_ok": self.censored_ok}


def _bin_average(system, drift, t, x, edges, params, nodes: int = 4) -> np.ndarray:
    """Analytic density averaged over each histogram bin (Gauss-Legendre)."""
    g, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1], edges[1:]
    ys = (0.5 * (hi - lo)[:, None] * g[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
    vals = np.asarray(transition_density(system, drift, t, x, ys, params)).reshape(lo.size, nodes)
    return 0.5 * vals @ w


def validation_report(cfg: RunConfig) -> ValidationReport:
    """Analytic values against Monte Carlo, with z-scores for every variant."""
    drift, boundary, grid, sim = cfg.drift, cfg.boundary, cfg.grid, cfg.simulation
    tol = cfg.validation
    rows: list[dict] = []
    variant_pass: dict = {}
    density_pass: dict = {}
    censored_ok = True
    quantities = cfg.quantities("validate")
    for system in cfg.systems:
        base = _model_cols(system, drift, boundary)
        if "joint_lt" in quantities:
            ok = {v: True for v in cfg.variants(system)}
            for x in grid["x"]:
                h = simulate_hitting(system, drift, boundary, x, sim)
                censored_ok &= h.censored_fraction <= tol["max_censored_fraction"]
                for theta in grid["theta"]:
                    for alpha in grid["alpha"]:
                        est = h.joint_lt(alpha, theta)
                        for v in ok:
                            val = joint_lt(system, drift, boundary,
                                           TransformQuery(alpha, theta, x), variant=v)
                            z = est.z_score(float(val))
                            good = abs(z) <= tol["transform_z"]
                            ok[v] &= good
                            rows.append(dict(base, alpha=alpha, theta=theta, x=x, value=float(val),
                                             method="killed-expectation", variant=v,
                                             quantity="joint_lt", mc_value=est.mean,
                                             mc_se=est.std_err, z=z, **{"pass": good}))
            variant_pass[system] = ok
        if "density" in quantities:
            for x in grid["x"]:
                if system == "reflected" and x < 0:
                    continue
                hists = density_histogram(system, drift, grid["t"], x, sim, bins=tol["bins"])
                for hist in hists:
                    dens = _bin_average(system, drift, hist.t, x, hist.edges, cfg.inversion)
                    z = np.where(hist.std_err > 0, (dens - hist.density) /
                                 np.where(hist.std_err > 0, hist.std_err, 1.0), 0.0)
                    good = np.abs(z) < tol["density_z"]
                    density_pass[f"{system}/x={x:g}/t={hist.t:g}"] = bool(good.all())
                    for y, d, md, se, zz, g in zip(hist.centers, dens, hist.density,
                                                   hist.std_err, z, good):
                        rows.append(dict(base, x=x, t=hist.t, y=y, density=d, mc_density=md,
                                         mc_se=se, z=zz, method="bin-average",
                                         quantity="density", **{"pass": bool(g)}))
    return ValidationReport(rows, variant_pass, density_pass, censored_ok)


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(f"usage error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fpt", description="First-passage transforms for broken-drift diffusions "
                                         "below a jumping boundary.")
    p.add_argument("command", choices=["transform", "density", "validate", "simulate"])
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a dotted config key (value parsed as JSON)")
    p.add_argument("--out", help="output path (overrides output.path)")
    p.add_argument("--format", choices=["csv", "json"], help="output format")
    p.add_argument("--seed", type=int, help="simulation seed (overrides simulation.seed)")
    return p


def _load(args) -> RunConfig:
    try:
        with open(args.config, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {args.config!r}: {e}") from None
    pairs = list(args.set)
    if args.out is not None:
        pairs.append(f"output.path={json.dumps(args.out)}")
    if args.format is not None:
        pairs.append(f"output.format={json.dumps(args.format)}")
    if args.seed is not None:
        pairs.append(f"simulation.seed={args.seed}")
    return RunConfig.from_json(text).with_overrides(pairs)


def run(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        cfg = _load(args)
        out = cfg.output
        _check_writable(out["path"])
        meta = {"command": args.command, "seed": cfg.simulation.seed, "config": cfg.to_dict()}
        code = EXIT_OK
        if args.command == "transform":
            rows, cols = transform_rows(cfg), TRANSFORM_COLUMNS
        elif args.command == "density":
            rows, cols = density_rows(cfg), DENSITY_COLUMNS
        elif args.command == "simulate":
            rows, cols = simulate_rows(cfg), SIMULATE_COLUMNS
        else:
            report = validation_report(cfg)
            rows, cols = report.rows, VALIDATION_COLUMNS
            meta["report"] = report.summary()
            print(json.dumps(report.summary(), indent=2), file=sys.stderr)
            if not report.passed:
                code = EXIT_VALIDATION
        text, sidecar = _render(rows, cols, out["format"], meta)
        _write(out["path"], text, sidecar)
        return code
    except ConfigError as e:
        print(f"fpt: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"fpt: invalid parameters: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
