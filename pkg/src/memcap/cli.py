"""Command-line front end: config files, result records, disk cache.

Subcommands: spectrum, sweep-fresnel, sweep-depth, oracle, dump-defaults.
All knobs live in a key-value config file (see dump-defaults); a handful of
common ones can be overridden with flags.  Results are written as a JSON
record (full input echo + outputs + provenance) and a CSV table for
plotting.  Exit codes: 1 bad configuration, 2 convergence/stability
failure, 3 numerical invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import __version__
from ._accel import backend_name
from .basis import build_basis, coupling_block
from .errors import ConvergenceError, NumericalError, StabilityError
from .memory_map import end_to_end_map, make_grid
from .oracle import (TimeDomainRun, default_time_step, eigenmode_pulse,
                     integrate_retrieval, integrate_storage)
from .params import ModelParams, ParameterError, Resolution, coefficients
from .spectrum import BlockSpectrum, capacity_report
from .sweep import auto_resolution, collect_blocks, sweep_depth, sweep_fresnel

SCHEMA_VERSION = 1

_CACHE_ENV = "MEMCAP_CACHE_DIR"


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Everything a run needs, loadable from a key-value file."""

    depth: float = 40.0
    fresnel: float = 1.0
    detuning: float = 0.0
    drive: float = 1.0
    auto_resolution: bool = True
    n_radial_max: int = 24
    m_max: int = 80
    n_freq: int = 160
    n_axial: int = 24
    disc_radius: float = 6.0
    freq_halfwidth: float | None = None
    direction: str = "both"
    eta_min: float = 0.5
    sweep_values: tuple = ()
    converge_tol: float | None = None
    oracle_set: str = "quick"
    oracle_axial: int = 200
    oracle_dt_scale: float = 1.0
    out_dir: str = "."
    cache_dir: str | None = None
    jobs: int = 1


_HELP = {
    "depth": "resonant optical depth d0",
    "fresnel": "Fresnel number of the ensemble",
    "detuning": "two-photon detuning (units of gamma)",
    "drive": "classical drive amplitude (real; phase is a gauge)",
    "auto_resolution": "derive grids from (depth, fresnel); overrides the grid keys below",
    "n_radial_max": "radial modes per azimuthal block",
    "m_max": "largest azimuthal index scanned",
    "n_freq": "frequency quadrature nodes",
    "n_axial": "axial quadrature nodes",
    "disc_radius": "transverse box radius in beam waists",
    "freq_halfwidth": "frequency window half-width ('auto' = formula default)",
    "direction": "forward | backward | both",
    "eta_min": "efficiency threshold for mode counting",
    "sweep_values": "comma-separated sweep values (sweep-* commands)",
    "converge_tol": "per-point self-refinement tolerance ('none' disables)",
    "oracle_set": "oracle suite selection: quick | full",
    "oracle_axial": "axial steps for the time-domain oracle",
    "oracle_dt_scale": "multiplier on the oracle's default time step",
    "out_dir": "directory for JSON/CSV outputs",
    "cache_dir": "disk cache directory ('none' disables)",
    "jobs": "worker processes for block computations",
}

_OPTIONAL_FLOAT = ("freq_halfwidth", "converge_tol")
_OPTIONAL_STR = ("cache_dir",)


def _parse_value(name: str, text: str):
    text = text.strip()
    if name in _OPTIONAL_FLOAT:
        return None if text.lower() in ("auto", "none", "") else float(text)
    if name in _OPTIONAL_STR:
        return None if text.lower() in ("none", "") else text
    kind = RunConfig.__dataclass_fields__[name].type
    if name == "sweep_values":
        if not text:
            return ()
        return tuple(float(tok) for tok in text.replace(",", " ").split())
    if kind == "bool":
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ParameterError(f"configuration key {name!r}: expected a boolean, got {text!r}")
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def load_config(path: str) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ParameterError(f"{path}:{lineno}: unknown configuration key {key!r}")
            try:
                values[key] = _parse_value(key, val)
            except ValueError as exc:
                raise ParameterError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return RunConfig(**values)


def _format_value(name: str, value) -> str:
    if value is None:
        return "auto" if name == "freq_halfwidth" else "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(f"{v:g}" for v in value)
    return str(value)


def dump_defaults() -> str:
    cfg = RunConfig()
    lines = ["# memcap run configuration (defaults)"]
    for f in fields(RunConfig):
        shown = _format_value(f.name, getattr(cfg, f.name))
        lines.append(f"{f.name} = {shown}  # {_HELP[f.name]}")
    return "\n".join(lines) + "\n"


def _model_params(cfg: RunConfig) -> ModelParams:
    return ModelParams(depth=cfg.depth, fresnel=cfg.fresnel,
                       detuning=cfg.detuning, drive=complex(cfg.drive))


def _resolution(cfg: RunConfig, params: ModelParams) -> Resolution:
    if cfg.auto_resolution:
        return auto_resolution(params)
    return Resolution(
        n_radial_max=cfg.n_radial_max,
        m_max=cfg.m_max,
        n_freq=cfg.n_freq,
        n_axial=cfg.n_axial,
        disc_radius=cfg.disc_radius,
        freq_halfwidth=cfg.freq_halfwidth,
    )


# --------------------------------------------------------------------------
# result records


@dataclass
class ResultRecord:
    schema_version: int
    command: str
    inputs: dict
    outputs: dict
    provenance: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ResultRecord":
        return ResultRecord(**json.loads(text))


def _echo_inputs(cfg: RunConfig, params: ModelParams, res: Resolution | None) -> dict:
    echo = {"config": {f.name: getattr(cfg, f.name) if not isinstance(getattr(cfg, f.name), tuple)
                       else list(getattr(cfg, f.name)) for f in fields(RunConfig)},
            "params": {"depth": params.depth, "fresnel": params.fresnel,
                       "detuning": params.detuning,
                       "drive": [params.drive.real, params.drive.imag]}}
    if res is not None:
        echo["resolution"] = {
            "n_radial_max": res.n_radial_max, "m_max": res.m_max,
            "n_freq": res.n_freq, "n_axial": res.n_axial,
            "disc_radius": res.disc_radius,
            "freq_halfwidth": res.resolved_halfwidth(params),
        }
    return echo


def _provenance(t0: float) -> dict:
    return {"code_version": __version__, "backend": backend_name(),
            "wall_time": time.perf_counter() - t0}


def _write_outputs(cfg: RunConfig, record: ResultRecord, csv_text: str | None):
    os.makedirs(cfg.out_dir, exist_ok=True)
    base = os.path.join(cfg.out_dir, record.command)
    with open(base + ".json", "w", encoding="utf-8") as fh:
        fh.write(record.to_json() + "\n")
    if csv_text is not None:
        with open(base + ".csv", "w", encoding="utf-8") as fh:
            fh.write(csv_text)


# --------------------------------------------------------------------------
# disk cache


class DiskCache:
    """Content-addressed store of per-(params, resolution, m) block spectra.

    Keys hash a canonical serialization (floats in hex, schema version
    included) so any parameter change, however small, misses.  Entries are
    .npz files with a sha256 sidecar; corrupt entries are recomputed and
    overwritten with one log line per process.  An unwritable directory
    degrades to an in-memory cache with a warning.
    """

    def __init__(self, root: str | None):
        self.memory: dict = {}
        self.root = None
        self._complained = False
        if root is None:
            return
        try:
            os.makedirs(root, exist_ok=True)
            probe = os.path.join(root, ".write-probe")
            with open(probe, "w") as fh:
                fh.write("ok")
            os.remove(probe)
            self.root = root
        except OSError as exc:
            warnings.warn(f"cache directory {root!r} is not writable ({exc}); "
                          "falling back to in-memory cache")

    @staticmethod
    def _key(params: ModelParams, res: Resolution, m: int) -> str:
        canon = {
            "schema": SCHEMA_VERSION,
            "depth": params.depth.hex(),
            "fresnel": params.fresnel.hex(),
            "detuning": params.detuning.hex(),
            "drive": [params.drive.real.hex(), params.drive.imag.hex()],
            "n_radial_max": res.n_radial_max,
            "n_freq": res.n_freq,
            "n_axial": res.n_axial,
            "disc_radius": res.disc_radius.hex(),
            "freq_halfwidth": (res.resolved_halfwidth(params)).hex(),
            "m": int(m),
        }
        blob = json.dumps(canon, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def _paths(self, key: str):
        return (os.path.join(self.root, key + ".npz"),
                os.path.join(self.root, key + ".sha256"))

    def get_pair(self, params, res, m):
        key = self._key(params, res, m)
        if self.root is None:
            return self.memory.get(key)
        path, sidecar = self._paths(key)
        if not (os.path.exists(path) and os.path.exists(sidecar)):
            return None
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
            with open(sidecar, encoding="utf-8") as fh:
                expected = fh.read().strip()
            if hashlib.sha256(blob).hexdigest() != expected:
                raise ValueError("checksum mismatch")
            with np.load(path) as data:
                fwd = data["forward"]
                bwd = data["backward"]
        except (OSError, ValueError, KeyError) as exc:
            if not self._complained:
                print(f"memcap: corrupt cache entry {key[:12]} ({exc}); recomputing",
                      file=sys.stderr)
                self._complained = True
            return None
        return (BlockSpectrum(azimuthal=m, direction="forward", efficiencies=fwd),
                BlockSpectrum(azimuthal=m, direction="backward", efficiencies=bwd))

    def put_pair(self, params, res, m, pair):
        key = self._key(params, res, m)
        if self.root is None:
            self.memory[key] = pair
            return
        path, sidecar = self._paths(key)
        tmp = path + f".tmp{os.getpid()}"
        with open(tmp, "wb") as fh:
            np.savez(fh, forward=pair[0].efficiencies, backward=pair[1].efficiencies)
        with open(tmp, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        tmp_side = sidecar + f".tmp{os.getpid()}"
        with open(tmp_side, "w", encoding="utf-8") as fh:
            fh.write(digest + "\n")
        os.replace(tmp, path)
        os.replace(tmp_side, sidecar)


def _make_cache(cfg: RunConfig) -> DiskCache | None:
    root = os.environ.get(_CACHE_ENV) or cfg.cache_dir
    if root is None:
        return None
    return DiskCache(root)


# --------------------------------------------------------------------------
# subcommands


def _directions(cfg: RunConfig):
    if cfg.direction == "both":
        return ("forward", "backward")
    if cfg.direction in ("forward", "backward"):
        return (cfg.direction,)
    raise ParameterError(f"direction must be forward, backward or both, got {cfg.direction!r}")


def cmd_spectrum(cfg: RunConfig) -> ResultRecord:
    t0 = time.perf_counter()
    directions = _directions(cfg)
    params = _model_params(cfg)
    res = _resolution(cfg, params)
    cache = _make_cache(cfg)
    fwd, bwd = collect_blocks(params, res, cfg.eta_min, cache=cache, jobs=cfg.jobs)
    by_dir = {"forward": fwd, "backward": bwd}

    rows = []
    spectra_out = {}
    reports = {}
    for direction in directions:
        blocks = by_dir[direction]
        report = capacity_report(blocks, cfg.eta_min, drive=params.drive)
        reports[direction] = {
            "total_modes": report.total_modes,
            "total_capacity": report.total_capacity,
            "leading": report.leading,
            "per_block": [
                {"m": m, "count": c, "capacity": q} for m, c, q in report.per_block
            ],
        }
        for blk in blocks:
            spectra_out.setdefault(direction, {})[str(blk.azimuthal)] = [
                float(e) for e in blk.efficiencies
            ]
            for idx, eff in enumerate(blk.efficiencies):
                rows.append((blk.azimuthal, direction, idx, float(eff)))

    rows.sort(key=lambda r: (r[0], r[1], -r[3]))
    csv_lines = ["m,direction,mode_index,efficiency"]
    csv_lines += [f"{m},{d},{i},{e:.17g}" for m, d, i, e in rows]

    record = ResultRecord(
        schema_version=SCHEMA_VERSION,
        command="spectrum",
        inputs=_echo_inputs(cfg, params, res),
        outputs={"reports": reports, "efficiencies": spectra_out},
        provenance=_provenance(t0),
    )
    _write_outputs(cfg, record, "\n".join(csv_lines) + "\n")
    return record


def cmd_sweep(cfg: RunConfig, kind: str) -> ResultRecord:
    t0 = time.perf_counter()
    directions = _directions(cfg)
    cache = _make_cache(cfg)
    if cache is None and len(directions) > 1:
        # each point computes both directions anyway; an in-memory cache
        # keeps the second pass from redoing the block ladder
        cache = DiskCache(None)
    resolution = None if cfg.auto_resolution else _resolution(cfg, _model_params(cfg))
    fits = {}
    points = None
    for direction in directions:
        if kind == "fresnel":
            pts, fit = sweep_fresnel(
                cfg.depth, cfg.sweep_values, direction=direction,
                threshold=cfg.eta_min, resolution=resolution,
                converge_tol=cfg.converge_tol,
                drive=complex(cfg.drive), cache=cache, jobs=cfg.jobs)
        else:
            pts, fit = sweep_depth(
                cfg.fresnel, cfg.sweep_values, direction=direction,
                threshold=cfg.eta_min, resolution=resolution,
                converge_tol=cfg.converge_tol,
                drive=complex(cfg.drive), cache=cache, jobs=cfg.jobs)
        if points is None:
            points = pts
        fits[direction] = {"exponent": fit.exponent, "prefactor": fit.prefactor,
                           "r_squared": fit.r_squared, "points_used": fit.points_used}

    values = sorted(cfg.sweep_values)
    rows = []
    for value, point in zip(values, points):
        for direction in directions:
            rep = point.report_forward if direction == "forward" else point.report_backward
            rows.append((value, direction, rep.total_modes, rep.total_capacity,
                         rep.leading, point.wall_time))
    csv_lines = ["value,direction,total_modes,total_capacity,leading,wall_time"]
    csv_lines += [f"{v:.17g},{d},{n},{c:.17g},{l:.17g},{w:.3f}"
                  for v, d, n, c, l, w in rows]

    params = _model_params(cfg)
    record = ResultRecord(
        schema_version=SCHEMA_VERSION,
        command=f"sweep-{kind}",
        inputs=_echo_inputs(cfg, params, None),
        outputs={"fits": fits,
                 "points": [{"value": v, "direction": d, "total_modes": n,
                             "total_capacity": c, "leading": l} for v, d, n, c, l, _ in rows]},
        provenance=_provenance(t0),
    )
    _write_outputs(cfg, record, "\n".join(csv_lines) + "\n")
    return record


_ORACLE_SUITES = {
    "quick": (
        (10.0, 0.5, 0, 2, "forward", 36.0),
        (10.0, 1.0, 1, 3, "backward", 36.0),
        (10.0, 1e12, 0, 2, "forward", 36.0),
    ),
    "full": (
        (10.0, 0.5, 0, 2, "forward", 36.0),
        (10.0, 1.0, 1, 3, "backward", 36.0),
        (10.0, 1e12, 0, 2, "forward", 36.0),
        (30.0, 1.0, 0, 3, "forward", 40.0),
        (30.0, 0.5, 2, 2, "backward", 40.0),
        (30.0, 1e12, 1, 2, "forward", 40.0),
    ),
}


def oracle_case(depth, fresnel, m, n_r, direction, nu_max,
                n_axial=200, dt_scale=1.0):
    """One eigenmode cross-validation: returns (sigma1^2, eta_total).

    The analysis window is widened well past the production default so the
    time-truncation leakage of the retrieved field stays below the 1e-3
    comparison tolerance.
    """
    params = ModelParams(depth=depth, fresnel=fresnel)
    tau = depth / (2.0 * abs(coefficients(params).spin_decay))
    nf = int(np.ceil(2.5 * nu_max * tau / np.pi)) + 32
    res = Resolution(n_radial_max=n_r, m_max=m, n_freq=nf, n_axial=24,
                     freq_halfwidth=nu_max)
    basis = build_basis(m, res)
    coupling = coupling_block(basis)
    grid = make_grid(res, params)
    emap = end_to_end_map(params, basis, coupling, grid, direction=direction)
    _, sig, vh = np.linalg.svd(emap.operator)
    pulse, dt, _ = eigenmode_pulse(
        emap, basis, coupling, sig[0], vh[0].conj(),
        time_step=dt_scale * default_time_step(params, coupling))
    run = TimeDomainRun(params, basis, coupling, pulse, dt, n_axial=n_axial)
    integrate_storage(run)
    _, eta_total = integrate_retrieval(run, direction, settle=1e-6)
    return float(sig[0] ** 2), float(eta_total)


def cmd_oracle(cfg: RunConfig) -> ResultRecord:
    t0 = time.perf_counter()
    if cfg.oracle_set not in _ORACLE_SUITES:
        raise ParameterError(
            f"oracle_set must be one of {sorted(_ORACLE_SUITES)}, got {cfg.oracle_set!r}")
    suite = _ORACLE_SUITES[cfg.oracle_set]
    cases = []
    worst = 0.0
    for depth, fresnel, m, n_r, direction, nu_max in suite:
        sig1sq, eta = oracle_case(depth, fresnel, m, n_r, direction, nu_max,
                                  n_axial=cfg.oracle_axial,
                                  dt_scale=cfg.oracle_dt_scale)
        dev = abs(eta - sig1sq)
        worst = max(worst, dev)
        cases.append({"depth": depth, "fresnel": fresnel, "m": m,
                      "n_radial": n_r, "direction": direction,
                      "kernel": sig1sq, "time_domain": eta, "deviation": dev})
    record = ResultRecord(
        schema_version=SCHEMA_VERSION,
        command="oracle",
        inputs=_echo_inputs(cfg, _model_params(cfg), None),
        outputs={"suite": cfg.oracle_set, "cases": cases, "max_deviation": worst},
        provenance=_provenance(t0),
    )
    _write_outputs(cfg, record, None)
    if worst > 1e-3:
        raise ConvergenceError(
            f"oracle deviation {worst:.3e} exceeds 1e-3; the kernel pipeline "
            "and the time-domain integration disagree")
    return record


# --------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memcap")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "sweep-fresnel", "sweep-depth", "oracle"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="key-value configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--cache", help="disk cache directory")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--direction", choices=("forward", "backward", "both"))
        p.add_argument("--eta-min", type=float, dest="eta_min")
    sub.add_parser("dump-defaults")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "dump-defaults":
        sys.stdout.write(dump_defaults())
        return 0
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        overrides = {}
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.cache is not None:
            overrides["cache_dir"] = args.cache
        if args.jobs is not None:
            overrides["jobs"] = args.jobs
        if args.direction is not None:
            overrides["direction"] = args.direction
        if args.eta_min is not None:
            overrides["eta_min"] = args.eta_min
        if overrides:
            cfg = replace(cfg, **overrides)
        if args.command == "spectrum":
            record = cmd_spectrum(cfg)
        elif args.command == "sweep-fresnel":
            record = cmd_sweep(cfg, "fresnel")
        elif args.command == "sweep-depth":
            record = cmd_sweep(cfg, "depth")
        else:
            record = cmd_oracle(cfg)
    except (ParameterError, FileNotFoundError) as exc:
        print(f"memcap: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, StabilityError) as exc:
        print(f"memcap: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"memcap: {exc}", file=sys.stderr)
        return 3
    summary = {k: v for k, v in record.outputs.items() if not isinstance(v, (list, dict))}
    print(f"memcap {record.command}: done in {record.provenance['wall_time']:.1f}s "
          f"{summary if summary else ''}".rstrip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
