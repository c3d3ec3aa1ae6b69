"""Command line entry point: ``axiswirl run|verify|fit|resume``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure. Relative output directories are resolved against
``$AXISWIRL_OUTPUT_ROOT`` when it is set, otherwise against the working
directory.
"""

from __future__ import annotations

import argparse
import configparser
import os
import re
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (AOverRMonitor, DiagnosticsWriter, compute_diagnostics, decay_fit,
                       read_diagnostics, smallness_report)
from .errors import (AxiswirlError, ConfigurationError, DataError, DomainError, SolverError,
                     StepRejected)
from .fields import SCENARIOS, SWIRL_PROFILES, read_checkpoint, scenario_state, write_checkpoint
from .grid import make_grid
from .solver import DEFAULT_SAFETY, Stepper, cfl_dt
from .suites import SUITES, random_scenario_params, run_suite

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

OUTPUT_ROOT_ENV = "AXISWIRL_OUTPUT_ROOT"

# column name in the CSV -> summary key of its fitted decay exponent
FIT_COLUMNS = {"u_l2_sq": "alpha_u_l2_sq", "uth_l2_sq": "alpha_uth_l2_sq",
               "ruth_l2_sq": "alpha_ruth_l2_sq"}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ScenarioConfig:
    name: str = "small-swirl"
    params: dict = field(default_factory=dict)
    R: float = 4.0
    Z: float = 4.0
    nr: int = 64
    nz: int = 128
    t_end: float = 1.0
    safety: float = DEFAULT_SAFETY
    max_steps: int = 1_000_000
    zbc: str = "noslip"
    C: float = 1.0
    stride: int = 1
    directory: str = "axiswirl-out"
    checkpoint_every: int = 0
    identities: bool = True
    fit_window: tuple = (5.0, None)
    invariants: bool = True
    seed: int | None = None
    source: Path | None = None


_SCHEMA = {
    "grid": {"r": float, "z": float, "nr": int, "nz": int},
    "time": {"t_end": float, "safety": float, "max_steps": int, "zbc": str},
    "scenario": {"name": str, "amplitude": float, "swirl": float, "density": float,
                 "width": float, "poloidal": str, "swirl_profile": str, "nu": float,
                 "circulation": float, "c": float, "seed": int, "randomize": bool},
    "output": {"directory": str, "stride": int, "checkpoint_every": int, "identities": bool},
    "verify": {"fit_window": str, "invariants": bool},
}


def _line_of(text: str, section: str, key: str) -> int | None:
    """1-based line of ``key`` inside ``[section]`` of an INI text."""
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip().lower()
            continue
        if current == section:
            m = re.match(r"([^=:]+)[=:]", s)
            if m and m.group(1).strip().lower() == key:
                return n
    return None


def _section_line(text: str, section: str) -> int | None:
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m and m.group(1).strip().lower() == section:
            return n
    return None


def _bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _window(v: str) -> tuple:
    parts = [p.strip() for p in v.split(",")]
    if len(parts) != 2:
        raise ValueError("expected 'a,b'")
    a = float(parts[0])
    b = None if parts[1].lower() in ("", "end", "inf") else float(parts[1])
    return a, b


def parse_config(path) -> ScenarioConfig:
    """Read an INI run description; errors carry the offending line number."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config: {exc.strerror}") from exc
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]
        where = f"{path}:{lineno}" if lineno else str(path)
        raise ConfigurationError(f"{where}: {exc.message.splitlines()[0]}") from exc

    cfg = ScenarioConfig(source=path)
    values: dict[tuple[str, str], object] = {}
    for section in cp.sections():
        sec = section.lower()
        if sec not in _SCHEMA:
            raise ConfigurationError(
                f"{path}:{_section_line(text, sec) or '?'}: unknown section [{section}]")
        for key, raw in cp.items(section):
            line = _line_of(text, sec, key)
            conv = _SCHEMA[sec].get(key)
            if conv is None:
                raise ConfigurationError(f"{path}:{line}: unknown key {key!r} in [{section}]")
            try:
                values[(sec, key)] = _bool(raw) if conv is bool else conv(raw.strip())
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{line}: bad value for {key}: {exc}") from exc

    def get(sec, key, default):
        return values.get((sec, key), default)

    cfg.R = get("grid", "r", cfg.R)
    cfg.Z = get("grid", "z", cfg.Z)
    cfg.nr = get("grid", "nr", cfg.nr)
    cfg.nz = get("grid", "nz", cfg.nz)
    cfg.t_end = get("time", "t_end", cfg.t_end)
    cfg.safety = get("time", "safety", cfg.safety)
    cfg.max_steps = get("time", "max_steps", cfg.max_steps)
    cfg.zbc = get("time", "zbc", cfg.zbc)
    cfg.name = get("scenario", "name", cfg.name)
    cfg.C = get("scenario", "c", cfg.C)
    cfg.seed = get("scenario", "seed", None)
    for key in ("amplitude", "swirl", "density", "width", "poloidal", "swirl_profile", "nu",
                "circulation"):
        if ("scenario", key) in values:
            cfg.params[key] = values[("scenario", key)]
    if get("scenario", "randomize", False):
        if cfg.seed is None:
            raise ConfigurationError(
                f"{path}:{_line_of(text, 'scenario', 'randomize')}: randomize needs a seed")
        drawn = random_scenario_params(np.random.default_rng(cfg.seed))
        cfg.params = {**drawn, **cfg.params}
    cfg.directory = get("output", "directory", cfg.directory)
    cfg.stride = get("output", "stride", cfg.stride)
    cfg.checkpoint_every = get("output", "checkpoint_every", cfg.checkpoint_every)
    cfg.identities = get("output", "identities", cfg.identities)
    cfg.invariants = get("verify", "invariants", cfg.invariants)
    if ("verify", "fit_window") in values:
        try:
            cfg.fit_window = _window(values[("verify", "fit_window")])
        except ValueError as exc:
            raise ConfigurationError(
                f"{path}:{_line_of(text, 'verify', 'fit_window')}: bad fit_window: {exc}") from exc

    def check(ok, sec, key, msg):
        if not ok:
            raise ConfigurationError(f"{path}:{_line_of(text, sec, key) or '?'}: {msg}")

    check(cfg.R > 0, "grid", "r", "R must be positive")
    check(cfg.Z > 0, "grid", "z", "Z must be positive")
    check(cfg.nr >= 4, "grid", "nr", "nr must be at least 4")
    check(cfg.nz >= 4, "grid", "nz", "nz must be at least 4")
    check(cfg.t_end > 0, "time", "t_end", "t_end must be positive")
    check(0 < cfg.safety <= 1, "time", "safety", "safety must lie in (0, 1]")
    check(cfg.max_steps >= 1, "time", "max_steps", "max_steps must be at least 1")
    check(cfg.zbc in ("noslip", "slip"), "time", "zbc", "zbc must be 'noslip' or 'slip'")
    check(cfg.name in SCENARIOS, "scenario", "name",
          f"unknown scenario {cfg.name!r}; choose from {', '.join(SCENARIOS)}")
    check(cfg.C > 0, "scenario", "c", "C must be positive")
    for key in ("amplitude", "swirl"):
        if key in cfg.params:
            check(cfg.params[key] >= 0, "scenario", key, f"{key} must be non-negative")
    for key in ("width", "nu", "circulation"):
        if key in cfg.params:
            check(cfg.params[key] > 0, "scenario", key, f"{key} must be positive")
    if "poloidal" in cfg.params:
        check(cfg.params["poloidal"] in ("stream", "vorticity"), "scenario", "poloidal",
              "poloidal must be 'stream' or 'vorticity'")
    if "swirl_profile" in cfg.params:
        check(cfg.params["swirl_profile"] in SWIRL_PROFILES, "scenario", "swirl_profile",
              f"swirl_profile must be one of {', '.join(SWIRL_PROFILES)}")
    check(cfg.stride >= 1, "output", "stride", "stride must be at least 1")
    check(cfg.checkpoint_every >= 0, "output", "checkpoint_every",
          "checkpoint_every must be non-negative")
    return cfg


def output_dir(directory: str) -> Path:
    p = Path(directory)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


# ---------------------------------------------------------------------------
# run loop


class InvariantCounter:
    """Per-step pass/fail counts of the discrete invariants."""

    def __init__(self, state):
        from .solver import kinetic_energy
        from .suites import ruth_norms

        self._energy = kinetic_energy
        self._ruth = ruth_norms
        self.rho_bounds = (float(state.rho.values.min()), float(state.rho.values.max()))
        self.energy = kinetic_energy(state)
        self.ruth = ruth_norms(state)
        self.monitor = AOverRMonitor()
        self.monitor.update(state)
        self.counts = {k: [0, 0] for k in ("projection", "energy", "swirl_l1", "swirl_l2",
                                           "density_bounds", "a_over_r")}

    def _tally(self, key, ok):
        self.counts[key][0 if ok else 1] += 1

    def update(self, state, report):
        from .suites import divergence_ratio

        self._tally("projection", divergence_ratio(state, report) <= 1.0)
        e = self._energy(state)
        self._tally("energy", e <= self.energy * (1 + 1e-10))
        self.energy = e
        q = self._ruth(state)
        self._tally("swirl_l1", q[0] <= self.ruth[0] * (1 + 1e-8))
        self._tally("swirl_l2", q[1] <= self.ruth[1] * (1 + 1e-8))
        self.ruth = q
        lo, hi = self.rho_bounds
        self._tally("density_bounds", report.rho_min >= lo - 1e-12 and report.rho_max <= hi + 1e-12)
        rec = self.monitor.update(state)
        self._tally("a_over_r", not rec["flag"])

    def summary(self) -> dict:
        out = {}
        for k, (ok, bad) in self.counts.items():
            out[f"invariant_{k}_pass"] = ok
            out[f"invariant_{k}_fail"] = bad
        return out


def _checkpoint_name(step: int) -> str:
    return f"checkpoint_{step:08d}.bin"


def _write_summary(path: Path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            if isinstance(v, float):
                v = repr(v)
            fh.write(f"{k}={v}\n")


def _fit_exponents(csv_path: Path, window) -> dict:
    out = {}
    try:
        data = read_diagnostics(csv_path)
    except (DataError, OSError):
        return {v: "nan" for v in FIT_COLUMNS.values()}
    t = data["t"]
    for col, key in FIT_COLUMNS.items():
        try:
            fit = decay_fit(t, data[col], window=window)
            out[key] = fit.alpha
            out[key.replace("alpha", "fitres")] = fit.residual
        except (DomainError, DataError) as exc:
            out[key] = "nan"
            out[key.replace("alpha", "fiterror")] = str(exc).replace("\n", " ")
    return out


def _smallness_items(state, C, zbc) -> dict:
    try:
        rep = smallness_report(state, C, zbc=zbc)
    except DataError as exc:
        return {"smallness_error": str(exc)}
    return {"smallness_C": rep.C, "smallness_F1": rep.F1, "smallness_F2": rep.F2,
            "smallness_F2rhs": rep.F2rhs, "smallness_X": rep.X, "smallness_eta1": rep.eta1,
            "smallness_satisfied": rep.satisfied}


def execute(cfg: ScenarioConfig, state=None, start_step: int = 0, append: bool = False,
            out: Path | None = None, log=print) -> int:
    """Advance ``state`` (or the configured initial data) to ``t_end``; write all outputs."""
    out = output_dir(cfg.directory) if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    if cfg.source is not None and not append:
        shutil.copyfile(cfg.source, out / "run.ini")
    if state is None:
        grid = make_grid(cfg.R, cfg.Z, cfg.nr, cfg.nz)
        state = scenario_state(cfg.name, grid, **cfg.params)
    initial = state
    stepper = Stepper(state.grid, safety=cfg.safety, zbc=cfg.zbc)
    counter = InvariantCounter(state) if cfg.invariants else None
    csv_path = out / "diagnostics.csv"
    status, code, message = "ok", EXIT_OK, ""
    step = start_step
    with DiagnosticsWriter(csv_path, append=append) as writer:
        if not append:
            writer.write(compute_diagnostics(state, step, None, cfg.zbc, cfg.identities))
        try:
            while state.t < cfg.t_end * (1 - 1e-12) and step - start_step < cfg.max_steps:
                dt = min(cfl_dt(state, cfg.safety), cfg.t_end - state.t)
                state, report = stepper.step(state, dt)
                step += 1
                if counter is not None:
                    counter.update(state, report)
                if step % cfg.stride == 0:
                    writer.write(compute_diagnostics(state, step, report, cfg.zbc, cfg.identities))
                if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    write_checkpoint(out / _checkpoint_name(step), state)
                    writer.flush()
            if step % cfg.stride != 0:
                writer.write(compute_diagnostics(state, step, None, cfg.zbc, cfg.identities))
        except (StepRejected, SolverError, FloatingPointError) as exc:
            status, code, message = "numerical-failure", EXIT_NUMERIC, str(exc)
            log(f"error: {exc}", file=sys.stderr)
        writer.flush()
    write_checkpoint(out / "final.bin", state)

    summary = {"status": status, "scenario": cfg.name, "steps": step, "t_final": float(state.t),
               "nr": state.grid.nr, "nz": state.grid.nz, "R": state.grid.R, "Z": state.grid.Z}
    if message:
        summary["error"] = message.replace("\n", " ")
    window = cfg.fit_window
    summary["fit_window"] = f"{window[0]},{'end' if window[1] is None else window[1]}"
    summary.update(_fit_exponents(csv_path, window))
    summary.update(_smallness_items(initial, cfg.C, cfg.zbc))
    if counter is not None:
        summary.update(counter.summary())
    _write_summary(out / "summary.txt", summary)
    log(f"{status}: {step} steps to t={state.t:.6g}; outputs in {out}")
    return code


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    return execute(cfg)


def _truncate_diagnostics(path: Path, last_step: int) -> None:
    """Drop rows written after ``last_step`` so a resumed run does not duplicate them."""
    lines = path.read_text().splitlines(keepends=True)
    kept = lines[:2] + [ln for ln in lines[2:] if ln.strip() and int(ln.split(",", 1)[0]) <= last_step]
    path.write_text("".join(kept))


def cmd_resume(args) -> int:
    ckpt = Path(args.checkpoint)
    try:
        state = read_checkpoint(ckpt)
    except OSError as exc:
        raise ConfigurationError(f"{ckpt}: cannot read checkpoint: {exc.strerror}") from exc
    run_dir = ckpt.parent
    cfg_path = Path(args.config) if args.config else run_dir / "run.ini"
    if not cfg_path.exists():
        raise ConfigurationError(f"{cfg_path}: no run configuration found for resume")
    cfg = parse_config(cfg_path)
    cfg.source = None
    if args.t_end is not None:
        cfg.t_end = args.t_end
    if (state.grid.nr, state.grid.nz) != (cfg.nr, cfg.nz):
        raise ConfigurationError("checkpoint grid differs from the run configuration")
    # the step number is in the checkpoint name; final.bin falls back to the
    # last diagnostics row at or before the checkpoint time
    m = re.search(r"(\d+)", ckpt.stem)
    start = int(m.group(1)) if m else 0
    csv_path = run_dir / "diagnostics.csv"
    if csv_path.exists():
        if not m:
            data = read_diagnostics(csv_path)
            keep = data["t"] <= state.t * (1 + 1e-14)
            start = int(data["step"][keep][-1]) if keep.any() else 0
        _truncate_diagnostics(csv_path, start)
    return execute(cfg, state, start_step=start, append=csv_path.exists(), out=run_dir)


def cmd_verify(args) -> int:
    rep = run_suite(args.suite, args.nr, args.nz)
    for c in rep.checks:
        print(c.line())
    print(f"suite {rep.suite}: {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_fit(args) -> int:
    try:
        window = _window(args.window)
    except ValueError as exc:
        raise ConfigurationError(f"bad --window {args.window!r}: {exc}") from exc
    try:
        data = read_diagnostics(args.csv)
    except OSError as exc:
        raise ConfigurationError(f"{args.csv}: {exc.strerror}") from exc
    if args.column not in data:
        raise ConfigurationError(f"no column {args.column!r} in {args.csv}")
    fit = decay_fit(data["t"], data[args.column], window=window)
    print(f"column={args.column}")
    print(f"alpha={fit.alpha!r}")
    print(f"amplitude={fit.amplitude!r}")
    print(f"residual={fit.residual!r}")
    print(f"samples={fit.samples}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="axiswirl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario described by an INI file")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("suite", help=", ".join(SUITES))
    v.add_argument("--nr", type=int, default=None)
    v.add_argument("--nz", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fit", help="fit y = A <t>^-alpha to a diagnostics column")
    f.add_argument("csv")
    f.add_argument("--column", required=True)
    f.add_argument("--window", default="5,end", help="a,b (b may be 'end')")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("resume", help="continue a run from one of its checkpoints")
    s.add_argument("checkpoint")
    s.add_argument("--config", default=None, help="defaults to run.ini next to the checkpoint")
    s.add_argument("--t-end", type=float, default=None)
    s.set_defaults(func=cmd_resume)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, StepRejected) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AxiswirlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
