"""Command-line front end: ``run <config>``, ``smoke`` and ``print-defaults``.

Configuration files are line oriented::

    # comment
    [grid]
    n_r = 64
    solver.T = 0.25      # dotted keys work in any section

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergedError

log = logging.getLogger("axiboussinesq")

SUITES = ("special", "biotsavart", "semigroup", "solve", "gamma", "decay")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# configuration


@dataclass
class GridSection:
    r_max: float = 12.0
    z_half: float = 12.0
    n_r: int = 64
    n_z: int = 128


@dataclass
class InitSection:
    omega_amp: float = 0.0
    omega_a: float = 4.0
    omega_r0: float = 2.0
    omega_z0: float = 0.0
    rho_amp: float = 5.0
    rho_a: float = 4.0
    rho_r0: float = 0.0
    rho_z0: float = 0.0


@dataclass
class SolverSection:
    T: float = 0.5
    t_end: float = 5.0
    n_time: int = 8
    n_quad: int = 16
    picard_tol: float = 1e-8
    picard_max: int = 50
    restart_count: int = 10000


@dataclass
class BiotSavartSection:
    subcell_refine: int = 8
    # grid of the curl self-consistency study (z_half = r_max, n_z = 2 n_r)
    r_max: float = 8.0
    n_r: int = 128


@dataclass
class ProbeSection:
    r_max: float = 24.0
    n_r: int = 128
    t_min: float = 0.1
    t_max: float = 10.0
    n_t: int = 9


@dataclass
class DecaySection:
    t_lo: float = 0.5
    t_hi: float = 5.0


@dataclass
class RunSection:
    suites: tuple = ("special",)
    output: str = "axib_out"
    seed: int = 0


@dataclass
class ExperimentConfig:
    grid: GridSection = field(default_factory=GridSection)
    init: InitSection = field(default_factory=InitSection)
    solver: SolverSection = field(default_factory=SolverSection)
    biot_savart: BiotSavartSection = field(default_factory=BiotSavartSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    decay: DecaySection = field(default_factory=DecaySection)
    run: RunSection = field(default_factory=RunSection)


def _convert(raw: str, default, key: str, line: int):
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError(raw)
            return val
        if isinstance(default, tuple):
            items = tuple(x.strip() for x in raw.replace(",", " ").split() if x.strip())
            return items
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {type(default).__name__}", key=key, line=line) from None


def parse_text(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    lines: dict[str, int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=no)
            section = line[1:-1].strip()
            if not hasattr(cfg, section):
                raise ConfigError(f"unknown section [{section}]", key=section, line=no)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=no)
        key, value = (x.strip() for x in line.split("=", 1))
        full = key if "." in key else (f"{section}.{key}" if section else key)
        sec_name, _, name = full.partition(".")
        sec = getattr(cfg, sec_name, None) if name else None
        if sec is None or not dataclasses.is_dataclass(sec) or name not in {f.name for f in dataclasses.fields(sec)}:
            raise ConfigError("unknown key", key=full, line=no)
        setattr(sec, name, _convert(value, getattr(sec, name), full, no))
        lines[full] = no
    validate(cfg, lines)
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read and validate a configuration file (missing file raises ``FileNotFoundError``)."""
    return parse_text(Path(path).read_text())


def serialize(cfg: ExperimentConfig) -> str:
    out = []
    for f in dataclasses.fields(cfg):
        sec = getattr(cfg, f.name)
        out.append(f"[{f.name}]")
        for g in dataclasses.fields(sec):
            v = getattr(sec, g.name)
            if isinstance(v, tuple):
                v = ", ".join(v)
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{g.name} = {v}")
        out.append("")
    return "\n".join(out)


def _check(cond: bool, key: str, msg: str, lines: dict):
    if not cond:
        raise ConfigError(msg, key=key, line=lines.get(key))


def validate(cfg: ExperimentConfig, lines: dict | None = None) -> None:
    from .biot_savart import BSConfig
    from .grid_fields import make_grid
    from .mild_solver import SolverConfig

    lines = lines or {}

    def relabel(exc: ConfigError):
        raise ConfigError(str(exc).split("] ", 1)[-1], key=exc.key, line=lines.get(exc.key)) from None

    g = cfg.grid
    try:
        grid = make_grid(g.r_max, g.z_half, g.n_r, g.n_z)
        bs = BSConfig(cfg.biot_savart.subcell_refine)
        s = cfg.solver
        SolverConfig(grid, T=s.T, n_time=s.n_time, n_quad=s.n_quad, picard_tol=s.picard_tol,
                     picard_max=s.picard_max, bs=bs, restart_count=s.restart_count)
    except ConfigError as exc:
        relabel(exc)
    _check(cfg.biot_savart.r_max > 0, "biot_savart.r_max", "r_max must be positive", lines)
    _check(cfg.biot_savart.n_r >= 8, "biot_savart.n_r", "n_r must be at least 8", lines)
    _check(cfg.solver.t_end > 0, "solver.t_end", "t_end must be positive", lines)
    for name in ("omega_a", "rho_a"):
        _check(getattr(cfg.init, name) > 0, f"init.{name}", "Gaussian rate must be positive", lines)
    for name in ("omega_r0", "rho_r0"):
        _check(getattr(cfg.init, name) >= 0, f"init.{name}", "centre must have r0 >= 0", lines)
    p = cfg.probe
    _check(p.r_max > 0, "probe.r_max", "r_max must be positive", lines)
    _check(p.n_r >= 8, "probe.n_r", "n_r must be at least 8", lines)
    _check(0 < p.t_min < p.t_max, "probe.t_min", "need 0 < t_min < t_max", lines)
    _check(p.n_t >= 2, "probe.n_t", "n_t must be at least 2", lines)
    _check(0 < cfg.decay.t_lo < cfg.decay.t_hi, "decay.t_lo", "need 0 < t_lo < t_hi", lines)
    suites = cfg.run.suites
    _check(len(suites) > 0, "run.suites", "suite set must be nonempty", lines)
    for s_ in suites:
        _check(s_ in SUITES, "run.suites", f"unknown suite {s_!r}; choose from {', '.join(SUITES)}", lines)
    _check(len(set(suites)) == len(suites), "run.suites", "duplicate suite", lines)
    _check(bool(cfg.run.output), "run.output", "output directory must be given", lines)


def smoke_config(output: str = "axib_smoke") -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.grid = GridSection(8.0, 8.0, 16, 32)
    cfg.init = InitSection(omega_amp=-1.0, rho_amp=1.0)
    cfg.solver = SolverSection(T=0.25, t_end=0.5)
    cfg.run = RunSection(("special", "solve"), output, 0)
    validate(cfg)
    return cfg


# ---------------------------------------------------------------------------
# artifacts


def fmt(x) -> str:
    """Round-trip decimal text for CSV numerics."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


class _Csv:
    def __init__(self, path: Path, header):
        self.path = path
        self.rows = [list(header)]

    def add(self, *row):
        self.rows.append([fmt(v) for v in row])

    def write(self):
        with open(self.path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.rows)


DECAY_HEADER = ("quantity", "p", "t", "value")
PROBE_HEADER = ("operator", "p", "q", "rate", "t", "ratio")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


class Runner:
    def __init__(self, cfg: ExperimentConfig):
        from .biot_savart import BSConfig
        from .grid_fields import make_grid

        self.cfg = cfg
        self.out = Path(cfg.run.output)
        self.grid = make_grid(cfg.grid.r_max, cfg.grid.z_half, cfg.grid.n_r, cfg.grid.n_z)
        self.bs = BSConfig(cfg.biot_savart.subcell_refine)
        self.checks: list[Check] = []
        self.reports: list = []
        self.trajectory = None

    def check(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))
        log.info("%s %s %s", "PASS" if passed else "FAIL", name, detail)

    # --- suites -----------------------------------------------------------

    def suite_special(self):
        from . import special_kernels as sk

        out = _Csv(self.out / "special.csv", ("check", "x", "reference", "approximation", "rel_gap"))
        for name, x, q, ser, gap in sk.regime_consistency():
            out.add(f"regime_{name}", x, q, ser, gap)
            self.check(f"special.regime.{name}@{x:g}", gap <= 1e-8, f"gap={gap:.3e}")
        cases = [("F_small", 1e-6, sk.eval_F(1e-6), sk.leading_F(1e-6, "small")),
                 ("F_large", 1e4, sk.eval_F(1e4), sk.leading_F(1e4, "large"))]
        for which, ev in ((1, sk.eval_N1), (2, sk.eval_N2)):
            for t, rg in ((1e-6, "small"), (1e6, "large")):
                cases.append((f"N{which}_{rg}", t, ev(t), sk.leading_N(which, t, rg)))
        for name, x, ref, app in cases:
            gap = abs(ref - app) / abs(ref)
            out.add(f"asymptotic_{name}", x, ref, app, gap)
            self.check(f"special.asymptotic.{name}", gap <= 1e-3, f"gap={gap:.3e}")
        for which in (1, 2):
            pr = sk.monotonicity_probe(which)
            out.add(f"monotone_N{which}", pr["samples"], pr["increases"], pr["max_derivative"], 0.0)
            log.info("N%d monotonicity probe: %d increases, max derivative %.4g", which, pr["increases"],
                     pr["max_derivative"])
        out.write()

    def suite_biotsavart(self):
        from .biot_savart import kernel_bound_probe, measure_velocity_estimates, velocity_from_vorticity
        from .grid_fields import Measure, ScalarField, d_dr, d_dz, gaussian, lp_norm, make_grid
        from .verify import default_ensemble, operator_norm_probe

        seed = self.cfg.run.seed
        c = self.cfg.biot_savart
        grid = make_grid(c.r_max, c.r_max, c.n_r, 2 * c.n_r)
        b1, b2 = kernel_bound_probe(seed=seed), kernel_bound_probe(seed=seed + 1)
        stable = abs(b1["max"] / b2["max"] - 1) <= 0.05
        self.check("biotsavart.kernel_bound", stable and math.isfinite(b1["max"]),
                   f"max={b1['max']:.6g} reseeded={b2['max']:.6g}")
        om = gaussian(grid)
        v = velocity_from_vorticity(om, self.bs)
        curl = d_dz(v.vr, grid) - d_dr(v.vz, grid)
        err = lp_norm(ScalarField(grid, curl - om.values), 2) / lp_norm(om, 2)
        self.check("biotsavart.curl", err <= 0.05, f"rel_L2={err:.4g}")
        est = measure_velocity_estimates(om, self.bs, v)
        for k, val in sorted(est.items()):
            log.info("velocity estimate %s: %.6g", k, val)
        pr = operator_norm_probe("BS", default_ensemble(grid, Measure.PLANAR, seed), 4 / 3, 4, 0.0,
                                 bs=self.bs, seed=seed)
        out = _Csv(self.out / "biotsavart_probe.csv", PROBE_HEADER)
        for t, ratio in pr.rows:
            out.add("BS", 4 / 3, 4.0, 0.0, t, ratio)
        out.write()
        self.check("biotsavart.lq_lp_probe", math.isfinite(pr.constant) and pr.constant > 0,
                   f"constant={pr.constant:.6g}")

    def suite_semigroup(self):
        from .grid_fields import Measure, ScalarField, axisym_mass, make_grid
        from .semigroup import apply_S2_axi
        from .verify import HEAT3D_CONSTANT, default_ensemble, operator_norm_probe

        p = self.cfg.probe
        g = make_grid(p.r_max, p.r_max, p.n_r, 2 * p.n_r)
        R, Z = g.mesh()
        f = ScalarField(g, np.exp(-(R**2 + Z**2) / 4.0), Measure.AXISYM)
        u = apply_S2_axi(1.0, f)
        exact = 2.0**-1.5 * np.exp(-(R**2 + Z**2) / 8.0)
        err = float(np.max(np.abs(u.values - exact)) / exact.max())
        mass = abs(axisym_mass(u) / axisym_mass(f) - 1.0)
        self.check("semigroup.heat_exact", err <= 1e-4 and mass <= 1e-10, f"linf={err:.3e} mass={mass:.3e}")
        times = np.geomspace(p.t_min, p.t_max, p.n_t)
        out = _Csv(self.out / "semigroup_probe.csv", PROBE_HEADER)
        seed = self.cfg.run.seed
        for op, meas, rate in (("S1", Measure.PLANAR, 1.0), ("S2", Measure.AXISYM, 1.5)):
            pr = operator_norm_probe(op, default_ensemble(g, meas, seed), 1.0, math.inf, rate, times, seed=seed)
            for t, ratio in pr.rows:
                out.add(op, 1.0, math.inf, rate, t, ratio)
            self.check(f"semigroup.rate.{op}", pr.spread() < 0.25, f"spread={pr.spread():.4f} max={pr.constant:.6g}")
            if op == "S2":
                rel = abs(pr.constant / HEAT3D_CONSTANT - 1)
                self.check("semigroup.heat_constant", rel <= 0.10, f"constant={pr.constant:.6g} rel={rel:.3e}")
        out.write()

    def _initial_state(self):
        from .grid_fields import Measure, gaussian
        from .mild_solver import State

        i = self.cfg.init
        om = gaussian(self.grid, i.omega_amp, i.omega_a, i.omega_r0, i.omega_z0, Measure.PLANAR)
        rh = gaussian(self.grid, i.rho_amp, i.rho_a, i.rho_r0, i.rho_z0, Measure.AXISYM)
        return State.from_arrays(0.0, self.grid, om.values, rh.values)

    def _solver_config(self):
        from .mild_solver import SolverConfig

        s = self.cfg.solver
        return SolverConfig(self.grid, T=s.T, n_time=s.n_time, n_quad=s.n_quad, picard_tol=s.picard_tol,
                            picard_max=s.picard_max, bs=self.bs, restart_count=s.restart_count)

    def suite_solve(self):
        from .coupled_diagnostics import axis_trace
        from .grid_fields import axisym_mass, lp_norm
        from .mild_solver import evolve, picard_solve

        if self.trajectory is not None:
            return
        data = self._initial_state()
        scfg = self._solver_config()
        _, wl = picard_solve(data, scfg)
        log.info("first window: %d iterations, ratios %s", wl.iterations, " ".join(f"{r:.4g}" for r in wl.ratios))
        self.check("solve.first_window", all(r < 1 for r in wl.ratios), f"iterations={wl.iterations}")
        traj = evolve(data, self.cfg.solver.t_end, scfg,
                      on_window=lambda w: log.info("window t0=%.6g len=%.6g it=%d", w.t0, w.length, w.iterations))
        if traj.aborted:
            log.info("evolution stopped: %s", traj.aborted)
        self.trajectory = traj
        m0 = axisym_mass(data.rho)
        drift = max(abs(axisym_mass(s.rho) - m0) for s in traj.states) / (abs(m0) or 1.0)
        self.check("solve.mass", drift <= 1e-6 and traj.aborted is None, f"drift={drift:.3e}")
        out = _Csv(self.out / "solve.csv", DECAY_HEADER)
        for s in traj.states:
            out.add("omega_L4/3", 4 / 3, s.t, lp_norm(s.omega, 4 / 3))
            out.add("rho_L1", 1.0, s.t, lp_norm(s.rho, 1, full_volume=True))
            out.add("rho_axis_trace", 1.0, s.t, axis_trace(s.rho.values, self.grid))
        out.write()
        ratios = [r for w in traj.windows for r in w.ratios]
        log.info("largest contraction ratio over converged windows: %.4g", traj.max_ratio() if ratios else 0.0)

    def suite_gamma(self):
        from .coupled_diagnostics import (
            max_principle_check, monotonicity_check, nash_decay_check, rho_bounds_check, theorem_bounds_check,
        )

        self.suite_solve()
        traj = self.trajectory
        mp = max_principle_check(traj)
        if mp.applicable:
            self.check("gamma.max_principle", mp.passed, f"worst={mp.worst:.3e} eps={mp.eps:.3e} t={mp.worst_time:.4g}")
        else:
            log.info("max principle skipped: %s", mp.note)
        out = _Csv(self.out / "gamma.csv", DECAY_HEADER)
        for p in (1.0, 2.0, math.inf):
            mr = monotonicity_check(traj, p)
            for t, n in zip(mr.times, mr.norms):
                out.add("gamma_Lp", p, t, n)
            per = " ".join(f"1e{k}:{v}" for k, v in sorted(mr.strict_per_decade.items()))
            self.check(f"gamma.monotone.p={fmt(p)}", mr.passed, f"strict decrements per decade {per}")
        out.write()
        nr = nash_decay_check(traj)
        log.info("Nash constant max %.4g; Gamma Linf slope %.4g (conclusive=%s)", nr.max_nash_constant, nr.slope,
                 nr.conclusive)
        for p in (1.0, 2.0, math.inf):
            br = theorem_bounds_check(traj, p)
            self.check(f"gamma.bounds.p={fmt(p)}", br.passed,
                       f"sup omega={br.sup_omega:.4g} rho_tilde={br.sup_rho_tilde:.4g} rho={br.sup_rho:.4g}")
        for p, (worst, ok) in rho_bounds_check(traj).items():
            self.check(f"gamma.rho_lp.p={fmt(p)}", ok, f"max ratio={worst:.10g}")

    def suite_decay(self):
        from .grid_fields import lp_norm
        from .verify import decay_report

        self.suite_solve()
        states = [s for s in self.trajectory.states if s.t > 0]
        d = self.cfg.decay
        specs = [
            ("rho_Linf_R3", math.inf, lambda s: lp_norm(s.rho, math.inf), -1.5, 0.15),
            ("omega_L2", 2.0, lambda s: lp_norm(s.omega, 2), -0.5, 0.15),
            ("r_rho_Linf", math.inf, lambda s: lp_norm(s.rho_tilde, math.inf), -1.0, 0.2),
        ]
        out = _Csv(self.out / "decay.csv", DECAY_HEADER)
        for name, p, fn, pred, tol in specs:
            samples = [(s.t, fn(s)) for s in states]
            for t, v in samples:
                out.add(name, p, t, v)
            rep = decay_report(name, p, samples, pred, tol, (d.t_lo, d.t_hi))
            self.reports.append(rep)
            self.check(f"decay.{name}", rep.passed,
                       f"slope={rep.fitted_slope:.4f} predicted={pred} tol={tol} constant={rep.measured_constant:.4g}")
        out.write()

    # ---------------------------------------------------------------------

    def run(self) -> int:
        self.out.mkdir(parents=True, exist_ok=True)
        for name in self.cfg.run.suites:
            t0 = time.perf_counter()
            log.info("suite %s", name)
            try:
                getattr(self, f"suite_{name}")()
            except DivergedError as exc:
                log.error("divergence: %s", exc)
                log.error("contraction ratios: %s", " ".join(f"{r:.4g}" for r in exc.ratios))
                self.check(f"{name}.converged", False, f"diverged at t0={exc.t0} window={exc.window}")
                self._report(diverged=exc)
                return EXIT_DIVERGED
            log.info("suite %s done in %.2f s", name, time.perf_counter() - t0)
        self._report()
        return EXIT_OK if all(c.passed for c in self.checks) else EXIT_FAIL

    def _report(self, diverged: DivergedError | None = None):
        lines = [f"suites: {', '.join(self.cfg.run.suites)}", f"seed: {self.cfg.run.seed}", ""]
        for c in self.checks:
            lines.append(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}")
        if self.reports:
            lines.append("")
            lines.append("decay reports:")
            for r in self.reports:
                lines.append(f"  {r.quantity} p={fmt(r.p)} slope={r.fitted_slope:.6f} predicted={r.predicted_slope} "
                             f"tol={r.tolerance} constant={r.measured_constant:.6g} {'PASS' if r.passed else 'FAIL'}")
        if diverged is not None:
            lines.append("")
            lines.append(f"DIVERGED: {diverged}")
            lines.append("ratios: " + " ".join(f"{r:.6g}" for r in diverged.ratios))
        n_fail = sum(not c.passed for c in self.checks)
        lines.append("")
        lines.append(f"{len(self.checks) - n_fail} passed, {n_fail} failed")
        (self.out / "report.txt").write_text("\n".join(lines) + "\n")


def _setup_logging(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    log.handlers.clear()
    log.setLevel(logging.INFO)
    fh = logging.FileHandler(out / "run.log", mode="w")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(fh)
    log.addHandler(sh)
    return fh


def run(cfg: ExperimentConfig) -> int:
    fh = _setup_logging(Path(cfg.run.output))
    try:
        return Runner(cfg).run()
    finally:
        log.removeHandler(fh)
        fh.close()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="axib", description="Axisymmetric Boussinesq numerical laboratory")
    sub = ap.add_subparsers(dest="cmd", required=True)
    rp = sub.add_parser("run", help="run the suites of a configuration file")
    rp.add_argument("config")
    sp = sub.add_parser("smoke", help="run a built-in minimal configuration")
    sp.add_argument("--output", default="axib_smoke")
    sub.add_parser("print-defaults", help="print the default configuration")
    args = ap.parse_args(argv)

    if args.cmd == "print-defaults":
        sys.stdout.write(serialize(ExperimentConfig()))
        return EXIT_OK
    try:
        cfg = smoke_config(args.output) if args.cmd == "smoke" else parse_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
