"""Command-line front end.

Each subcommand reads a JSON config, writes CSV curves, a ``report.json``
and (unless disabled) PNG figures into the output directory, prints one
line per check, and exits with

* 0 when every asserted check passes,
* 1 when an asserted check fails,
* 2 when the config does not parse or validate,
* 3 when a physics-domain precondition is violated.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .classical import classical_reflection_delay, rescaled_for_wavelength_ratio, semiclassical_comparison
from .config import SUBCOMMANDS, ConfigError, RunConfig, bundled_config_path
from .delays import hartman_sweep, identity_tolerance, onshell_delays, verify_delay_identity
from .errors import PhysicsDomainError
from .oracles import linear_ramp_transition_term, rectangular_phase_time_saturation
from .output import build_report, write_csv, write_json
from .potential import BarrierSpec, evaluate_potential
from .scattering import UNDERFLOW_MODULUS, SliceDiscretization, amplitude_over_grid, check_phase_relation
from .verification import (
    CheckResult,
    check_at_most,
    delay_identity_asymmetric,
    delay_identity_symmetric,
    random_barriers,
    rectangular_oracle,
    unitarity_symmetry_phase,
)
from .wavepacket import (
    SimulationGrid,
    WavePacketSpec,
    centroid_delay_estimate,
    evolve,
    initialize_gaussian,
    sojourn_time,
    spectral_delay_detail,
    spectral_transmission_probability,
    split_outcomes,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3


@dataclass
class Context:
    cfg: RunConfig
    out: Path
    seed: int
    executor: object
    figures: bool


@dataclass
class Outcome:
    results: dict
    checks: list
    artifacts: list


def _disc(ctx: Context, spec: BarrierSpec):
    n = ctx.cfg.block("slices")
    return None if n is None else SliceDiscretization.uniform(spec, int(n))


def run_amplitudes(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    spec, units, tol = cfg.barrier, cfg.units, cfg.tolerances
    amps = amplitude_over_grid(spec, cfg.energies, units, _disc(ctx, spec))
    rows, phase_res = [], []
    for a in amps:
        defined = min(abs(a.T), abs(a.L), abs(a.R)) > UNDERFLOW_MODULUS
        ph = check_phase_relation(a) if defined else None
        if ph is not None:
            phase_res.append(abs(ph))
        rows.append((a.E, a.T.real, a.T.imag, a.L.real, a.L.imag, a.R.real, a.R.imag,
                     a.transmission_probability, a.reflection_probability, a.unitarity_residual, ph, a.flags))
    cols = ["E", "T_re", "T_im", "L_re", "L_im", "R_re", "R_im", "absT2", "absL2",
            "unitarity_residual", "phase_residual", "flags"]
    artifacts = [write_csv(ctx.out / "amplitudes.csv", cols, rows)]
    checks = [
        check_at_most("unitarity", max(a.unitarity_residual for a in amps), tol["unitarity"]),
        check_at_most("symmetry |L-R|", max(abs(a.L - a.R) for a in amps), tol["unitarity"]),
        check_at_most("phase relation", max(phase_res, default=0.0), tol["phase"],
                      detail=f"({len(phase_res)} points with defined phases)"),
    ]
    if ctx.figures:
        from .plotting import amplitudes_figure

        E = np.array([r[0] for r in rows])
        artifacts.append(amplitudes_figure(E, [r[7] for r in rows], [r[8] for r in rows], spec.v0,
                                           ctx.out / "amplitudes.png"))
    results = {"n_energies": len(rows), "flagged": sum(1 for a in amps if a.flags)}
    return Outcome(results, checks, artifacts)


def run_delays(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    spec, units, tol = cfg.barrier, cfg.units, cfg.tolerances

    def one(E):
        return onshell_delays(spec, float(E), units, _disc(ctx, spec))

    energies = cfg.energies.energies
    sets = list(map(one, energies)) if ctx.executor is None else list(ctx.executor.map(one, energies))
    rows, worst = [], (0.0, 0.0, tol["delay"])
    for d in sets:
        res = verify_delay_identity(d)
        t = identity_tolerance(d, tol["delay"])
        if res is not None and abs(res) / t > worst[0]:
            worst = (abs(res) / t, abs(res), t)
        rows.append((d.E, d.tau_tr, d.tau_left, d.tau_right, res, t, d.derivative_error_estimate, d.flags))
    cols = ["E", "tau_tr", "tau_left", "tau_right", "identity_residual", "identity_tolerance",
            "derivative_error", "flags"]
    artifacts = [write_csv(ctx.out / "delays.csv", cols, rows)]
    ratio, res, t = worst
    checks = [CheckResult("delay identity", res, t, ratio <= 1.0,
                          detail=f"(worst residual/tolerance {ratio:.2e})")]
    if ctx.figures:
        from .plotting import delays_figure

        artifacts.append(delays_figure([r[0] for r in rows], [r[1] for r in rows],
                                       [np.nan if r[2] is None else r[2] for r in rows], spec.v0,
                                       ctx.out / "delays.png"))
    return Outcome({"n_energies": len(rows)}, checks, artifacts)


def run_hartman(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    spec, units, tol = cfg.barrier, cfg.units, cfg.tolerances
    h = cfg.block("hartman")
    E = float(h["E"])
    rows = hartman_sweep(spec, E, h["a_values"], units, cfg.block("slices"), ctx.executor)
    kappa = math.sqrt(2.0 * units.mass * (spec.v0 - E)) / units.hbar
    table = []
    for r in rows:
        ratio = r.tau_tr * r.v / (-2.0 * r.a)
        table.append((r.a, kappa * r.a, r.tau_tr, r.dwell_T_tr, r.v_eff, r.v, r.v_eff / r.v, r.absT2,
                      ratio, r.derivative_error_estimate, r.flags))
    cols = ["a", "kappa_a", "tau_tr", "dwell_T_tr", "v_eff", "v", "v_eff_over_v", "absT2",
            "tau_ratio", "derivative_error", "flags"]
    artifacts = [write_csv(ctx.out / "hartman.csv", cols, table)]

    last = rows[-1]
    checks = []
    dwell = np.array([r.dwell_T_tr for r in rows])
    ka = np.array([kappa * r.a for r in rows])
    sel = dwell[ka >= 5.0]
    diffs = np.abs(np.diff(sel))
    growth = float(np.max(np.diff(diffs))) if diffs.size > 1 else 0.0
    checks.append(CheckResult("dwell differences shrink monotonically (kappa a >= 5)", growth, 0.0,
                              bool(np.isfinite(growth) and growth <= 0.0),
                              detail=f"(differences {', '.join(f'{d:.2e}' for d in diffs)})"))
    saturation = None
    if spec.b == 0:
        saturation = rectangular_phase_time_saturation(spec.v0, E, units)
        checks.append(check_at_most("dwell saturation", abs(last.dwell_T_tr - saturation) / saturation,
                                    tol["saturation"], detail=f"(limit {saturation:.12g})"))
    checks.append(CheckResult("v_eff(a_max) > 10 v", last.v_eff / last.v, 10.0,
                              bool(last.v_eff / last.v > 10.0)))
    ratio = table[-1][8]
    checks.append(check_at_most("tau_tr v / (-2a) near 1 at a_max", abs(ratio - 1.0), tol["hartman_ratio"],
                                asserted=False, detail=f"(ratio {ratio:.6f}; finite-width deviation)"))
    if ctx.figures:
        from .plotting import hartman_figure

        artifacts.append(hartman_figure(ka, dwell, saturation, [t[6] for t in table], ctx.out / "hartman.png"))
    return Outcome({"E": E, "kappa": kappa, "saturation": saturation}, checks, artifacts)


def run_classical(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    spec, units, tol = cfg.barrier, cfg.units, cfg.tolerances
    res = [classical_reflection_delay(spec, E, units) for E in cfg.energies.energies]
    rows = [(r.E, r.tau_cl, r.transition_term, r.plateau_term, r.s0, r.quadrature_error) for r in res]
    cols = ["E", "tau_cl", "transition_term", "plateau_term", "s0", "quadrature_error"]
    artifacts = [write_csv(ctx.out / "classical.csv", cols, rows)]
    checks = [check_at_most("quadrature error", max(r.quadrature_error for r in res), tol["quadrature"])]
    if spec.b > 0 and spec.profile.value == "linear":
        err = max(abs(r.transition_term - linear_ramp_transition_term(spec.v0, spec.b, r.E, units)) for r in res)
        checks.append(check_at_most("linear-ramp closed form", err, tol["quadrature"]))
    if spec.b == 0:
        err = max(abs(r.tau_cl + 2.0 * spec.a / float(units.speed(r.E))) for r in res)
        checks.append(check_at_most("sharp-wall limit", err, 0.0))
    if ctx.figures:
        from .plotting import classical_figure

        artifacts.append(classical_figure([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                                          ctx.out / "classical.png"))
    return Outcome({"n_energies": len(rows)}, checks, artifacts)


def run_semiclassical(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    spec, units = cfg.barrier, cfg.units
    sc = cfg.block("semiclassical")
    E = float(sc["E"])
    ratios = sorted({float(r) for r in sc["ratios"]}, reverse=True)

    def one(ratio):
        scaled = rescaled_for_wavelength_ratio(spec, E, ratio, units)
        return scaled, semiclassical_comparison(scaled, E, units)

    pairs = list(map(one, ratios)) if ctx.executor is None else list(ctx.executor.map(one, ratios))
    rows = [(rec.lambda_over_b, s.a, s.b, rec.E, rec.tau_quantum, rec.tau_classical,
             rec.relative_discrepancy, rec.in_semiclassical_regime) for s, rec in pairs]
    cols = ["lambda_over_b", "a", "b", "E", "tau_quantum", "tau_classical", "relative_discrepancy",
            "in_semiclassical_regime"]
    artifacts = [write_csv(ctx.out / "semiclassical.csv", cols, rows)]
    disc = [r[6] for r in rows]
    worst = max((b / a for a, b in zip(disc, disc[1:])), default=0.0)
    checks = [CheckResult("discrepancy decreases with lambda/b", worst, 1.0, bool(worst < 1.0),
                          detail="(largest ratio of successive discrepancies; must be < 1)")]
    if ctx.figures:
        from .plotting import semiclassical_figure

        artifacts.append(semiclassical_figure([r[0] for r in rows], disc, ctx.out / "semiclassical.png"))
    return Outcome({"E": E}, checks, artifacts)


def _relative(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def run_wavepacket(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    spec, units, tol = cfg.barrier, cfg.units, cfg.tolerances
    p, g = cfg.block("packet"), cfg.block("grid")
    packet_spec = WavePacketSpec(float(p["x0"]), float(p["k0"]), float(p["sigma"]))
    grid = SimulationGrid(float(g["xmin"]), float(g["xmax"]), int(g["n"]), float(g["dt"]), float(g["tmax"]))
    sample_every = int(cfg.block("sample_every", max(1, round(0.2 / grid.dt))))
    R_values = cfg.block("region_R", [])
    R_values = [float(R_values)] if isinstance(R_values, (int, float)) else [float(r) for r in R_values]

    packet = initialize_gaussian(packet_spec, grid, spec)
    traj = evolve(packet, spec, grid, units, sample_every=sample_every)
    _, _, probs = split_outcomes(traj.final, spec)
    edge = spec.half_support
    E0 = float(units.energy(packet_spec.k0))

    spec_tr = spectral_delay_detail(spec, packet_spec, "transmitted", units)
    spec_re = spectral_delay_detail(spec, packet_spec, "reflected_left", units)
    P_spectral = spectral_transmission_probability(packet, spec, units)
    global_spectral = spec_tr.probability * spec_tr.value + spec_re.probability * spec_re.value
    onshell = onshell_delays(spec, E0, units)

    checks = [
        check_at_most("norm drift", traj.norm_drift, tol["norm"]),
        check_at_most("P_tr + P_re - 1", abs(probs.P_tr + probs.P_re - 1.0), 1e-6),
        check_at_most("P_tr vs spectral prediction (relative)", _relative(probs.P_tr, P_spectral),
                      tol["probability"]),
    ]
    delays = {
        "onshell_transmitted": onshell.tau_tr,
        "onshell_reflected_left": onshell.tau_left,
        "spectral_transmitted": spec_tr.value,
        "spectral_reflected_left": spec_re.value,
        "spectral_global": global_spectral,
    }
    for branch, plane, ref, P in (("transmitted", edge, spec_tr.value, probs.P_tr),
                                  ("reflected", -edge, spec_re.value, probs.P_re)):
        if P < 1e-6:
            continue
        est = centroid_delay_estimate(traj, branch, plane)
        delays[f"centroid_{branch}"] = est
        checks.append(check_at_most(f"centroid vs spectral delay ({branch}, relative)", _relative(est, ref),
                                    tol["packet"]))

    sojourns = [sojourn_time(traj, R, grid) for R in R_values]
    for s in sojourns:
        delays[f"sojourn_R={s.R:g}"] = s.delay
        checks.append(check_at_most(f"sojourn delay vs spectral global delay (R={s.R:g}, relative)",
                                    _relative(s.delay, global_spectral), tol["packet"]))
    for s1, s2 in zip(sojourns, sojourns[1:]):
        checks.append(check_at_most(f"sojourn delay stable R={s1.R:g} -> {s2.R:g}", abs(s1.delay - s2.delay),
                                    s1.error_estimate + s2.error_estimate))

    x = grid.x
    centroids = traj.densities @ x / traj.densities.sum(axis=1)
    P_R = [traj.densities @ (np.abs(x) <= R) * grid.dx for R in R_values]
    cols = ["t", "norm", "centroid"] + [f"P_R={R:g}" for R in R_values]
    rows = zip(traj.times, traj.norms, centroids, *P_R)
    artifacts = [write_csv(ctx.out / "timeseries.csv", cols, rows)]
    summary = {
        "P_tr": probs.P_tr,
        "P_re": probs.P_re,
        "P_tr_spectral": P_spectral,
        "E0": E0,
        "delays": delays,
        "sojourn": [{"R": s.R, "T_R_interacting": s.T_R_interacting, "T_R_free": s.T_R_free,
                     "delay": s.delay, "error_estimate": s.error_estimate} for s in sojourns],
        "norm_drift": traj.norm_drift,
    }
    artifacts.append(write_json(ctx.out / "summary.json", summary))
    if ctx.figures:
        from .plotting import wavepacket_figure

        artifacts.append(wavepacket_figure(traj.times, P_R, R_values, x, traj.densities[0], traj.densities[-1],
                                           evaluate_potential(spec, x), ctx.out / "wavepacket.png"))
    return Outcome(summary, checks, artifacts)


def run_verify(ctx: Context) -> Outcome:
    cfg = ctx.cfg
    spec, units, tol = cfg.barrier, cfg.units, cfg.tolerances
    v = {"n_random": 10, "n_energies": 20, "n_delay_energies": 10, **cfg.block("verify", {})}
    corpus = random_barriers(ctx.seed, v["n_random"])
    checks: list[CheckResult] = []
    energies = cfg.energies.array if "energies" in cfg.raw else np.linspace(0.05, 4.0, 100) * spec.v0
    energies = energies[np.abs(energies - spec.v0) > 1e-9 * spec.v0]

    checks += [CheckResult(f"config barrier: {c.name}", c.value, c.tolerance, c.passed, c.asserted, c.detail)
               for c in unitarity_symmetry_phase([spec], ctx.seed, v["n_energies"], units,
                                                 tol["unitarity"], tol["phase"])]
    if corpus:
        checks += [CheckResult(f"random corpus: {c.name}", c.value, c.tolerance, c.passed, c.asserted, c.detail)
                   for c in unitarity_symmetry_phase(corpus, ctx.seed + 1, v["n_energies"], units,
                                                     tol["unitarity"], tol["phase"], ctx.executor)]
        checks.append(delay_identity_symmetric(corpus, ctx.seed + 2, v["n_delay_energies"], units, tol["delay"],
                                               ctx.executor))
        checks.append(delay_identity_asymmetric(ctx.seed + 3, min(5, v["n_random"]), v["n_delay_energies"],
                                                units, tol["delay"]))
    if spec.b == 0:
        checks += rectangular_oracle(spec, energies, units, tol["oracle"])
        E = 0.5 * spec.v0
        cl = classical_reflection_delay(spec, E, units)
        checks.append(check_at_most("sharp-wall classical limit", abs(cl.tau_cl + 2.0 * spec.a / float(units.speed(E))), 0.0))
    else:
        d = onshell_delays(spec, 0.5 * spec.v0, units)
        res = verify_delay_identity(d)
        checks.append(check_at_most("config barrier: delay identity", abs(res), identity_tolerance(d, tol["delay"])))
    rng = np.random.default_rng(ctx.seed + 4)
    worst = 0.0
    for _ in range(10):
        v0, b = float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.1, 3.0))
        E = float(rng.uniform(0.05, 0.95)) * v0
        r = classical_reflection_delay(BarrierSpec(v0, 1.0, b, "linear"), E, units)
        worst = max(worst, abs(r.transition_term - linear_ramp_transition_term(v0, b, E, units)))
    checks.append(check_at_most("linear-ramp classical closed form", worst, tol["quadrature"]))

    rows = [(c.name, c.value, c.tolerance, c.passed, c.asserted) for c in checks]
    artifacts = [write_csv(ctx.out / "verify.csv", ["check", "value", "tolerance", "passed", "asserted"], rows)]
    return Outcome({"seed": ctx.seed, "n_checks": len(checks)}, checks, artifacts)


RUNNERS = {
    "amplitudes": run_amplitudes,
    "delays": run_delays,
    "hartman": run_hartman,
    "classical": run_classical,
    "semiclassical": run_semiclassical,
    "wavepacket": run_wavepacket,
    "verify": run_verify,
}

DESCRIPTIONS = {
    "amplitudes": "scattering amplitudes over an energy grid",
    "delays": "phase-time delays and the transmission/reflection identity",
    "hartman": "transmission delay against plateau width",
    "classical": "classical reflection delay",
    "semiclassical": "quantum against classical reflection delay as lambda/b shrinks",
    "wavepacket": "wave-packet simulation: probabilities, sojourn and centroid delays",
    "verify": "invariant suite on a bundled or given barrier",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tunnellab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=DESCRIPTIONS[name])
        p.add_argument("--config", type=Path, help="JSON config (default: the bundled example)")
        p.add_argument("--out", type=Path, help="output directory (default: config output.dir or ./tunnellab-<subcommand>)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps (default 1)")
        p.add_argument("--seed", type=int, default=None, help="seed for random-spec property runs")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    name = args.subcommand
    path = args.config or bundled_config_path(name)
    try:
        cfg = RunConfig.load(path, name)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or cfg.out_dir or f"tunnellab-{name}")
    seed = args.seed if args.seed is not None else int(cfg.block("seed", 0))
    pool = ThreadPoolExecutor(max_workers=args.threads) if args.threads > 1 else nullcontext()
    try:
        with pool as executor:
            ctx = Context(cfg, out, seed, executor, cfg.figures and not args.no_figures)
            outcome = RUNNERS[name](ctx)
    except PhysicsDomainError as exc:
        module = type(exc).__module__
        print(f"physics-domain error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        write_json(out / "report.json", build_report(name, cfg.raw, {"error": str(exc), "error_type":
                                                                     type(exc).__name__, "module": module},
                                                     cfg.tolerances, []))
        return EXIT_DOMAIN

    report = build_report(name, cfg.raw, outcome.results, cfg.tolerances, outcome.checks,
                          [str(p) for p in outcome.artifacts])
    write_json(out / "report.json", report)
    for c in outcome.checks:
        print(c.line())
    failed = [c.name for c in outcome.checks if c.asserted and not c.passed]
    if failed:
        print(f"failed check(s): {'; '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print(f"{name}: all checks passed; outputs in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
