"""Pipeline orchestration: spectrum -> hopping -> dimer -> gpe.

Each stage writes delimited datasets (CSV for tables, JSON for metadata,
raw float64 for fields) into the output directory and caches the expensive
intermediates keyed by a hash of the producing config fragment.  Exit
codes: 0 success, 2 config error, 3 numerical failure, 4 failed --check.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dimer as dm
from . import gpe as gp
from .config import ConfigError, RunConfig, load_config
from .dataset import DatasetWriter, fmt17, load_if_fresh, write_csv
from .hopping import HoppingTensors, build_pair_tensors, sparsify
from .potential import PotentialSpec, make_grid, sample_potential
from .spectrum import SpectrumResult, EigenMode, compute_spectrum

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4


def _spec_and_grid(cfg: RunConfig):
    spec = PotentialSpec.golden(
        cfg.potential.n, cfg.potential.V1, cfg.potential.V2, cfg.potential.theta
    )
    grid = make_grid(spec, cfg.spectral.grid_points)
    return spec, grid


def _spectrum_from_cache(cfg: RunConfig, out: Path) -> SpectrumResult:
    cache_dir = out / "cache" / "spectrum"
    payload = cfg.spectrum_payload()
    spec, grid = _spec_and_grid(cfg)
    reader = load_if_fresh(cache_dir, payload)
    if reader is not None:
        meta = reader.meta
        energies = reader.array("energies")
        iprs = reader.array("iprs")
        coms = reader.array("coms")
        samples = reader.array("mode_samples")
        flags = reader.array("com_reliable").astype(bool)
        residuals = reader.array("imag_residuals")
        M = int(meta["M"])
        modes = [
            EigenMode(
                j=i + 1,
                energy=float(energies[i]),
                samples=samples[:, i],
                ipr=float(iprs[i]),
                com=float(coms[i]),
                localized=i < M,
                imag_residual=float(residuals[i]),
                com_reliable=bool(flags[i]),
            )
            for i in range(energies.size)
        ]
        return SpectrumResult(
            spec=spec,
            grid=grid,
            modes=modes,
            M=M,
            mobility_edge=meta["mobility_edge"],
            first_extended_energy=meta["first_extended_energy"],
            extended_coupling_estimate=meta["extended_coupling_estimate"],
        )
    result = compute_spectrum(
        spec, grid, cfg.spectral.cutoff, cfg.spectral.count, cfg.spectral.ipr_threshold
    )
    writer = DatasetWriter(cache_dir, payload)
    writer.add_array("energies", result.energies)
    writer.add_array("iprs", np.array([m.ipr for m in result.modes]))
    writer.add_array("coms", np.array([m.com for m in result.modes]))
    writer.add_array("imag_residuals", np.array([m.imag_residual for m in result.modes]))
    writer.add_array("com_reliable", np.array([m.com_reliable for m in result.modes], dtype=float))
    writer.add_array("mode_samples", np.column_stack([m.samples for m in result.modes]))
    writer.add_meta(
        M=result.M,
        mobility_edge=result.mobility_edge,
        first_extended_energy=result.first_extended_energy,
        extended_coupling_estimate=result.extended_coupling_estimate,
        parameters={
            **payload,
            "p": spec.p,
            "q": spec.q,
            "L": spec.L,
        },
    )
    writer.finalize()
    return result


def _tensors_from_cache(cfg: RunConfig, out: Path, spectrum: SpectrumResult) -> HoppingTensors:
    cache_dir = out / "cache" / "hopping"
    payload = cfg.hopping_payload()
    reader = load_if_fresh(cache_dir, payload)
    if reader is not None:
        return HoppingTensors(
            g=float(reader.meta["g"]),
            chi_diag=reader.array("chi_diag"),
            chi_pair=reader.array("chi_pair"),
            chi_tilde=reader.array("chi_tilde"),
        )
    tensors = build_pair_tensors(spectrum, cfg.g)
    writer = DatasetWriter(cache_dir, payload)
    writer.add_array("chi_diag", tensors.chi_diag)
    writer.add_array("chi_pair", tensors.chi_pair)
    writer.add_array("chi_tilde", tensors.chi_tilde)
    writer.add_meta(g=cfg.g, M=tensors.M)
    writer.finalize()
    return tensors


def cmd_spectrum(cfg: RunConfig, out: Path) -> dict:
    result = _spectrum_from_cache(cfg, out)
    rows = [
        (m.j, m.energy, m.ipr, m.com, int(m.localized))
        for m in result.modes
    ]
    write_csv(
        out / "modes.csv",
        ["j", "energy", "ipr", "com", "localized"],
        [(str(j), e, i, c, str(f)) for j, e, i, c, f in rows],
    )
    me = result.mobility_edge
    fee = result.first_extended_energy
    print(
        f"M={result.M} mobility_edge={fmt17(me) if me is not None else 'n/a'} "
        f"first_extended={fmt17(fee) if fee is not None else 'n/a'} "
        f"extended_coupling~{result.extended_coupling_estimate:.4f}"
    )
    return {
        "M": result.M,
        "mobility_edge": me,
        "first_extended_energy": fee,
        "extended_coupling_estimate": result.extended_coupling_estimate,
    }


def cmd_dimer(cfg: RunConfig, out: Path) -> dict:
    spectrum = _spectrum_from_cache(cfg, out)
    tensors = _tensors_from_cache(cfg, out, spectrum)
    j, k = cfg.pair
    for label in (j, k):
        if not spectrum.mode(label).localized:
            raise ValueError(f"pair mode {label} is not localized")
    summary: dict = {"pair": [j, k], "N_th": {}, "fixed_points": {}, "eq12": {}}
    dimer_dir = out / "dimer"
    dimer_dir.mkdir(parents=True, exist_ok=True)
    for g in (-1.0, 1.0):
        gtag = "gm1" if g < 0 else "gp1"
        tens_g = tensors.with_sign(g)
        base = dm.dimer_params(j, k, spectrum, tens_g, N=1.0)
        branches = dm.trace_families(base, z_resolution=cfg.dimer.z_resolution)
        rows = []
        for bi, br in enumerate(branches):
            for i in range(br.z.size):
                rows.append(
                    (str(bi), str(br.sigma), br.z[i], br.N[i], br.mu[i],
                     str(int(br.stable[i])), br.branch_kind)
                )
        write_csv(
            dimer_dir / f"families_{gtag}.csv",
            ["branch", "sigma", "z", "N", "mu", "stable", "kind"],
            rows,
        )
        uppers = [b.N_th for b in branches if b.branch_kind == "upper" and b.N_th]
        summary["N_th"][gtag] = min(uppers) if uppers else None
        summary["fixed_points"][gtag] = {}
        summary["eq12"][gtag] = {}
        for N in cfg.dimer.N_values:
            p = base.with_N(N)
            fps = dm.fixed_points(p)
            fp_payload = [
                {"z": fp.z, "phi": fp.phi, "sigma": fp.sigma, "kind": fp.kind}
                for fp in fps
            ]
            (dimer_dir / f"fixed_points_{gtag}_N{N:g}.json").write_text(
                json.dumps(fp_payload, indent=2) + "\n"
            )
            summary["fixed_points"][gtag][f"N={N:g}"] = fp_payload
            summary["eq12"][gtag][f"N={N:g}"] = dm.eq12_comparison(p)
            phis, zs, H = dm.phase_portrait(
                p, cfg.dimer.portrait_points, cfg.dimer.portrait_points
            )
            grid_rows = []
            for zi in range(zs.size):
                for pi in range(phis.size):
                    grid_rows.append((phis[pi], zs[zi], H[zi, pi]))
            write_csv(dimer_dir / f"portrait_{gtag}_N{N:g}.csv", ["phi", "z", "H"], grid_rows)
            _write_orbits(dimer_dir / f"orbits_{gtag}_N{N:g}.csv", p, fps)
    print(
        "N_th:",
        ", ".join(
            f"{k2}={fmt17(v) if v else 'none'}" for k2, v in summary["N_th"].items()
        ),
    )
    return summary


def _write_orbits(path: Path, p: dm.DimerParams, fps: list[dm.FixedPoint]) -> None:
    """Sample orbits: small loops around each center plus two rotations."""
    starts = []
    for fp in fps:
        if fp.kind == "center":
            starts.append((min(fp.z + 0.1, 0.98), fp.phi))
    starts += [(0.0, np.pi / 2), (0.0, -np.pi / 2)]
    rows = []
    for idx, (z0, phi0) in enumerate(starts):
        try:
            traj = dm.integrate_dimer(
                dm.DimerState(z=z0, phi=phi0), p, tau_end=8.0, dtau=1e-3, stride=20
            )
        except FloatingPointError:
            continue
        for i in range(traj.taus.size):
            rows.append((str(idx), traj.taus[i], traj.z[i], traj.phi[i]))
    write_csv(path, ["orbit", "tau", "z", "phi"], rows)


def cmd_gpe(cfg: RunConfig, out: Path, seed_override: int | None = None) -> dict:
    spectrum = _spectrum_from_cache(cfg, out)
    j, k = cfg.pair
    windows = gp.WindowSet.around_pair(spectrum, j, k, cfg.gpe.window_factor)
    V = sample_potential(spectrum.spec, spectrum.grid.x)
    seed = cfg.gpe.seed if seed_override is None else seed_override
    summary: dict = {}
    for run in cfg.gpe.runs:
        label = run.label()
        run_dir = out / f"run-{label}"
        run_dir.mkdir(parents=True, exist_ok=True)
        field = gp.init_two_mode(
            run.N, run.z0, run.phi0,
            spectrum.mode(j).samples, spectrum.mode(k).samples,
            spectrum.grid, g=run.g,
        )
        field = gp.add_noise(field, cfg.gpe.noise_fraction, seed)
        observer = gp.PairObserver(spectrum, j, k, windows)
        try:
            rec = gp.evolve(
                field, V, run.T_end, cfg.gpe.dt, observer,
                cfg.gpe.scalar_stride, cfg.gpe.snapshot_stride,
            )
        except gp.EvolutionDiverged as err:
            _write_run(run_dir, err.record, run, spectrum)
            raise
        _write_run(run_dir, rec, run, spectrum)
        osc = gp.oscillation_period(rec.asarray("times"), rec.asarray("window_imbalance"))
        win_min = float(np.min(rec.asarray("window_fraction")))
        leak_max = float(np.max(rec.asarray("leakage")))
        peaks = rec.asarray("peak_density")
        stats = {
            "T_osc": osc[0] if osc else None,
            "T_osc_spread": osc[1] if osc else None,
            "T_osc_rescaled": abs(osc[0]) * run.N * _pair_coupling(spectrum, j, k) if osc else None,
            "window_fraction_min": win_min,
            "leakage_max_fraction": leak_max / run.N,
            "peak_density_ratio": float(peaks[-1] / peaks[0]),
        }
        summary[label] = stats
        if osc:
            print(f"{label}: T_osc={osc[0]:.2f}+-{osc[1]:.2f} window_min={win_min:.3f}")
        else:
            print(f"{label}: no period detected / quasi-stationary; "
                  f"window_min={win_min:.3f}")
    return summary


def _pair_coupling(spectrum: SpectrumResult, j: int, k: int) -> float:
    dx = spectrum.grid.dx
    return float(
        np.sum(spectrum.mode(j).samples ** 2 * spectrum.mode(k).samples ** 2) * dx
    )


def _write_run(run_dir: Path, rec: gp.TrajectoryRecord, run, spectrum: SpectrumResult) -> None:
    header = [
        "t", "z", "pop_j", "pop_k", "window_imbalance", "window_fraction",
        "norm", "energy", "leakage", "peak_density",
    ]
    rows = list(
        zip(
            rec.times, rec.z, rec.pop_j, rec.pop_k, rec.window_imbalance,
            rec.window_fraction, rec.norm, rec.total_energy, rec.leakage,
            rec.peak_density,
        )
    )
    write_csv(run_dir / "scalars.csv", header, rows)
    snap_index = []
    for i, (t, snap) in enumerate(zip(rec.snapshot_times, rec.snapshots)):
        fname = f"snap-{i:06d}.bin"
        raw = np.empty((snap.size, 2), dtype="<f8")
        raw[:, 0] = snap.real
        raw[:, 1] = snap.imag
        raw.tofile(run_dir / fname)
        snap_index.append({"index": i, "t": t, "file": fname})
    (run_dir / "snapshots.json").write_text(
        json.dumps(
            {
                "grid_points": spectrum.grid.points,
                "dx": spectrum.grid.dx,
                "x0": float(spectrum.grid.x[0]),
                "g": run.g,
                "N": run.N,
                "z0": run.z0,
                "phi0": run.phi0,
                "truncated": rec.truncated,
                "snapshots": snap_index,
            },
            indent=2,
        )
        + "\n"
    )


# acceptance bands checked by --check (reference configuration only)
_CHECK_BANDS = {
    "M": (89, 89),
    "mobility_edge": (0.9230, 0.9430),
    "first_extended_energy": (2.131, 2.231),
    "eps_j": (-0.800, -0.780),
    "eps_k": (-0.657, -0.637),
    "ipr_j": (0.579, 0.599),
    "ipr_k": (0.557, 0.577),
    "N_th_gm1": (0.386, 0.446),
    "N_th_gp1": (0.371, 0.431),
}

# per-run bands for the reference gpe cases, keyed by run label
_GPE_CHECK_BANDS = {
    "gm1-N0.3-z0-phi3.142": ("T_osc", 40.0, 60.0),
    "gm1-N2-z0.451-phi0": ("T_osc_rescaled", 3.5, 6.5),
    "gp1-N2-z0.7886-phi3.142": ("window_fraction_min", 0.9, 1.01),
    "gp1-N8-z0.7886-phi3.142": ("peak_density_ratio", 0.0, 0.5),
}


def _run_check(summary: dict) -> list[str]:
    failures = []

    def check(name, value):
        lo, hi = _CHECK_BANDS[name]
        if value is None or not (lo <= value <= hi):
            failures.append(f"{name}={value} outside [{lo}, {hi}]")

    spec_sum = summary.get("spectrum", {})
    check("M", spec_sum.get("M"))
    check("mobility_edge", spec_sum.get("mobility_edge"))
    check("first_extended_energy", spec_sum.get("first_extended_energy"))
    pair_sum = summary.get("pair_values", {})
    check("eps_j", pair_sum.get("eps_j"))
    check("eps_k", pair_sum.get("eps_k"))
    check("ipr_j", pair_sum.get("ipr_j"))
    check("ipr_k", pair_sum.get("ipr_k"))
    dimer_sum = summary.get("dimer", {})
    check("N_th_gm1", dimer_sum.get("N_th", {}).get("gm1"))
    check("N_th_gp1", dimer_sum.get("N_th", {}).get("gp1"))
    for label, stats in summary.get("gpe", {}).items():
        if label not in _GPE_CHECK_BANDS:
            continue
        name, lo, hi = _GPE_CHECK_BANDS[label]
        value = stats.get(name)
        if value is None or not (lo <= value <= hi):
            failures.append(f"{label}: {name}={value} outside [{lo}, {hi}]")
    return failures


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpbec",
        description="Quasi-periodic BEC mode-lattice pipeline",
    )
    parser.add_argument("--config", help="JSON config path (defaults built in)")
    parser.add_argument(
        "--stage",
        default="pipeline",
        choices=["spectrum", "dimer", "gpe", "pipeline"],
    )
    parser.add_argument("--check", action="store_true",
                        help="verify reference values after the pipeline")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate config and show the plan only")
    parser.add_argument("--seed", type=int, default=None, help="override gpe seed")
    parser.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("QPBEC_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        build_parser().print_usage(sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(cfg.output)
    stages = [args.stage] if args.stage != "pipeline" else ["spectrum", "dimer", "gpe"]
    if args.dry_run:
        print(f"config ok; output -> {out}; planned stages: {', '.join(stages)}")
        return EXIT_OK

    summary: dict = {}
    try:
        for stage in stages:
            if stage == "spectrum":
                summary["spectrum"] = cmd_spectrum(cfg, out)
            elif stage == "dimer":
                summary["dimer"] = cmd_dimer(cfg, out)
                summary["pair_values"] = _pair_summary(cfg, out)
            elif stage == "gpe":
                summary["gpe"] = cmd_gpe(cfg, out, args.seed)
    except (ConfigError, ValueError) as err:
        print(f"{stage} stage rejected: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, RuntimeError) as err:
        print(f"{stage} stage failed numerically: {err}", file=sys.stderr)
        return EXIT_NUMERICAL

    if args.stage == "pipeline":
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.check:
        failures = _run_check(summary)
        if failures:
            for f in failures:
                print(f"check failed: {f}", file=sys.stderr)
            return EXIT_CHECK
        print("all reference checks passed")
    return EXIT_OK


def _pair_summary(cfg: RunConfig, out: Path) -> dict:
    spectrum = _spectrum_from_cache(cfg, out)
    j, k = cfg.pair
    return {
        "eps_j": spectrum.mode(j).energy,
        "eps_k": spectrum.mode(k).energy,
        "ipr_j": spectrum.mode(j).ipr,
        "ipr_k": spectrum.mode(k).ipr,
    }


if __name__ == "__main__":
    sys.exit(main())
