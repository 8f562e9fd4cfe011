"""Render figure files from a qpbec pipeline output directory.

Usage: qpbec-render <dataset-dir> <kind> <out.png>

Kinds: mode-map, tensor-heatmap, families, portrait, density-carpet,
current-carpet.  Only the documented dataset files are read (CSV tables,
JSON manifests, raw little-endian float64 arrays); rendering never mutates
the dataset.  Output is deterministic for identical input.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVEFIG = dict(dpi=150, metadata={"Software": "qpbec-plots"})


class DatasetError(RuntimeError):
    """Missing or malformed dataset content."""


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    if not path.exists():
        raise DatasetError(f"missing dataset file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DatasetError(f"empty dataset file: {path}")
        rows = list(reader)
    if not rows:
        raise DatasetError(f"no data rows in {path}")
    cols = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            cols[name].append(cell)
    out = {}
    for name, cells in cols.items():
        try:
            out[name] = np.array([float(c) for c in cells])
        except ValueError:
            out[name] = np.array(cells)
    return out


def _require(cols: dict, names: list[str], path: Path):
    missing = [n for n in names if n not in cols]
    if missing:
        raise DatasetError(f"{path} lacks required columns {missing}")


def _load_raw(path: Path, shape) -> np.ndarray:
    if not path.exists():
        raise DatasetError(f"missing array file: {path}")
    return np.fromfile(path, dtype="<f8").reshape(shape)


def render_mode_map(dataset: Path, out: Path):
    """Center of mass vs energy for every computed mode."""
    cols = _read_csv(dataset / "modes.csv")
    _require(cols, ["j", "energy", "ipr", "com", "localized"], dataset / "modes.csv")
    loc = cols["localized"].astype(bool)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(cols["com"][loc], cols["energy"][loc], s=22,
               facecolors="none", edgecolors="tab:blue", label="localized")
    if np.any(~loc):
        ax.scatter(cols["com"][~loc], cols["energy"][~loc], s=22, marker="x",
                   color="tab:gray", label="extended")
    ax.set_xlabel("center of mass X_j")
    ax.set_ylabel("energy")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, **_SAVEFIG)
    plt.close(fig)


def render_tensor_heatmap(dataset: Path, out: Path):
    """Pair-coupling matrices: asymmetric (left) and symmetric (right)."""
    cache = dataset / "cache" / "hopping"
    manifest_path = cache / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"missing hopping cache manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    arrays = manifest["arrays"]
    tilde = _load_raw(cache / arrays["chi_tilde"]["file"], arrays["chi_tilde"]["shape"])
    pair = _load_raw(cache / arrays["chi_pair"]["file"], arrays["chi_pair"]["shape"])
    M = pair.shape[0]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    extent = (1, M, 1, M)
    for ax, mat, title in ((axes[0], tilde, "asymmetric couplings"),
                           (axes[1], pair, "symmetric couplings")):
        im = ax.imshow(np.abs(mat), origin="lower", extent=extent, cmap="magma",
                       interpolation="nearest")
        ax.set_title(title, fontsize=10)
        ax.set_xlabel("mode k")
        ax.set_ylabel("mode j")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(out, **_SAVEFIG)
    plt.close(fig)


_BRANCH_STYLE = {
    "linear-limit": ("tab:green", "tab:blue"),
    "upper": ("tab:red", "tab:red"),
}


def render_families(dataset: Path, out: Path):
    """N(mu) and N(z) stationary families, one row per interaction sign."""
    files = sorted((dataset / "dimer").glob("families_*.csv"))
    if not files:
        raise DatasetError(f"no families_*.csv under {dataset / 'dimer'}")
    fig, axes = plt.subplots(len(files), 2, figsize=(9, 3.6 * len(files)),
                             squeeze=False)
    for row, path in enumerate(files):
        cols = _read_csv(path)
        _require(cols, ["branch", "sigma", "z", "N", "mu", "stable", "kind"], path)
        sign_label = "attractive" if "gm1" in path.stem else "repulsive"
        ax_mu, ax_z = axes[row]
        linear_seen = 0
        for branch_id in sorted(set(cols["branch"].astype(int))):
            mask = cols["branch"].astype(int) == branch_id
            kind = cols["kind"][mask][0]
            if kind == "linear-limit":
                color = _BRANCH_STYLE[kind][linear_seen % 2]
                linear_seen += 1
            else:
                color = _BRANCH_STYLE[kind][0]
            z, N, mu = cols["z"][mask], cols["N"][mask], cols["mu"][mask]
            keep = N <= 3.0
            ax_mu.plot(mu[keep], N[keep], color=color, lw=1.2)
            ax_z.plot(z[keep], N[keep], color=color, lw=1.2)
            if kind == "upper":
                # the ends of an upper branch run off to divergent N
                for z_edge in (z[0], z[-1]):
                    ax_z.axvline(z_edge, color="k", ls="--", lw=0.7)
        ax_mu.set_xlabel("chemical potential")
        ax_mu.set_ylabel(f"N ({sign_label})")
        ax_z.set_xlabel("population imbalance z")
        ax_z.set_ylabel("N")
        ax_z.set_xlim(-1, 1)
        for ax in (ax_mu, ax_z):
            ax.set_ylim(0, 3.0)
    fig.tight_layout()
    fig.savefig(out, **_SAVEFIG)
    plt.close(fig)


def render_portrait(dataset: Path, out: Path):
    """Hamiltonian level sets with fixed points and sample orbits."""
    files = sorted((dataset / "dimer").glob("portrait_*.csv"))
    if not files:
        raise DatasetError(f"no portrait_*.csv under {dataset / 'dimer'}")
    ncols = 2
    nrows = (len(files) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(9, 3.8 * nrows), squeeze=False)
    for i, path in enumerate(files):
        ax = axes[i // ncols][i % ncols]
        cols = _read_csv(path)
        _require(cols, ["phi", "z", "H"], path)
        phi = np.unique(cols["phi"])
        z = np.unique(cols["z"])
        H = cols["H"].reshape(z.size, phi.size)
        ax.contour(phi, z, H, levels=30, linewidths=0.6, cmap="viridis")
        tag = path.stem.replace("portrait_", "")
        orbit_path = path.with_name(f"orbits_{tag}.csv")
        if orbit_path.exists():
            orb = _read_csv(orbit_path)
            for orbit_id in sorted(set(orb["orbit"].astype(int))):
                mask = orb["orbit"].astype(int) == orbit_id
                ax.plot(np.mod(orb["phi"][mask] + np.pi, 2 * np.pi) - np.pi,
                        orb["z"][mask], ".", ms=0.8, color="tab:orange")
        fp_path = path.with_name(f"fixed_points_{tag}.json")
        if fp_path.exists():
            for fp in json.loads(fp_path.read_text()):
                marker = "o" if fp["kind"] == "center" else "X"
                for phi0 in {fp["phi"], -fp["phi"]}:
                    ax.plot(phi0, fp["z"], marker, color="red", ms=7, mew=1.2,
                            mfc="none")
        ax.set_title(tag, fontsize=9)
        ax.set_xlabel("phase mismatch phi")
        ax.set_ylabel("imbalance z")
        ax.set_xlim(-np.pi, np.pi)
        ax.set_ylim(-1, 1)
    for i in range(len(files), nrows * ncols):
        axes[i // ncols][i % ncols].axis("off")
    fig.tight_layout()
    fig.savefig(out, **_SAVEFIG)
    plt.close(fig)


def _iter_runs(dataset: Path):
    runs = sorted(p for p in dataset.glob("run-*") if (p / "snapshots.json").exists())
    if not runs:
        raise DatasetError(f"no run-*/snapshots.json under {dataset}")
    return runs


def _load_snapshots(run_dir: Path):
    info = json.loads((run_dir / "snapshots.json").read_text())
    points = int(info["grid_points"])
    x = info["x0"] + info["dx"] * np.arange(points)
    times, fields = [], []
    for snap in info["snapshots"]:
        raw = _load_raw(run_dir / snap["file"], (points, 2))
        times.append(snap["t"])
        fields.append(raw[:, 0] + 1j * raw[:, 1])
    return info, x, np.array(times), np.array(fields)


def _carpet(dataset: Path, out: Path, quantity: str):
    runs = _iter_runs(dataset)
    fig, axes = plt.subplots(len(runs), 1, figsize=(7, 2.8 * len(runs)),
                             squeeze=False)
    for i, run_dir in enumerate(runs):
        info, x, times, fields = _load_snapshots(run_dir)
        if quantity == "density":
            data = np.abs(fields) ** 2
            cmap, label = "inferno", "density"
        else:
            k = 2 * np.pi * np.fft.fftfreq(x.size, d=info["dx"])
            dpsi = np.fft.ifft(1j * k * np.fft.fft(fields, axis=1), axis=1)
            data = np.imag(np.conj(fields) * dpsi)
            cmap, label = "RdBu_r", "current"
        ax = axes[i][0]
        span = max(abs(float(data.min())), abs(float(data.max()))) or 1.0
        kwargs = {"vmin": -span, "vmax": span} if quantity == "current" else {}
        im = ax.pcolormesh(times, x, data.T, cmap=cmap, shading="nearest", **kwargs)
        ax.set_ylabel("x")
        ax.set_xlabel("t")
        ax.set_title(run_dir.name, fontsize=9)
        # focus on the populated region, not the whole approximant cell
        weight = np.abs(fields[0]) ** 2
        center = float(np.sum(weight * x) / np.sum(weight))
        ax.set_ylim(center - 15, center + 15)
        fig.colorbar(im, ax=ax, label=label, fraction=0.046)
    fig.tight_layout()
    fig.savefig(out, **_SAVEFIG)
    plt.close(fig)


def render_density_carpet(dataset: Path, out: Path):
    _carpet(dataset, out, "density")


def render_current_carpet(dataset: Path, out: Path):
    _carpet(dataset, out, "current")


FIGURE_KINDS = {
    "mode-map": render_mode_map,
    "tensor-heatmap": render_tensor_heatmap,
    "families": render_families,
    "portrait": render_portrait,
    "density-carpet": render_density_carpet,
    "current-carpet": render_current_carpet,
}


def render(dataset_dir: str | Path, kind: str, out_path: str | Path):
    if kind not in FIGURE_KINDS:
        raise DatasetError(
            f"unknown figure kind {kind!r}; choose from {sorted(FIGURE_KINDS)}"
        )
    dataset = Path(dataset_dir)
    if not dataset.is_dir():
        raise DatasetError(f"dataset directory not found: {dataset}")
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    FIGURE_KINDS[kind](dataset, out)
    return out


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 3:
        print("usage: qpbec-render <dataset-dir> <kind> <out.png>", file=sys.stderr)
        print(f"kinds: {', '.join(sorted(FIGURE_KINDS))}", file=sys.stderr)
        return 2
    try:
        render(args[0], args[1], args[2])
    except DatasetError as err:
        print(f"render failed: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
