"""PNG figures for experiment results (optional; only used with ``--figures``)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_spectrum(spec, path: Path, title: str = "") -> Path:
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    top.plot(spec.delta_p, spec.transmission, "k-", label="master equation")
    top.plot(spec.delta_p, spec.classical, "C0--", label="linearized")
    top.plot(spec.delta_p, spec.modified_classical, "C1:", label="linearized, Franck-Condon corrected")
    top.set_ylabel(r"$|\delta\tilde a|^2$")
    top.legend(fontsize=8)
    if title:
        top.set_title(title)
    if spec.signal is not None:
        bottom.plot(spec.delta_p, spec.signal, "k-")
    bottom.set_xlabel(r"$\Delta_p/\Omega$")
    bottom.set_ylabel("OMIT signal")
    return _save(fig, path)


def plot_crossover(res, path: Path) -> Path:
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    for ratio, spec in res.entries:
        left.plot(spec.delta_p, spec.signal, label=f"g0/kappa = {ratio:g}")
    left.set_xlabel(r"$\Delta_p/\Omega$")
    left.set_ylabel("OMIT signal")
    left.legend(fontsize=8)
    ratios = [r for r, _ in res.entries]
    right.loglog(ratios, res.amplitudes(), "ko-")
    right.set_xlabel(r"$g_0/\kappa$")
    right.set_ylabel("Fano amplitude")
    return _save(fig, path)


def plot_temperature(res, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([n for n, _ in res.entries], res.amplitudes, "ko-")
    ax.set_xlabel(r"$n_{th}$")
    ax.set_ylabel("Fano amplitude")
    return _save(fig, path)


def plot_transistor(res, path: Path) -> Path:
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    top.plot(res.times, res.transmission, "k-", lw=0.8)
    top.set_ylabel(r"$|\delta\tilde a|^2$")
    for (n_a, n_b), values in sorted(res.populations.items()):
        bottom.semilogy(res.population_times, values + 1e-300, lw=0.6, label=f"p{n_a}{n_b}")
    bottom.set_xlabel(r"$\Omega t$")
    bottom.set_ylabel("polaron population")
    bottom.legend(fontsize=8, ncol=3)
    return _save(fig, path)


def render(experiment: str, results: dict, out_dir) -> list:
    """Write the figures for one experiment's results; returns the paths."""
    out = Path(out_dir)
    paths = []
    if "spectrum" in results:
        paths.append(plot_spectrum(results["spectrum"], out / "spectrum.png", experiment))
    if "crossover" in results:
        res = results["crossover"]
        paths.append(plot_crossover(res, out / "crossover.png"))
    if "temperature" in results:
        paths.append(plot_temperature(results["temperature"], out / "fano_vs_temperature.png"))
    if "transistor" in results:
        paths.append(plot_transistor(results["transistor"], out / "transistor.png"))
    return paths
