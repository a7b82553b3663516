"""PNG figures for the CLI outputs (non-interactive Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SCHEME_STYLE = {"TP": dict(color="tab:red", ls="--"), "STATP": dict(color="tab:blue", ls="-")}
DPI = 120


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)


def plot_bloch(trajectories: dict, path, n_curves: int = 4):
    """Pauli expectations against t/T for a few momenta, one row per scheme."""
    fig, axes = plt.subplots(len(trajectories), 3, figsize=(11, 3.2 * len(trajectories)), squeeze=False)
    for row, (scheme, g) in zip(axes, trajectories.items()):
        period = g.t[-1]
        picks = np.linspace(0, len(g.k) - 1, n_curves).astype(int)
        for j, label in enumerate(("x", "y", "z")):
            ax = row[j]
            for i in picks:
                ax.plot(g.t / period, g.sigma[i, :, j], lw=1, label=f"k={g.k[i]:.2f}")
            ax.set_xlabel("t / T")
            ax.set_ylabel(rf"$\langle\sigma_{label}\rangle$")
            ax.set_title(scheme)
        row[0].legend(fontsize=7)
    _save(fig, path)


def plot_shift(k, y_by_scheme: dict, t_frac, ybar_by_scheme: dict, path):
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 3.6))
    for scheme, y in y_by_scheme.items():
        a.plot(k, y, label=scheme, **SCHEME_STYLE.get(scheme, {}))
    a.set_xlabel("k")
    a.set_ylabel("y(k, T)")
    a.legend()
    for scheme, yb in ybar_by_scheme.items():
        b.plot(t_frac, yb, label=scheme, **SCHEME_STYLE.get(scheme, {}))
    b.set_xlabel("t / T")
    b.set_ylabel(r"$\bar y(t)$")
    b.legend()
    _save(fig, path)


def plot_sweep(results, path):
    fig, ax = plt.subplots(figsize=(6, 3.8))
    for scheme in sorted({r.scheme for r in results}):
        rs = [r for r in results if r.scheme == scheme]
        ax.errorbar([r.omega for r in rs], [r.mean for r in rs], yerr=[r.std for r in rs],
                    marker="*" if scheme == "STATP" else "o", capsize=3, label=scheme,
                    color=SCHEME_STYLE.get(scheme, {}).get("color"))
    ax.set_xscale("log")
    ax.axhline(1.0, color="0.6", lw=0.8)
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel(r"$\bar y(T)$  (mean $\pm 1\sigma$)")
    ax.legend()
    _save(fig, path)


def plot_density(t_frac, density, dX_over_d, dW, path, title=""):
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 3.8), gridspec_kw=dict(width_ratios=[1.3, 1]))
    n_sites = density.shape[1]
    im = a.imshow(density.T, origin="lower", aspect="auto", cmap="viridis",
                  extent=(t_frac[0], t_frac[-1], -0.5, n_sites - 0.5))
    fig.colorbar(im, ax=a, label=r"$|\psi_l|^2$")
    a.set_xlabel("t / T")
    a.set_ylabel("site l")
    a.set_title(title)
    b.plot(t_frac, dX_over_d, label=r"$\Delta X / d$")
    b.plot(t_frac, dW, label=r"$\Delta W$ (sites)")
    b.set_xlabel("t / T")
    b.legend()
    _save(fig, path)


def plot_pulses(sequences: dict, Delta: float, path):
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6), sharey=False)
    for scheme, seq in sequences.items():
        ms = seq.t_seconds * 1e3
        style = SCHEME_STYLE.get(scheme, {})
        axes[0].plot(ms, seq.Omega_s / Delta, color=style.get("color"), ls="-", label=rf"$\Omega_s$ {scheme}")
        axes[0].plot(ms, seq.Omega_p / Delta, color=style.get("color"), ls=":", label=rf"$\Omega_p$ {scheme}")
        axes[1].plot(ms, seq.phi_L, label=scheme, **style)
    axes[0].set_xlabel("t (ms)")
    axes[0].set_ylabel(r"$\Omega / \Delta$")
    axes[0].legend(fontsize=7)
    axes[1].set_xlabel("t (ms)")
    axes[1].set_ylabel(r"$\phi_L$ (rad)")
    axes[1].legend()
    _save(fig, path)
