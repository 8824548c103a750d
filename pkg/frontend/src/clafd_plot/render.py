"""Figure builders: one violin per method, stacked trace panels, sweep heatmap."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import read_summary, read_sweep, read_trace


def plot_violins(summary_csv, out_image) -> str:
    """Steps-to-decision violins per method, medians marked and printed."""
    rows = read_summary(summary_csv)
    methods = list(dict.fromkeys(r["method"] for r in rows))
    data = [[r["steps"] for r in rows if r["method"] == m] for m in methods]
    medians = [float(np.median(d)) for d in data]

    fig, ax = plt.subplots(figsize=(1.8 + 1.2 * len(methods), 4.2))
    parts = ax.violinplot(data, showmedians=True, showextrema=False)
    for body in parts["bodies"]:
        body.set_alpha(0.6)
    for i, med in enumerate(medians):
        ax.annotate(f"{med:g}", (i + 1, med), textcoords="offset points",
                    xytext=(6, 2), fontsize=9)
    ax.set_xticks(range(1, len(methods) + 1))
    ax.set_xticklabels(methods)
    ax.set_ylabel("measurements before decision")
    ax.set_title("steps to decision per design method")
    fig.tight_layout()
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    for m, med in zip(methods, medians):
        print(f"median[{m}] = {med!r}")
    return str(out_image)


def plot_trace(trace_csv, out_image, threshold: float = 0.98) -> str:
    """Applied inputs on top, belief trajectories below, decision marker at
    the first step where the largest belief crosses the threshold."""
    tr = read_trace(trace_csv)
    steps = np.asarray(tr["steps"])
    inputs = np.asarray(tr["inputs"])
    beliefs = np.asarray(tr["beliefs"])

    fig, (ax_u, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(7, 5.2))
    for j in range(inputs.shape[1]):
        ax_u.step(steps, inputs[:, j], where="post", label=f"u_{j}")
    ax_u.set_ylabel("input")
    ax_u.legend(loc="upper right", fontsize=8)

    for j in range(beliefs.shape[1]):
        ax_p.plot(steps, beliefs[:, j], label=f"P_{j}")
    ax_p.axhline(threshold, color="gray", linestyle=":", linewidth=1)
    crossing = np.flatnonzero(beliefs.max(axis=1) > threshold)
    if crossing.size:
        k = steps[crossing[0]]
        for ax in (ax_u, ax_p):
            ax.axvline(k, color="black", linewidth=1.2)
        ax_p.annotate(f"decision @ {k}", (k, threshold),
                      textcoords="offset points", xytext=(4, -12), fontsize=9)
    ax_p.set_ylabel("model probability")
    ax_p.set_xlabel("measurement")
    ax_p.set_ylim(-0.02, 1.05)
    ax_p.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    return str(out_image)


def plot_sweep(sweep_csv, out_image) -> str:
    """Heatmap of the concavity-condition pass region over (noise, model gap)."""
    rows = read_sweep(sweep_csv)
    r_vals = sorted({r["R"] for r in rows})
    s_vals = sorted({r["scale"] for r in rows})
    grid = np.full((len(r_vals), len(s_vals)), np.nan)
    for row in rows:
        grid[r_vals.index(row["R"]), s_vals.index(row["scale"])] = float(row["pass"])

    fig, ax = plt.subplots(figsize=(6, 4.4))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="RdYlGn",
                   vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(s_vals)))
    ax.set_xticklabels([f"{s:g}" for s in s_vals])
    ax.set_yticks(range(len(r_vals)))
    ax.set_yticklabels([f"{r:g}" for r in r_vals])
    ax.set_xlabel("output-matrix scale (model difference)")
    ax.set_ylabel("measurement noise level")
    ax.set_title("concavity condition pass region")
    fig.colorbar(im, ax=ax, label="pass")
    fig.tight_layout()
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    return str(out_image)
