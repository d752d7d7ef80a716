"""Figures written next to the CSV outputs (PNG, headless backend)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.8, 3.2),
    "figure.dpi": 150,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_tmm_bench(rows, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
        for count in sorted({r["conditions"] for r in rows}):
            sel = [r for r in rows if r["conditions"] == count]
            ax1.plot([r["workers"] for r in sel], [r["elapsed_s"] for r in sel], "o-", label=f"{count} cond.")
            ax2.plot([r["workers"] for r in sel], [r["speedup"] for r in sel], "o-", label=f"{count} cond.")
        ax1.set_xlabel("workers")
        ax1.set_ylabel("simulation time (s)")
        ax2.set_xlabel("workers")
        ax2.set_ylabel("speedup vs 1 worker")
        ax1.legend()
        return _save(fig, path)


def plot_fm_bench(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for key in sorted({(r["bits"], r["workers"]) for r in rows}):
            sel = [r for r in rows if (r["bits"], r["workers"]) == key]
            ax.plot([r["rows"] for r in sel], [r["elapsed_s"] for r in sel], "o-", label=f"{key[0]} bits, {key[1]} workers")
        ax.set_xlabel("training rows")
        ax.set_ylabel("training time (s)")
        ax.legend()
        return _save(fig, path)


def plot_qaoa_bench(rows, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
        for solver in dict.fromkeys(r["solver"] for r in rows):
            sel = [r for r in rows if r["solver"] == solver]
            ax1.plot([r["n"] for r in sel], [r["accuracy"] for r in sel], "o-", label=solver)
            ax2.semilogy([r["n"] for r in sel], [max(r["elapsed_s"], 1e-6) for r in sel], "o-", label=solver)
        ax1.set_xlabel("problem size n")
        ax1.set_ylabel("accuracy")
        ax2.set_xlabel("problem size n")
        ax2.set_ylabel("time to solution (s)")
        ax1.legend()
        return _save(fig, path)


def plot_spectra(result, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, cond in enumerate(result.conditions):
            label = f"{cond.angle:g} deg {cond.polarization}"
            ax.plot(result.wavelengths, result.R[i], label=f"R {label}")
            ax.plot(result.wavelengths, result.T[i], "--", label=f"T {label}")
        ax.set_xlabel("wavelength (um)")
        ax.set_ylabel("R, T")
        if len(result.conditions) <= 4:
            ax.legend()
        return _save(fig, path)


def plot_runlog(records, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        foms = [r["fom"] for r in records]
        best, trace = float("-inf"), []
        for f in foms:
            best = max(best, f)
            trace.append(best)
        ax.plot(range(1, len(foms) + 1), foms, ".", label="proposed")
        ax.plot(range(1, len(foms) + 1), trace, "-", label="best so far")
        ax.set_xlabel("iteration")
        ax.set_ylabel("FOM")
        ax.legend()
        return _save(fig, path)
