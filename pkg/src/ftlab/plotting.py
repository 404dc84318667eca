"""Plot data (gnuplot ``.dat`` + ``.gp``) and PNG figures for result CSVs."""

from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ConfigurationError, InsufficientDataError  # noqa: E402
from .threshold import CSV_COLUMNS, ExperimentResult, fit_threshold  # noqa: E402


def read_results_csv(path) -> list[dict]:
    """Rows of a result CSV with numeric columns converted; checks the schema."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ConfigurationError(f"{path.name}: missing column(s) {', '.join(missing)}")
        rows = []
        for r in reader:
            row = dict(r)
            for c in ("p", "p_logical", "ci_low", "ci_high"):
                row[c] = float(r[c])
            for c in ("shots", "failures", "aborts"):
                row[c] = int(r[c])
            rows.append(row)
    if not rows:
        raise ConfigurationError(f"{path.name}: no data rows")
    return rows


def reference_line(rows: list[dict], C: float) -> list[tuple[float, float]]:
    """Endpoints of ``p_L = C p**2`` spanning the data and the crossing ``p = 1/C``."""
    ps = [r["p"] for r in rows if r["p"] > 0] + [1.0 / C]
    lo, hi = min(ps), max(ps)
    return [(lo, C * lo * lo), (hi, C * hi * hi)]


def anchor_C(rows: list[dict], fit: dict | None) -> tuple[float, str]:
    """Quadratic coefficient for the reference line, and where it came from."""
    if fit and fit.get("C"):
        return float(fit["C"]), "fit"
    pts = [(r["p"], ExperimentResult(r["shots"], r["failures"], r["aborts"])) for r in rows if r["p"] > 0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return fit_threshold(pts).C, "fit"
    except InsufficientDataError:
        best = max((r for r in rows if r["p"] > 0 and r["failures"] > 0), key=lambda r: r["failures"], default=None)
        if best is None:
            return 1.0, "none"
        return best["p_logical"] / best["p"] ** 2, "point"


def write_plotdata(rows: list[dict], out_dir, stem: str, fit: dict | None = None, *, png: bool = True) -> list[Path]:
    """Write ``stem.dat``, ``stem.gp`` and (optionally) ``stem.png``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    C, source = anchor_C(rows, fit)
    ref = reference_line(rows, C)
    dat = out_dir / f"{stem}.dat"
    lines = ["# p p_logical ci_low ci_high failures shots"]
    for r in rows:
        lines.append(f"{r['p']:.10g} {r['p_logical']:.10g} {r['ci_low']:.10g} {r['ci_high']:.10g} "
                     f"{r['failures']} {r['shots']}")
    lines += ["", "", f"# reference p_L = C p^2, C = {C:.10g} ({source}); crosses p_L = p at p = {1 / C:.10g}"]
    lines += [f"{x:.10g} {y:.10g}" for x, y in ref]
    dat.write_text("\n".join(lines) + "\n")
    gp = out_dir / f"{stem}.gp"
    gp.write_text(
        "set logscale xy\n"
        "set xlabel 'physical error rate p'\n"
        "set ylabel 'logical error rate'\n"
        "set key left top\n"
        f"plot '{dat.name}' index 0 using 1:2:3:4 with yerrorbars title 'simulated', \\\n"
        f"     '{dat.name}' index 1 using 1:2 with lines title 'C p^2', \\\n"
        f"     x with lines dashtype 2 title 'p_L = p'\n"
    )
    paths = [dat, gp]
    if png:
        paths.append(plot_rates(rows, out_dir / f"{stem}.png", C=C))
    return paths


def plot_rates(rows: list[dict], path, C: float | None = None, label: str = "simulated",
               extra: dict[str, list[dict]] | None = None) -> Path:
    """Log-log logical vs physical error rate with Wilson intervals."""
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    series = {label: rows, **(extra or {})}
    for name, rs in series.items():
        rs = [r for r in rs if r["p"] > 0 and r["p_logical"] > 0]
        if not rs:
            continue
        p = np.array([r["p"] for r in rs])
        y = np.array([r["p_logical"] for r in rs])
        err = np.array([[y[i] - r["ci_low"], r["ci_high"] - y[i]] for i, r in enumerate(rs)]).T
        ax.errorbar(p, y, yerr=err, marker="o", ms=4, capsize=2, lw=1, label=name)
    all_p = [r["p"] for rs in series.values() for r in rs if r["p"] > 0]
    if all_p:
        xs = np.geomspace(min(all_p) / 1.5, max(all_p) * 1.5, 50)
        ax.plot(xs, xs, "k:", lw=0.8, label="$p_L = p$")
        if C:
            ax.plot(xs, C * xs**2, "--", lw=0.8, color="grey", label=f"$C p^2$, C = {C:.3g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("physical error rate $p$")
    ax.set_ylabel("logical error rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_coherent(rows: list[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    th = np.linspace(0, max(r["theta"] for r in rows) * 1.1, 100)
    ax.plot(th, np.sin(th / 2) ** 2, "k-", lw=0.8, label=r"$\sin^2(\theta/2)$")
    ax.errorbar([r["theta"] for r in rows], [r["rate"] for r in rows],
                yerr=[math.sqrt(r["rate"] * (1 - r["rate"]) / r["shots"]) for r in rows],
                fmt="o", ms=4, capsize=2, label="nontrivial Z syndrome")
    ax.set_xlabel(r"over-rotation $\theta$")
    ax.set_ylabel("probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def load_fit(path) -> dict | None:
    path = Path(path)
    if not path.exists():
        return None
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        return None
    if isinstance(data.get("fit"), dict):
        return data["fit"]
    return data if "C" in data else None
