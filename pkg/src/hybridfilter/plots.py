"""SVG line plots of the experiment CSVs."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import FIGURE_FILES, TIMING_FILE  # noqa: E402

_LABELS = {"sx": r"$\bar\sigma_x$", "sy": r"$\bar\sigma_y$", "sz": r"$\bar\sigma_z$", "q": r"$\bar q$"}
_STYLE = {"truth": ("r", "-"), "sme": ("b", "-."), "qekf": ("g", "--")}


def _read(path: Path, required):
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    return {c: [float(r[c]) for r in rows] for c in required}


def emit_plots(out_dir) -> list[Path]:
    """Render every figure CSV found in ``out_dir`` to an SVG next to it."""
    out = Path(out_dir)
    written = []
    for obs, name in FIGURE_FILES.items():
        path = out / name
        if not path.exists():
            continue
        cols = _read(path, ["t", "truth_mean", "sme_mean", "qekf_mean"])
        fig, ax = plt.subplots(figsize=(6, 4))
        for src, (color, ls) in _STYLE.items():
            ax.plot(cols["t"], cols[f"{src}_mean"], color=color, ls=ls, label=src.upper() if src != "truth" else "truth")
        ax.set_xlabel("t")
        ax.set_ylabel(_LABELS[obs])
        ax.legend()
        fig.tight_layout()
        svg = path.with_suffix(".svg")
        fig.savefig(svg)
        plt.close(fig)
        written.append(svg)
    timing = out / TIMING_FILE
    if timing.exists():
        cols = _read(timing, ["n_prime", "sme_seconds", "qekf_seconds"])
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(cols["n_prime"], cols["sme_seconds"], "r-", marker="o", label="SME")
        ax.plot(cols["n_prime"], cols["qekf_seconds"], "g-.", marker="s", label="QEKF")
        ax.set_xlabel("cavity dimension n'")
        ax.set_ylabel("seconds per trajectory")
        ax.legend()
        fig.tight_layout()
        svg = timing.with_suffix(".svg")
        fig.savefig(svg)
        plt.close(fig)
        written.append(svg)
    if not written:
        raise FileNotFoundError(f"no experiment CSVs in {out}")
    return written
