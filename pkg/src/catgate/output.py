"""CSV and SVG writers for result rows."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from .experiment import COLUMNS, Model, ResultRow

_INT = {"n_cut"}
_STR = {"scenario_id", "model", "angles_label"}
_COLORS = {Model.FULL.value: "red", Model.EFFECTIVE.value: "blue",
           Model.EFFECTIVE_CLEAN.value: "green"}


def _cell(name, v) -> str:
    if name in _STR or name in _INT:
        return str(v)
    return repr(float(v))


def csv_text(rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(c, getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def emit_csv(rows, path) -> Path:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text(rows))
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc.strerror or exc}") from exc
    return path


def _parse(name, s):
    if name in _STR:
        return s
    if name in _INT:
        return int(s)
    return float(s)


def load_csv(path) -> list[ResultRow]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != COLUMNS:
                raise ValueError(f"{path}: unexpected header {header}")
            return [ResultRow(**{c: _parse(c, v) for c, v in zip(COLUMNS, rec)})
                    for rec in reader if rec]
    except OSError as exc:
        raise OSError(f"cannot read CSV {path}: {exc.strerror or exc}") from exc


def emit_plot(rows, path) -> Path:
    """Fidelity against photon lifetime, one panel per angle case.

    Every row becomes one marker whose SVG id is its ``scenario_id``.  Rows
    without a finite fidelity are drawn as hollow markers on the lower axis
    edge so that they stay visible.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(rows)
    if not rows:
        raise ValueError("no rows to plot")
    path = Path(path)
    cases = sorted({r.angles_label for r in rows})
    fig, axes = plt.subplots(1, len(cases), figsize=(4 * len(cases), 3.4), squeeze=False,
                             sharey=False)
    for ax, case in zip(axes[0], cases):
        sub = [r for r in rows if r.angles_label == case]
        finite = [r.fidelity for r in sub if math.isfinite(r.fidelity)]
        floor = min(finite) if finite else 0.0
        for model in sorted({r.model for r in sub}):
            pts = sorted((r for r in sub if r.model == model), key=lambda r: r.kappa_inv_us)
            color = _COLORS.get(model, "black")
            good = [r for r in pts if math.isfinite(r.fidelity)]
            ax.plot([r.kappa_inv_us for r in good], [r.fidelity for r in good], "-",
                    color=color, lw=1.2, label=model)
            for r in pts:
                ok = math.isfinite(r.fidelity)
                (m,) = ax.plot([r.kappa_inv_us], [r.fidelity if ok else floor], "o",
                               color=color, ms=4, mfc=color if ok else "none")
                m.set_gid(r.scenario_id)
        ax.set_title(f"({case})")
        ax.set_xlabel("cavity lifetime (us)")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=7)
    axes[0][0].set_ylabel("fidelity")
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except OSError as exc:
        raise OSError(f"cannot write plot {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return path
