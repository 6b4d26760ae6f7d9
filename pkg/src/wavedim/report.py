"""Summary tables, JSON manifests and log-log figures for sweep records."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sweep import SUMMARY_COLUMNS, RunRecord  # noqa: E402

HEADER = (
    "# dimension proxy: Kaplan-Yorke dimension of the Galerkin truncation "
    "(max of zero-equilibrium and trajectory estimates); the fractal dimension "
    "itself is not computed"
)

PLOT_SERIES = (
    ("lower_proxy", "2 x unstable pairs", "o-"),
    ("ky_dimension", "Kaplan-Yorke proxy", "s-"),
    ("d1_root", "d=1 root bound", "^-"),
    ("d1_simple", "d=1 elementary bound", "v--"),
    ("d2_bound", "d=2 bound", "d-"),
    ("d3_bound", "d>=3 bound", "x-"),
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in record.results:
        w.writerow([_cell(r.get(c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def manifest_json(record: RunRecord) -> str:
    return json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_record(record: RunRecord, target: str | Path) -> Path:
    target = Path(target)
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {target}: {exc.strerror or exc}") from exc
    _write(target / "manifest.json", manifest_json(record))
    _write(target / "summary.csv", summary_csv(record))
    return target


def plot_dimensions(record: RunRecord, path: str | Path) -> bool:
    """Log-log plot of every available series against ``1/gamma``; False if nothing to draw."""
    ok = [r for r in record.results if r.get("status") == "ok"]
    if not ok:
        return False
    fig, ax = plt.subplots(figsize=(6, 4.5))
    drawn = 0
    for key, label, style in PLOT_SERIES:
        pts = sorted((1 / r["gamma"], r[key]) for r in ok if r.get(key))
        if pts:
            x, y = zip(*pts)
            ax.loglog(x, y, style, label=label)
            drawn += 1
    if not drawn:
        plt.close(fig)
        return False
    ax.set_xlabel("1 / gamma")
    ax.set_ylabel("dimension")
    ax.set_title("dimension estimates and bounds", fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return True


def emit_report(record: RunRecord, out_dir: str | Path) -> list[Path]:
    """Write ``summary.csv``, ``manifest.json`` and ``dimensions.svg`` into ``out_dir``."""
    target = write_record(record, out_dir)
    files = [target / "summary.csv", target / "manifest.json"]
    if plot_dimensions(record, target / "dimensions.svg"):
        files.append(target / "dimensions.svg")
    return files


def parse_manifest(text: str) -> RunRecord:
    return RunRecord.from_dict(json.loads(text))
