"""Report artifacts: RFC-4180 CSV tables, canonical JSON, SVG line plots and a hash manifest.

Every JSON/CSV artifact is a pure function of the config, so reruns are
byte-identical.  Wall-clock timing goes to a separate ``timing.log`` that is
excluded from the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

REPORT_NAME = "report.json"


class ReportMismatch(RuntimeError):
    pass


def _clean(obj):
    """Make ``obj`` JSON-serialisable; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def config_hash(config: dict) -> str:
    text = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        values = [row[h] for h in header] if isinstance(row, dict) else row
        w.writerow([_fmt(v) for v in values])
    return buf.getvalue()


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    path.write_bytes(csv_text(header, rows).encode())
    return path


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_bytes(canonical_json(obj).encode())
    return path


def svg_line_plot(series, title: str = "", xlabel: str = "u", ylabel: str = "", logx=True, logy=True) -> str:
    """Self-contained SVG.  ``series`` is a list of dicts with keys ``name``, ``x``, ``y`` and
    optionally ``lo``/``hi`` for a shaded band.  The data are repeated in XML comments."""
    W, H, M = 640, 420, 60
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = np.concatenate([np.asarray(s[k], float) for s in series for k in ("y", "lo", "hi") if k in s])
    ys = ys[np.isfinite(ys) & ((ys > 0) if logy else True)]
    fx = np.log10 if logx else (lambda v: np.asarray(v, float))
    fy = np.log10 if logy else (lambda v: np.asarray(v, float))
    x0, x1 = float(np.min(fx(xs))), float(np.max(fx(xs)))
    y0, y1 = float(np.min(fy(ys))), float(np.max(fy(ys)))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(v):
        return M + (float(fx(v)) - x0) / (x1 - x0) * (W - 2 * M)

    def py(v):
        return H - M - (float(fy(max(v, 1e-300) if logy else v)) - y0) / (y1 - y0) * (H - 2 * M)

    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    for s in series:
        out.append(f"<!-- data {s['name']}: " + " ".join(
            f"({_fmt(float(a))},{_fmt(float(b))})" for a, b in zip(s["x"], s["y"])) + " -->")
    out.append(f'<rect x="{M}" y="{M}" width="{W - 2 * M}" height="{H - 2 * M}" fill="none" stroke="#444"/>')
    out.append(f'<text x="{W / 2}" y="{M / 2}" text-anchor="middle" font-size="14">{title}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="12">{xlabel}{" (log)" if logx else ""}</text>')
    out.append(f'<text x="15" y="{H / 2}" font-size="12" transform="rotate(-90 15 {H / 2})">{ylabel}{" (log)" if logy else ""}</text>')
    for i, s in enumerate(series):
        col = colours[i % len(colours)]
        if "lo" in s and "hi" in s:
            upper = [f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s["x"], s["hi"])]
            lower = [f"{px(a):.2f},{py(max(b, 1e-300)):.2f}" for a, b in zip(s["x"], s["lo"])][::-1]
            out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{col}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s["x"], s["y"]) if np.isfinite(b))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{W - M - 150}" y="{M + 18 * (i + 1)}" font-size="12" fill="{col}">{s["name"]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report(out_dir: Path, config: dict, experiment: str, files: list, summary: dict) -> Path:
    """Write ``report.json`` with the config echo, its hash and a sha256 manifest of ``files``."""
    out_dir = Path(out_dir)
    manifest = {Path(f).name: sha256_file(f) for f in files}
    report = {
        "experiment": experiment,
        "config": config,
        "config_hash": config_hash(config),
        "files": manifest,
        "summary": summary,
    }
    return write_json(out_dir / REPORT_NAME, report)


def load_report(path) -> dict:
    """Re-open a report, checking the config hash and every listed artifact."""
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_NAME
    report = json.loads(path.read_text())
    if config_hash(report["config"]) != report["config_hash"]:
        raise ReportMismatch("config hash does not match the echoed config")
    for name, digest in report["files"].items():
        target = path.parent / name
        if not target.exists():
            raise ReportMismatch(f"artifact {name} is missing")
        if sha256_file(target) != digest:
            raise ReportMismatch(f"artifact {name} does not match its recorded hash")
    return report
