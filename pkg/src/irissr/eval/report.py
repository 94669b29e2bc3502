"""CSV and minimal SVG emitters for evaluation results."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from xml.sax.saxutils import escape

import numpy as np

from .scores import Histogram

REPORT_COLUMNS = ("engine", "train_corpus", "factor", "matcher", "eer", "mean_psnr", "mean_ssim",
                  "mean_fsim", "n_genuine", "n_impostor")


@dataclass
class ReportRow:
    engine: str
    train_corpus: str
    factor: int
    matcher: str
    eer: float
    mean_psnr: float
    mean_ssim: float
    mean_fsim: float
    n_genuine: int
    n_impostor: int


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.6f}"
    return str(v)


def write_report_csv(path, rows, digest: str | None = None) -> None:
    """One row per engine x factor x matcher; floats fixed to 6 decimals.

    When ``digest`` is given a leading ``# config_digest=...`` comment line
    records the configuration the numbers came from.
    """
    with open(path, "w", newline="") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in rows:
            d = asdict(row) if isinstance(row, ReportRow) else dict(row)
            w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])


def read_report_csv(path) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_scores_csv(path, scores, labels=None, ref_labels=None) -> None:
    """Every comparison with its kind and the identities of both sides."""
    ref_labels = ref_labels if ref_labels is not None else labels
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "a", "b", "score"])
        for kind, vals, pairs in (("genuine", scores.genuine, scores.genuine_pairs),
                                  ("impostor", scores.impostor, scores.impostor_pairs)):
            for k, v in enumerate(vals):
                if labels is not None and len(pairs):
                    i, j = pairs[k]
                    a, b = labels[i], ref_labels[j]
                else:
                    a = b = ""
                w.writerow([kind, a, b, f"{v:.6f}"])


# ---- SVG ----

W, H, PAD = 480, 320, 48


def _svg(body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">')
    frame = [f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
             f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD / 2}" y2="{H - PAD}" stroke="black"/>',
             f'<line x1="{PAD}" y1="{H - PAD}" x2="{PAD}" y2="{PAD / 2}" stroke="black"/>']
    return "\n".join([head, *frame, *body, "</svg>"]) + "\n"


def _scale(lo, hi, a, b):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _ticks(lo, hi, sx, sy_base, vertical=False, n=5):
    out = []
    for v in np.linspace(lo, hi, n):
        if vertical:
            y = sx(v)
            out.append(f'<text x="{PAD - 4}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
        else:
            x = sx(v)
            out.append(f'<text x="{x:.1f}" y="{sy_base + 14}" text-anchor="middle">{v:.3g}</text>')
    return out


def histogram_svg(hist: Histogram, title: str = "score densities", xlabel: str = "score") -> str:
    lo, hi = float(hist.edges[0]), float(hist.edges[-1])
    top = float(max(hist.genuine.max(initial=0), hist.impostor.max(initial=0))) or 1.0
    sx = _scale(lo, hi, PAD, W - PAD / 2)
    sy = _scale(0, top, H - PAD, PAD / 2)
    body = []
    for dens, colour in ((hist.impostor, "#d62728"), (hist.genuine, "#1f77b4")):
        for k, d in enumerate(dens):
            if d <= 0:
                continue
            x0, x1 = sx(hist.edges[k]), sx(hist.edges[k + 1])
            body.append(f'<rect x="{x0:.2f}" y="{sy(d):.2f}" width="{max(x1 - x0, 0.5):.2f}" '
                        f'height="{sy(0) - sy(d):.2f}" fill="{colour}" fill-opacity="0.5"/>')
    body += _ticks(lo, hi, sx, H - PAD)
    body += _ticks(0, top, sy, None, vertical=True)
    body += [f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
             f'<text x="{W - 120}" y="40" fill="#1f77b4">genuine</text>',
             f'<text x="{W - 120}" y="54" fill="#d62728">impostor</text>']
    return _svg(body, title)


def roc_svg(roc: np.ndarray, title: str = "ROC") -> str:
    """FRR against FAR on linear axes."""
    sx = _scale(0, 1, PAD, W - PAD / 2)
    sy = _scale(0, 1, H - PAD, PAD / 2)
    pts = " ".join(f"{sx(f):.2f},{sy(r):.2f}" for f, r, _ in roc)
    body = [f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>',
            f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(1)}" stroke="#bbb" stroke-dasharray="4"/>']
    body += _ticks(0, 1, sx, H - PAD)
    body += _ticks(0, 1, sy, None, vertical=True)
    body += [f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">FAR</text>',
             f'<text x="14" y="{H / 2}" transform="rotate(-90 14 {H / 2})" text-anchor="middle">FRR</text>']
    return _svg(body, title)


def write_text(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
