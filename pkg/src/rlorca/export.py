"""Trajectory log persistence (CSV, JSON) and SVG trajectory plots."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from rlorca.sim import TrajectoryLog, interventions

CSV_COLUMNS = ("step", "time_s", "agent_id", "x", "y", "psi", "v", "accel", "steer", "qp_status")


def _num(x: float) -> str:
    return repr(float(x))


def log_to_csv(log: TrajectoryLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for k in range(log.n_steps):
        for i in range(log.n_agents):
            x, y, psi, v = log.states[k, i]
            a, s = log.actions[k, i]
            w.writerow([k + 1, _num((k + 1) * log.dt), i, _num(x), _num(y), _num(psi), _num(v), _num(a), _num(s), log.status[k, i]])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    """Rows of a trajectory CSV with numeric fields converted."""
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {k: float(r[k]) for k in ("time_s", "x", "y", "psi", "v", "accel", "steer")}
            row.update(step=int(r["step"]), agent_id=int(r["agent_id"]), qp_status=r["qp_status"])
            rows.append(row)
    return rows


def log_to_dict(log: TrajectoryLog) -> dict:
    return {
        "format": 1,
        "dt": log.dt,
        "radius": log.radius,
        "goals": log.goals.tolist(),
        "initial": log.initial.tolist(),
        "states": log.states.tolist(),
        "velocities": log.velocities.tolist(),
        "actions": log.actions.tolist(),
        "combined": log.combined.tolist(),
        "status": log.status.tolist(),
        "events": log.events,
    }


def log_from_dict(d: dict) -> TrajectoryLog:
    M = len(d["initial"])
    return TrajectoryLog(
        dt=float(d["dt"]),
        radius=float(d["radius"]),
        goals=np.array(d["goals"], dtype=float).reshape(M, 2),
        initial=np.array(d["initial"], dtype=float).reshape(M, 4),
        states=np.array(d["states"], dtype=float).reshape(-1, M, 4),
        velocities=np.array(d["velocities"], dtype=float).reshape(-1, M, 2),
        actions=np.array(d["actions"], dtype=float).reshape(-1, M, 2),
        combined=np.array(d["combined"], dtype=float).reshape(-1, M, 2),
        status=np.array(d["status"], dtype=object).reshape(-1, M),
        events=list(d["events"]),
    )


def export(log: TrajectoryLog, path, fmt: str | None = None) -> Path:
    """Write `log` as CSV or JSON (inferred from the suffix when `fmt` is None)."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        path.write_text(log_to_csv(log))
    elif fmt == "json":
        path.write_text(json.dumps(log_to_dict(log), sort_keys=True))
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return path


def load_json(path) -> TrajectoryLog:
    return log_from_dict(json.loads(Path(path).read_text()))


def _color(i: int, n: int) -> str:
    # evenly spaced hues, fixed saturation/lightness
    h = (i / max(n, 1)) % 1.0
    r, g, b = (_hue_channel(h + off) for off in (1 / 3, 0.0, -1 / 3))
    return "#%02x%02x%02x" % (r, g, b)


def _hue_channel(t: float) -> int:
    t %= 1.0
    s, l = 0.75, 0.45
    q = l + s - l * s
    p = 2 * l - q
    if t < 1 / 6:
        v = p + (q - p) * 6 * t
    elif t < 1 / 2:
        v = q
    elif t < 2 / 3:
        v = p + (q - p) * (2 / 3 - t) * 6
    else:
        v = p
    return int(round(255 * v))


def emit_plot(log: TrajectoryLog, path, title: str = "", markers: int = 40, show_interventions: bool = False) -> Path:
    """SVG of all trajectories: one polyline per agent plus disc markers that fade along the path.

    With `show_interventions`, steps where the safety projection changed
    the blended action are marked with small black crosses.
    """
    M = log.n_agents
    pts = np.concatenate([log.initial[None, :, :2], log.states[:, :, :2]], axis=0) if log.n_steps else log.initial[None, :, :2]
    allx = np.concatenate([pts[..., 0].ravel(), log.goals[:, 0]])
    ally = np.concatenate([pts[..., 1].ravel(), log.goals[:, 1]])
    pad = 2.0 * log.radius + 1.0
    x0, x1 = allx.min() - pad, allx.max() + pad
    y0, y1 = ally.min() - pad, ally.max() + pad
    size = 800.0
    scale = size / max(x1 - x0, y1 - y0)
    W, H = (x1 - x0) * scale, (y1 - y0) * scale

    def sx(x):
        return (x - x0) * scale

    def sy(y):
        return H - (y - y0) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.1f}" height="{H + 30:.1f}" viewBox="0 0 {W:.1f} {H + 30:.1f}">',
        f'<rect x="0" y="0" width="{W:.1f}" height="{H + 30:.1f}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="10" y="{H + 20:.1f}" font-family="sans-serif" font-size="14">{escape(title)}</text>')
    r_px = log.radius * scale
    N = len(pts)
    marks = sorted(set(np.linspace(0, N - 1, min(markers, N)).round().astype(int).tolist()))
    for i in range(M):
        col = _color(i, M)
        coords = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in pts[:, i])
        out.append(f'<g id="agent{i}">')
        for k in marks:
            alpha = 0.15 + 0.85 * (1.0 - k / max(N - 1, 1))
            p = pts[k, i]
            out.append(f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="{r_px:.2f}" fill="{col}" fill-opacity="{alpha:.3f}" stroke="none"/>')
        out.append(f'<polyline points="{coords}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        g = log.goals[i]
        out.append(f'<rect x="{sx(g[0]) - 3:.2f}" y="{sy(g[1]) - 3:.2f}" width="6" height="6" fill="none" stroke="{col}"/>')
        out.append("</g>")
    if show_interventions and log.n_steps:
        mask = interventions(log)
        arm = max(2.0, 0.3 * r_px)
        for k, i in zip(*np.nonzero(mask)):
            p = log.states[k, i]
            cx, cy = sx(p[0]), sy(p[1])
            out.append(
                f'<path class="intervention" d="M{cx - arm:.2f},{cy - arm:.2f} L{cx + arm:.2f},{cy + arm:.2f} '
                f'M{cx - arm:.2f},{cy + arm:.2f} L{cx + arm:.2f},{cy - arm:.2f}" stroke="black" stroke-width="0.8"/>'
            )
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def frame_count(log: TrajectoryLog) -> int:
    return log.n_steps + 1


def headings_wrapped(log: TrajectoryLog) -> np.ndarray:
    return (log.states[:, :, 2] + math.pi) % (2 * math.pi) - math.pi
