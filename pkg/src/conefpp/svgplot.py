"""Self-contained SVG emission for experiment records.

Deterministic output: fixed canvas size, fixed number formatting, no
timestamps.  Only the handful of primitives the record plots need.
"""

import math

from .errors import NoPlot

WIDTH = 640
HEIGHT = 480
MARGIN = 56


def _fmt(x):
    return f"{float(x):.6g}"


class Canvas:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.width = width
        self.height = height
        self._parts = []

    def line(self, x1, y1, x2, y2, stroke="#444", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self._parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}"{d}/>')

    def polyline(self, pts, stroke="#1f77b4", width=1.5, dash=None):
        if not pts:
            return
        body = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self._parts.append(
            f'<polyline points="{body}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}"{d}/>')

    def polygon(self, pts, stroke="#d62728", width=1.5, fill="none"):
        body = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self._parts.append(
            f'<polygon points="{body}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}"/>')

    def circle(self, x, y, r=1.2, fill="#1f77b4"):
        self._parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" '
            f'fill="{fill}"/>')

    def text(self, x, y, s, size=12, fill="#000", anchor="start"):
        self._parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="monospace" fill="{fill}" '
            f'text-anchor="{anchor}">{s}</text>')

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        bg = (f'<rect width="{self.width}" height="{self.height}" '
              f'fill="#ffffff"/>')
        return "\n".join([head, bg] + self._parts + ["</svg>"]) + "\n"


class Frame:
    """Data-to-canvas affine map with a y flip and a border."""

    def __init__(self, canvas, xlim, ylim, margin=MARGIN):
        self.canvas = canvas
        self.x0, self.x1 = float(xlim[0]), float(xlim[1])
        self.y0, self.y1 = float(ylim[0]), float(ylim[1])
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.margin = margin
        self.iw = canvas.width - 2 * margin
        self.ih = canvas.height - 2 * margin

    def px(self, x):
        return self.margin + (x - self.x0) / (self.x1 - self.x0) * self.iw

    def py(self, y):
        return (self.canvas.height - self.margin
                - (y - self.y0) / (self.y1 - self.y0) * self.ih)

    def map(self, pts):
        return [(self.px(x), self.py(y)) for x, y in pts]

    def border(self, xlabel="", ylabel=""):
        c = self.canvas
        m = self.margin
        c.line(m, m, m, c.height - m)
        c.line(m, c.height - m, c.width - m, c.height - m)
        c.text(m, c.height - m + 16, _fmt(self.x0), size=10)
        c.text(c.width - m, c.height - m + 16, _fmt(self.x1), size=10,
               anchor="end")
        c.text(m - 4, c.height - m, _fmt(self.y0), size=10, anchor="end")
        c.text(m - 4, m + 10, _fmt(self.y1), size=10, anchor="end")
        if xlabel:
            c.text(c.width / 2, c.height - 12, xlabel, anchor="middle")
        if ylabel:
            c.text(14, m - 10, ylabel)


def _boundary_cells(cells):
    """Cells with at least one axis neighbor missing, for light plots."""
    have = set(map(tuple, cells))
    out = []
    for z in have:
        for i in range(len(z)):
            for s in (-1, 1):
                nb = list(z)
                nb[i] += s
                if tuple(nb) not in have:
                    out.append(z)
                    break
            else:
                continue
            break
    return sorted(out)


def plot_shape(record):
    """Reached cells, the (1-eps) and (1+eps) polygons, cone overlay."""
    m = record["metrics"]
    cells = record["raw"].get("cells")
    poly = m.get("polygon")
    if cells is None or poly is None or (cells and len(cells[0]) != 2):
        raise NoPlot("shape plot needs 2d cells and a polygon")
    t = float(m["t"])
    eps = float(m["epsilon"])
    lim = max(1.0, *(max(abs(x), abs(y)) for x, y in cells)) * 1.15
    canvas = Canvas()
    fr = Frame(canvas, (-lim, lim), (-lim, lim))
    fr.border(xlabel="z1", ylabel=f"cells t={_fmt(t)}")
    for z in _boundary_cells(cells):
        canvas.circle(fr.px(z[0]), fr.py(z[1]), r=1.0, fill="#1f77b4")
    for scale, color in (((1 - eps) * t, "#2ca02c"),
                         ((1 + eps) * t, "#d62728")):
        pts = [(scale * x, scale * y) for x, y in poly]
        canvas.polygon(fr.map(pts), stroke=color)
    cone = m.get("cone")
    if cone:
        c = float(cone["c"])
        ux, uy = cone["axis"][0], cone["axis"][1]
        norm = math.hypot(ux, uy)
        ux, uy = ux / norm, uy / norm
        # boundary rays of {x : x.u >= |x| sqrt(1-c^2)} in the plane
        s = math.sqrt(max(0.0, 1.0 - c * c))
        cth, sth = s, c
        for sg in (1.0, -1.0):
            rx = ux * cth - sg * uy * sth
            ry = sg * ux * sth + uy * cth
            canvas.line(fr.px(0), fr.py(0), fr.px(rx * lim), fr.py(ry * lim),
                        stroke="#9467bd", dash="4,3")
    canvas.text(WIDTH - MARGIN, MARGIN - 10,
                f"eps={_fmt(eps)}", anchor="end")
    return canvas.render()


def plot_trajectory(record):
    """Right-continuous step plot with envelope guides."""
    m = record["metrics"]
    traj = record["raw"].get("trajectory")
    if traj is None:
        raise NoPlot("trajectory plot needs trajectory raw data")
    a, b = traj["window"]
    times = [a] + list(traj["breakpoints"]) + [b]
    vals = list(traj["values"])
    guides = m.get("envelopes", [])
    ys = vals + [g[2] for g in guides] + [g[3] for g in guides]
    pad = 0.05 * (max(ys) - min(ys) + 1e-9)
    canvas = Canvas()
    fr = Frame(canvas, (a, b), (min(ys) - pad, max(ys) + pad))
    fr.border(xlabel="clock time s", ylabel="T(s)")
    steps = []
    for i, v in enumerate(vals):
        steps.append((times[i], v))
        steps.append((times[i + 1], v))
    canvas.polyline(fr.map(steps), stroke="#1f77b4", width=1.6)
    for t0, t1, lo, hi in guides:
        canvas.polyline(fr.map([(t0, lo), (t1, lo)]), stroke="#2ca02c",
                        width=1.0, dash="5,3")
        canvas.polyline(fr.map([(t0, hi), (t1, hi)]), stroke="#d62728",
                        width=1.0, dash="5,3")
    canvas.text(WIDTH - MARGIN, MARGIN - 10,
                f"sup={_fmt(traj['sup'])} inf={_fmt(traj['inf'])} "
                f"events={traj['events']}", anchor="end")
    return canvas.render()


def plot_trend(record):
    """Scatter of (x, y) pairs with a fitted or reported slope line."""
    m = record["metrics"]
    pts = m.get("trend")
    if not pts:
        raise NoPlot("trend plot needs metric 'trend' pairs")
    loglog = bool(m.get("loglog"))
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if loglog:
        if any(x <= 0 for x in xs) or any(y <= 0 for y in ys):
            pos = [(x, y) for x, y in pts if x > 0 and y > 0]
            if not pos:
                raise NoPlot("log-log trend with no positive points")
            xs = [p[0] for p in pos]
            ys = [p[1] for p in pos]
            pts = pos
        xs = [math.log2(x) for x in xs]
        ys = [math.log2(y) for y in ys]
    canvas = Canvas()
    fr = Frame(canvas, (min(xs), max(xs)), (min(ys), max(ys)))
    fr.border(xlabel=m.get("xlabel", "x"), ylabel=m.get("ylabel", "y"))
    canvas.polyline(fr.map(list(zip(xs, ys))), stroke="#1f77b4", width=1.2)
    for x, y in zip(xs, ys):
        canvas.circle(fr.px(x), fr.py(y), r=2.4)
    slope = m.get("slope")
    if slope is not None and len(xs) >= 2:
        x0, x1 = xs[0], xs[-1]
        ymid = ys[-1]
        y0 = ymid + slope * (x0 - x1)
        canvas.polyline(fr.map([(x0, y0), (x1, ymid)]), stroke="#d62728",
                        width=1.0, dash="6,3")
        canvas.text(WIDTH - MARGIN, MARGIN - 10,
                    f"slope={_fmt(slope)}", anchor="end")
    verdict = m.get("verdict")
    if verdict:
        canvas.text(MARGIN + 6, MARGIN - 10, verdict)
    return canvas.render()
