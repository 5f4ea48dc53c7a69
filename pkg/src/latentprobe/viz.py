"""Random 3-D projection of a corpus onto the sphere, Mollweide map, SVG scatter."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from latentprobe.core import EmbeddingSet
from latentprobe.errors import ComputationError, InputError

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
N_HIGHLIGHT = 8
# high-contrast against the gray background markers
PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#bfef45")
BACKGROUND = "#b0b0b0"


@dataclass(frozen=True)
class SpherePoints:
    """Latitude/longitude in radians, one entry per projected item."""

    lat: np.ndarray
    lon: np.ndarray
    labels: np.ndarray
    ids: np.ndarray

    def xyz(self) -> np.ndarray:
        c = np.cos(self.lat)
        return np.column_stack([c * np.cos(self.lon), c * np.sin(self.lon), np.sin(self.lat)])


@dataclass(frozen=True)
class PlanePoints:
    x: np.ndarray
    y: np.ndarray
    labels: np.ndarray
    highlighted: np.ndarray

    def __len__(self) -> int:
        return self.x.size


def project_to_sphere(e: EmbeddingSet, seed: int = 0, center: bool = False) -> SpherePoints:
    if e.d < 3:
        raise InputError("sphere projection needs D >= 3")
    rng = np.random.default_rng(seed)
    proj = rng.standard_normal((e.d, 3))
    x = e.vectors - e.vectors.mean(axis=0) if center else e.vectors
    p = x @ proj
    norms = np.linalg.norm(p, axis=1)
    keep = norms > 0
    if not keep.all():
        log.warning("skipping %d items that project to the origin", int((~keep).sum()))
    p = p[keep] / norms[keep, None]
    lat = np.arcsin(np.clip(p[:, 2], -1.0, 1.0))
    lon = np.arctan2(p[:, 1], p[:, 0])
    return SpherePoints(lat, lon, e.labels[keep], e.ids[keep])


def _w_minus_sin(w: np.ndarray) -> np.ndarray:
    # w - sin(w) without cancellation for small w
    small = w < 1e-2
    ws = w[small]
    out = w - np.sin(w)
    out[small] = ws**3 / 6 - ws**5 / 120 + ws**7 / 5040
    return out


def mollweide_theta(lat, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Solve 2t + sin 2t = pi sin(lat) for the auxiliary angle t.

    Newton from t = lat. Within 0.2 rad of a pole the equation is flat, so
    there the unknown is the pole distance u = pi/2 - |t|, which satisfies
    2u - sin 2u = pi (1 - sin|lat|); the right side is evaluated as
    2 pi sin^2(c/2) with c the colatitude, Newton starts from the cubic
    asymptote u = cbrt(3 pi (1 - sin|lat|) / 4) and steps are damped by 0.9.
    """
    lat = np.asarray(lat, dtype=np.float64)
    shape = lat.shape
    lat = lat.reshape(-1)
    a = np.abs(lat)
    theta = lat.copy()
    pole = a >= np.pi / 2
    near = (np.pi / 2 - a < 0.2) & ~pole
    far = ~near & ~pole

    if far.any():
        target = np.pi * np.sin(lat[far])
        t = theta[far]
        for _ in range(max_iter):
            f = 2 * t + np.sin(2 * t) - target
            step = f / (2 + 2 * np.cos(2 * t))
            t = t - step
            if np.all(np.abs(step) <= tol):
                break
        else:
            raise ComputationError("Mollweide Newton did not converge")
        theta[far] = t

    if near.any():
        colat = np.pi / 2 - a[near]
        rhs = 2 * np.pi * np.sin(colat / 2) ** 2
        u = np.minimum(np.cbrt(0.75 * rhs), np.pi / 2)
        for _ in range(max_iter):
            g = _w_minus_sin(2 * u) - rhs
            gp = 4 * np.sin(u) ** 2
            step = np.where(gp > 0, 0.9 * g / np.where(gp > 0, gp, 1.0), 0.0)
            u = np.clip(u - step, 0.0, np.pi / 2)
            if np.all(np.abs(step) <= tol * np.maximum(u, 1e-300)):
                break
        else:
            raise ComputationError("Mollweide Newton did not converge near a pole")
        theta[near] = np.sign(lat[near]) * (np.pi / 2 - u)

    theta[pole] = np.sign(lat[pole]) * np.pi / 2
    return theta.reshape(shape)


def mollweide(lat, lon) -> tuple[np.ndarray, np.ndarray]:
    """Equal-area map of (lat, lon) radians onto the 2:1 ellipse with R = 1."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if np.any(np.abs(lat) > np.pi / 2 + 1e-12) or np.any(np.abs(lon) > np.pi + 1e-12):
        raise InputError("latitude must lie in [-pi/2, pi/2] and longitude in [-pi, pi]")
    theta = mollweide_theta(np.clip(lat, -np.pi / 2, np.pi / 2))
    x = (2 * SQRT2 / np.pi) * lon * np.cos(theta)
    y = SQRT2 * np.sin(theta)
    return x, y


def choose_highlight(labels, count: int = N_HIGHLIGHT, seed: int = 0) -> list[int]:
    classes = np.unique(labels)
    if classes.size <= count:
        if classes.size < count:
            log.warning("only %d classes available; highlighting all of them", classes.size)
        return classes.tolist()
    rng = np.random.default_rng(seed)
    return sorted(rng.choice(classes, size=count, replace=False).tolist())


def to_plane(sp: SpherePoints, highlight: list[int]) -> PlanePoints:
    x, y = mollweide(sp.lat, sp.lon)
    return PlanePoints(x, y, sp.labels, np.isin(sp.labels, highlight))


def _ellipse_path() -> str:
    a, b = 2 * SQRT2, SQRT2
    # two arcs, top then bottom; SVG y grows downward so y is flipped on output
    return f'<path d="M {-a:.6f} 0 A {a:.6f} {b:.6f} 0 1 0 {a:.6f} 0 A {a:.6f} {b:.6f} 0 1 0 {-a:.6f} 0 Z" fill="none" stroke="black" stroke-width="0.01"/>'


def render_svg(points: PlanePoints, highlight: list[int], radius: float = 0.012) -> str:
    a, b = 2 * SQRT2, SQRT2
    mx, my = 0.05 * 2 * a, 0.05 * 2 * b
    vb = f"{-a - mx:.6f} {-b - my:.6f} {2 * (a + mx):.6f} {2 * (b + my):.6f}"
    color = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(highlight)}
    out = io.StringIO()
    out.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{vb}" width="800" height="400">\n')
    out.write(_ellipse_path() + "\n")
    # background first so highlighted classes sit on top
    order = np.concatenate([np.flatnonzero(~points.highlighted), np.flatnonzero(points.highlighted)])
    for i in order:
        fill = color[int(points.labels[i])] if points.highlighted[i] else BACKGROUND
        out.write(f'<circle cx="{points.x[i]:.6f}" cy="{-points.y[i]:.6f}" r="{radius}" fill="{fill}"/>\n')
    out.write("</svg>\n")
    return out.getvalue()


def render_csv(points: PlanePoints) -> str:
    lines = ["x,y,label,highlighted"]
    for x, y, lab, h in zip(points.x, points.y, points.labels, points.highlighted):
        lines.append(f"{float(x)!r},{float(y)!r},{int(lab)},{int(bool(h))}")
    return "\n".join(lines) + "\n"


def render_scatter(points: PlanePoints, highlight: list[int]) -> tuple[str, str]:
    return render_svg(points, highlight), render_csv(points)


def latent_map(e: EmbeddingSet, seed: int = 0, n_highlight: int = N_HIGHLIGHT, center: bool = False,
               highlight: list[int] | None = None) -> tuple[str, str, list[int]]:
    """Full pipeline: projection, Mollweide, seeded class choice, SVG and CSV."""
    sp = project_to_sphere(e, seed=seed, center=center)
    chosen = choose_highlight(e.labels, n_highlight, seed) if highlight is None else list(highlight)
    plane = to_plane(sp, chosen)
    svg, table = render_scatter(plane, chosen)
    return svg, table, chosen
