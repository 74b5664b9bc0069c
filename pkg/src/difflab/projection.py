"""Template-subspace projection of penultimate features and 2-D scatter output.

Three class templates span a 3-D subspace; features are projected onto an
orthonormal basis of it and then reduced to 2-D by PCA. Both the basis and
the principal axes follow a sign convention (first significant entry of
each column positive) so repeated runs give identical output.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError, DegenerateGeometryError, ShapeError
from .geometry import FeatureMatrix
from .nn import DenseLayer

_SIGN_TOL = 1e-12
_PALETTE = ("#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass
class ProjectionBasis:
    basis: np.ndarray  # h' x 3, orthonormal columns
    class_triple: tuple[int, int, int]
    bias_appended: bool = True


@dataclass
class Projected2D:
    points: np.ndarray
    labels: np.ndarray
    explained_variance: np.ndarray
    components: np.ndarray  # 3 x 2


def _fix_sign(v: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(v))
    for x in v:
        if abs(x) > _SIGN_TOL * max(scale, 1.0):
            return -v if x < 0 else v
    return v


def gram_schmidt(a: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Orthonormalize the columns of ``a`` (classical GS, two passes)."""
    a = np.asarray(a, dtype=np.float64)
    q = np.zeros_like(a)
    for j in range(a.shape[1]):
        v = a[:, j].copy()
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            v -= q[:, :j] @ (q[:, :j].T @ v)
        norm = np.linalg.norm(v)
        if norm0 == 0 or norm <= rank_tol * norm0:
            raise DegenerateGeometryError(f"column {j} is linearly dependent on the others")
        q[:, j] = v / norm
    return q


def qr_basis(final_layer: DenseLayer, classes: Sequence[int],
             append_bias: bool = True) -> ProjectionBasis:
    classes = tuple(int(c) for c in classes)
    if len(classes) != 3 or len(set(classes)) != 3:
        raise ValueError("need three distinct classes")
    if append_bias:
        w = np.stack([final_layer.template(c) for c in classes], axis=1)
    else:
        w = final_layer.weights[list(classes)].T
    q = gram_schmidt(w)
    q = np.stack([_fix_sign(q[:, j]) for j in range(3)], axis=1)
    return ProjectionBasis(q, classes, append_bias)


def project(features, basis: ProjectionBasis) -> np.ndarray:
    """Row ``i`` of the result is ``basis.T @ x_i`` (``x_i`` extended by 1 if needed)."""
    x = features.rows if isinstance(features, FeatureMatrix) else np.asarray(features, float)
    x = np.atleast_2d(x)
    expected = basis.basis.shape[0] - (1 if basis.bias_appended else 0)
    if x.shape[1] != expected:
        raise ShapeError(f"feature dim {x.shape[1]} does not match basis ({expected})")
    if basis.bias_appended:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    return x @ basis.basis


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` sorted by descending eigenvalue,
    eigenvectors as columns.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ShapeError("jacobi_eigh needs a symmetric square matrix")
    v = np.eye(n)
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    vals = np.diag(a).copy()
    order = sorted(range(n), key=lambda i: (-vals[i], i))
    return vals[order], v[:, order]


def pca_2d(points3: np.ndarray, labels=None) -> Projected2D:
    """Center, diagonalize the 3x3 sample covariance and keep the top two axes."""
    pts = np.asarray(points3, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError("pca_2d expects an N x 3 matrix")
    if pts.shape[0] < 2:
        raise DegenerateDataError("need at least two points")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / (pts.shape[0] - 1)
    if not np.any(cov):
        raise DegenerateDataError("all points coincide (zero covariance)")
    vals, vecs = jacobi_eigh(cov)
    vals = np.maximum(vals, 0.0)
    comps = np.stack([_fix_sign(vecs[:, j]) for j in range(2)], axis=1)
    lab = np.zeros(pts.shape[0], dtype=np.int64) if labels is None else np.asarray(labels)
    return Projected2D(centered @ comps, lab, vals[:2].copy(), comps)


def project_panel(features: FeatureMatrix, final_layer: DenseLayer,
                  classes: Sequence[int]) -> Projected2D:
    """The full pipeline on the samples of three classes."""
    basis = qr_basis(final_layer, classes)
    mask = np.isin(features.labels, list(classes))
    return pca_2d(project(features.rows[mask], basis), features.labels[mask])


def _num(x: float) -> str:
    return f"{x:.3f}"


def render_svg(proj: Projected2D, class_names: dict[int, str], width: int = 480,
               height: int = 400, title: str | None = None) -> str:
    pts = proj.points
    margin, legend_w = 40, 150
    plot_w = width - 2 * margin - legend_w
    plot_h = height - 2 * margin
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    def to_px(p):
        return (margin + (p[0] - lo[0]) / span[0] * plot_w,
                margin + plot_h - (p[1] - lo[1]) / span[1] * plot_h)

    classes = sorted(set(int(c) for c in proj.labels))
    color = {c: _PALETTE[i % len(_PALETTE)] for i, c in enumerate(classes)}
    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
              f'viewBox="0 0 {width} {height}">\n')
    out.write(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    if title:
        out.write(f'<text x="{margin}" y="{margin / 2:.0f}" font-size="13" '
                  f'font-family="sans-serif">{_escape(title)}</text>\n')
    out.write(f'<rect x="{margin}" y="{margin}" width="{plot_w}" height="{plot_h}" '
              f'fill="none" stroke="#444"/>\n')
    for c in classes:
        out.write(f'<g class="class-{c}" fill="{color[c]}" fill-opacity="0.7">\n')
        for p in pts[proj.labels == c]:
            x, y = to_px(p)
            out.write(f'<circle class="pt" cx="{_num(x)}" cy="{_num(y)}" r="2.5"/>\n')
        out.write("</g>\n")
    lx = width - legend_w - margin / 2
    for i, c in enumerate(classes):
        ly = margin + 20 * i
        out.write(f'<rect x="{lx:.0f}" y="{ly}" width="12" height="12" fill="{color[c]}"/>\n')
        out.write(f'<text x="{lx + 18:.0f}" y="{ly + 11}" font-size="12" '
                  f'font-family="sans-serif">{_escape(class_names.get(c, str(c)))}</text>\n')
    ev = proj.explained_variance
    out.write(f'<text x="{margin}" y="{height - 12}" font-size="11" font-family="sans-serif">'
              f'explained variance: {ev[0]:.4g}, {ev[1]:.4g}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_scatter(proj: Projected2D, class_names, path, title: str | None = None) -> tuple[Path, Path]:
    """Write an SVG scatter plot plus a ``x,y,label,class_name`` CSV beside it."""
    if len(proj.points) == 0:
        raise DegenerateDataError("nothing to plot")
    if isinstance(class_names, (list, tuple)):
        class_names = dict(enumerate(class_names))
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    svg = render_svg(proj, class_names, title=title)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "label", "class_name"])
    for (x, y), lab in zip(proj.points, proj.labels):
        w.writerow([repr(float(x)), repr(float(y)), int(lab), class_names.get(int(lab), str(lab))])
    try:
        path.write_text(svg)
        csv_path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write scatter output to {path}: {exc.strerror}") from exc
    return path, csv_path
