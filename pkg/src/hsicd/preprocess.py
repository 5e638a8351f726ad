"""Spectral angle map, two-class LDA projection, SLIC superpixels and the
superpixel graph (association, normalised association, adjacency)."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)


def sam_map(x1, x2, return_zero_count=False):
    """Per-pixel spectral angle (radians, in [0, pi]) between two cubes.

    Pixels where either spectrum has zero norm get angle 0.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError(f"cube shapes differ: {x1.shape} vs {x2.shape}")
    n1 = np.linalg.norm(x1, axis=-1)
    n2 = np.linalg.norm(x2, axis=-1)
    zero = (n1 == 0) | (n2 == 0)
    u1 = x1 / np.where(zero, 1.0, n1)[..., None]
    u2 = x2 / np.where(zero, 1.0, n2)[..., None]
    # half-angle form: exact 0 for identical directions and well conditioned
    # near 0 and pi, unlike arccos of the normalised dot product
    z = 2.0 * np.arctan2(np.linalg.norm(u1 - u2, axis=-1), np.linalg.norm(u1 + u2, axis=-1))
    z[zero] = 0.0
    n_zero = int(zero.sum())
    if n_zero:
        logger.warning("sam_map: %d zero-norm spectra mapped to angle 0", n_zero)
    if return_zero_count:
        return z, n_zero
    return z


@dataclass
class LdaAxis:
    """A fitted Fisher discriminant: project with ``x @ w + offset``."""

    w: np.ndarray
    offset: float

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.w + self.offset


def lda_fit(samples, labels, ridge=1e-6):
    """Two-class Fisher LDA.

    The within-class scatter is regularised by ``ridge * trace(Sw) / dim`` on
    the diagonal. The axis is unit-norm with sign fixed so class 1 projects
    above class 0, and the offset centres the class-mean midpoint at 0.
    """
    samples = np.asarray(samples, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if labels.all() or not labels.any():
        raise ValueError("degenerate LDA: need labelled samples of both classes")
    a, b = samples[~labels], samples[labels]
    mu0, mu1 = a.mean(axis=0), b.mean(axis=0)
    sw = (a - mu0).T @ (a - mu0) + (b - mu1).T @ (b - mu1)
    dim = sw.shape[0]
    reg = ridge * np.trace(sw) / dim
    if reg == 0:
        reg = ridge
    w = np.linalg.solve(sw + reg * np.eye(dim), mu1 - mu0)
    w /= np.linalg.norm(w)
    if (mu1 - mu0) @ w < 0:
        w = -w
    return LdaAxis(w, float(-0.5 * (mu0 + mu1) @ w))


def lda_project(x_concat, label_map, mask):
    """Fit on the masked pixels of an (H, W, D) cube and project every pixel.

    ``label_map`` holds 0/1 classes, ``mask`` selects the labelled pixels.
    Returns the (H, W, 1) projection and the fitted axis.
    """
    x_concat = np.asarray(x_concat, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    flat = x_concat.reshape(-1, x_concat.shape[-1])
    axis = lda_fit(flat[mask.reshape(-1)], np.asarray(label_map).reshape(-1)[mask.reshape(-1)])
    return axis.project(x_concat)[..., None], axis


@dataclass
class SuperpixelGraph:
    labels: np.ndarray  # (H, W) int, values 0..K-1
    O: np.ndarray  # (HW, K) binary association
    O_norm: np.ndarray  # (HW, K) column-normalised association
    A: np.ndarray  # (K, K) symmetric binary adjacency, zero diagonal

    @property
    def K(self):
        return self.O.shape[1]

    def __post_init__(self):
        self.labels = np.asarray(self.labels)


def build_graph(labels):
    """Association, normalised association and 4-neighbour adjacency."""
    labels = np.asarray(labels)
    h, w = labels.shape
    _, flat = np.unique(labels, return_inverse=True)
    lab = flat.reshape(h, w)
    k = int(lab.max()) + 1
    o = np.zeros((h * w, k))
    o[np.arange(h * w), lab.reshape(-1)] = 1.0
    o_norm = o / o.sum(axis=0, keepdims=True)
    a = np.zeros((k, k))
    for s, t in ((lab[:, :-1], lab[:, 1:]), (lab[:-1, :], lab[1:, :])):
        diff = s != t
        a[s[diff], t[diff]] = 1.0
        a[t[diff], s[diff]] = 1.0
    return SuperpixelGraph(lab, o, o_norm, a)


def _grid_centers(h, w, n_target):
    step = np.sqrt(h * w / n_target)
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    ys = (np.arange(ny) + 0.5) * h / ny
    xs = (np.arange(nx) + 0.5) * w / nx
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    return cy.ravel(), cx.ravel(), step


def slic(feature_img, s=20, compactness=10.0, n_iter=10):
    """Superpixels by local k-means in (feature, y, x) space.

    Roughly ``H*W/s`` clusters are seeded on a regular grid and nudged to the
    flattest pixel of their 3x3 neighbourhood; there is no randomness, so the
    segmentation is a pure function of the image. The single feature band is
    standardised and weighted against grid-normalised coordinates by
    ``compactness``. Fragments smaller than 0.35 of the nominal size, and
    every disconnected piece, are merged into a neighbouring region so each
    final superpixel is 4-connected.
    """
    f = np.asarray(feature_img, dtype=float)
    if f.ndim == 3:
        if f.shape[2] != 1:
            raise ValueError("slic expects a single-band feature image")
        f = f[..., 0]
    h, w = f.shape
    if s < 1 or h * w / s < 2:
        raise ValueError(f"segmentation scale s={s} leaves fewer than 2 superpixels")
    std = f.std()
    f = (f - f.mean()) / std if std > 0 else np.zeros_like(f)
    # Feature distances are expressed on a 0-100-like range so that the
    # compactness value has the same meaning as for Lab colour SLIC.
    f = f * 10.0
    cy, cx, step = _grid_centers(h, w, h * w / s)
    cy, cx = _perturb(f, cy, cx)
    cf = f[cy.astype(int), cx.astype(int)]
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    wspace = (compactness / step) ** 2
    labels = np.zeros((h, w), dtype=np.int64)
    for _ in range(n_iter):
        dist = np.full((h, w), np.inf)
        for k in range(len(cy)):
            y0, y1 = max(0, int(cy[k] - 2 * step)), min(h, int(cy[k] + 2 * step) + 1)
            x0, x1 = max(0, int(cx[k] - 2 * step)), min(w, int(cx[k] + 2 * step) + 1)
            d = (f[y0:y1, x0:x1] - cf[k]) ** 2 + wspace * (
                (yy[y0:y1, x0:x1] - cy[k]) ** 2 + (xx[y0:y1, x0:x1] - cx[k]) ** 2
            )
            win = dist[y0:y1, x0:x1]
            better = d < win
            win[better] = d[better]
            labels[y0:y1, x0:x1][better] = k
        counts = np.bincount(labels.ravel(), minlength=len(cy)).astype(float)
        live = counts > 0
        cy[live] = np.bincount(labels.ravel(), yy.ravel(), len(cy))[live] / counts[live]
        cx[live] = np.bincount(labels.ravel(), xx.ravel(), len(cy))[live] / counts[live]
        cf[live] = np.bincount(labels.ravel(), f.ravel(), len(cy))[live] / counts[live]
    labels = enforce_connectivity(labels, min_size=max(1, int(round(0.35 * s))))
    return build_graph(labels)


def _perturb(f, cy, cx):
    """Move each seed to the lowest-gradient pixel of its 3x3 neighbourhood."""
    h, w = f.shape
    gy, gx = np.gradient(f) if min(h, w) > 1 else (np.zeros_like(f), np.zeros_like(f))
    grad = gy ** 2 + gx ** 2
    ny, nx = cy.copy(), cx.copy()
    for k in range(len(cy)):
        y, x = int(cy[k]), int(cx[k])
        y0, y1 = max(0, y - 1), min(h, y + 2)
        x0, x1 = max(0, x - 1), min(w, x + 2)
        win = grad[y0:y1, x0:x1]
        if win.min() < grad[y, x]:
            dy, dx = divmod(int(np.argmin(win)), x1 - x0)
            ny[k], nx[k] = y0 + dy, x0 + dx
    return ny.astype(float), nx.astype(float)


def enforce_connectivity(labels, min_size):
    """Relabel so every region is 4-connected and no region is tiny.

    Each connected piece of each label becomes its own region; pieces smaller
    than ``min_size`` are absorbed (smallest first) into the adjacent region
    with which they share the longest border. Absorbing a piece into a region
    it touches keeps that region connected.
    """
    h, w = labels.shape
    comp = np.zeros((h, w), dtype=np.int64)
    n = 0
    for lab in np.unique(labels):
        cc, m = ndimage.label(labels == lab)
        comp[cc > 0] = cc[cc > 0] + n
        n += m
    comp -= 1
    while True:
        sizes = np.bincount(comp.ravel(), minlength=n)
        small = [c for c in np.argsort(sizes, kind="stable") if 0 < sizes[c] < min_size]
        if not small or np.count_nonzero(sizes) <= 1:
            break
        c = small[0]
        border = _border_counts(comp, c)
        if not border:
            break
        target = max(sorted(border), key=lambda t: border[t])
        comp[comp == c] = target
    _, flat = np.unique(comp, return_inverse=True)
    return flat.reshape(h, w)


def _border_counts(comp, c):
    counts = {}
    m = comp == c
    for s, t, ms, mt in (
        (comp[:, :-1], comp[:, 1:], m[:, :-1], m[:, 1:]),
        (comp[:-1, :], comp[1:, :], m[:-1, :], m[1:, :]),
    ):
        for a, b in ((t[ms & ~mt], None), (s[mt & ~ms], None)):
            for v in a:
                counts[int(v)] = counts.get(int(v), 0) + 1
    return counts


def graph_encode(x_pixels, graph):
    """Superpixel means: O_norm^T (HW, C) -> (K, C)."""
    return graph.O_norm.T @ np.asarray(x_pixels).reshape(graph.O.shape[0], -1)


def graph_decode(v, graph):
    """Broadcast node features back to pixels: O (K, C) -> (HW, C)."""
    return graph.O @ np.asarray(v)
