"""Synthetic bitemporal scenes from a linear mixing model."""
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter


@dataclass
class SyntheticSpec:
    height: int = 64
    width: int = 64
    bands: int = 16
    endmembers: int = 4
    n_blobs: int = 3
    coverage: float = 0.08  # target changed fraction when blobs are random
    blobs: list = field(default_factory=list)  # explicit (cy, cx, ry, rx) ellipses
    noise_sigma: float = 0.005
    smoothness: float = 4.0
    seed: int = 0

    def validate(self):
        if self.endmembers < 2:
            raise ValueError("need at least two endmembers")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        if min(self.height, self.width, self.bands) < 1:
            raise ValueError("scene dimensions must be positive")
        return self


def _endmembers(rng, n, bands):
    """Smooth positive spectra, pairwise non-parallel."""
    t = np.linspace(0, 1, bands)
    spectra = []
    for k in range(n):
        centre = rng.uniform(0, 1)
        width = rng.uniform(0.15, 0.4)
        base = rng.uniform(0.1, 0.3)
        amp = rng.uniform(0.3, 0.6)
        slope = rng.uniform(-0.2, 0.2)
        s = base + amp * np.exp(-0.5 * ((t - centre) / width) ** 2) + slope * t
        spectra.append(np.clip(s, 0.05, None))
    return np.array(spectra)


def _abundances(rng, n, h, w, smoothness):
    fields_ = np.stack([gaussian_filter(rng.normal(size=(h, w)), smoothness, mode="wrap") for _ in range(n)], -1)
    fields_ /= fields_.std() + 1e-12
    e = np.exp(2.0 * fields_)
    return e / e.sum(axis=-1, keepdims=True)


def _random_blobs(rng, h, w, n_blobs, coverage):
    area = coverage * h * w / max(n_blobs, 1)
    blobs = []
    for _ in range(n_blobs):
        aspect = rng.uniform(0.6, 1.6)
        ry = np.sqrt(area * aspect / np.pi)
        rx = np.sqrt(area / aspect / np.pi)
        cy = rng.uniform(ry, h - ry)
        cx = rng.uniform(rx, w - rx)
        blobs.append((cy, cx, ry, rx))
    return blobs


def change_mask(h, w, blobs):
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    mask = np.zeros((h, w), dtype=bool)
    for cy, cx, ry, rx in blobs:
        mask |= ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    return mask


def synth_generate(spec=None):
    """Return ``(x1, x2, gt)``; cubes are (H, W, C) float64, gt (H, W) uint8.

    Inside each change region the second date takes a different abundance
    mix dominated by an endmember that is not the region's dominant one.
    """
    spec = (spec or SyntheticSpec()).validate()
    rng = np.random.default_rng(spec.seed)
    h, w, c = spec.height, spec.width, spec.bands
    e = _endmembers(rng, spec.endmembers, c)
    a1 = _abundances(rng, spec.endmembers, h, w, spec.smoothness)
    blobs = spec.blobs or (_random_blobs(rng, h, w, spec.n_blobs, spec.coverage) if spec.n_blobs else [])
    a2 = a1.copy()
    gt = np.zeros((h, w), dtype=bool)
    for blob in blobs:
        m = change_mask(h, w, [blob])
        dominant = np.argmax(a1[m].mean(axis=0))
        choices = [k for k in range(spec.endmembers) if k != dominant]
        new = rng.choice(choices)
        mix = rng.dirichlet(np.ones(spec.endmembers)) * 0.2
        mix[new] += 0.8
        a2[m] = mix
        gt |= m
    x1 = a1 @ e
    x2 = a2 @ e
    if spec.noise_sigma > 0:
        x1 = x1 + rng.normal(0, spec.noise_sigma, x1.shape)
        x2 = x2 + rng.normal(0, spec.noise_sigma, x2.shape)
    return x1, x2, gt.astype(np.uint8)
