"""Defense specifications and their application to images and batches.

Parameters left unset resolve to defaults tuned for 299x299 inputs, scaled to
the image at hand (see :func:`resolve`).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .imagecore import as_image, clip
from .jpegcodec import jpeg_defense
from .pca import pca_denoise_patches, pca_denoise_rows
from .spectral import REFERENCE_SIDE, default_radius, lowpass_filter
from .wavelet import max_levels, soft_threshold_defense, wavelet_approx_defense

METHODS = ("none", "lowpass", "pca_rows", "pca_patches", "jpeg", "wavelet_approx", "soft_threshold")

_PARAMS = {
    "none": (),
    "lowpass": ("radius",),
    "pca_rows": ("k",),
    "pca_patches": ("patch", "k"),
    "jpeg": ("quality",),
    "wavelet_approx": ("levels",),
    "soft_threshold": ("levels",),
}

REFERENCE_DEFAULTS = {
    "lowpass": {"radius": 65.0},
    "pca_rows": {"k": 36},
    "pca_patches": {"patch": 13, "k": 13},
    "jpeg": {"quality": 23},
    "wavelet_approx": {"levels": 1},
    "soft_threshold": {"levels": 2},
}


@dataclass(frozen=True)
class DefenseSpec:
    method: str = "none"
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown defense {self.method!r}; choose from {METHODS}")
        unknown = set(self.params) - set(_PARAMS[self.method])
        if unknown:
            raise ConfigError(f"defense {self.method!r} does not take {sorted(unknown)}")
        for key, value in self.params.items():
            if value is None:
                continue
            if key == "radius":
                if not (isinstance(value, (int, float)) and value > 0):
                    raise ConfigError("lowpass radius must be a positive number")
            elif key == "quality":
                if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 100:
                    raise ConfigError("jpeg quality must be an integer in [1, 100]")
            elif isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{self.method} {key} must be a positive integer")

    @property
    def name(self):
        return self.label or self.method

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        method = data.pop("method", "none")
        label = data.pop("label", "")
        params = dict(data.pop("params", {}))
        params.update(data)
        return cls(method=method, params=params, label=label)

    def __hash__(self):
        return hash((self.method, tuple(sorted(self.params.items())), self.label))


def resolve(spec, shape):
    """Fill unset parameters for an image of ``shape`` ``(H, W, C)``.

    The 299x299 defaults are scaled by ``s = min(H, W) / 299``: the low-pass
    radius and the row-PCA rank linearly, the patch side by ``sqrt(s)`` with
    the retained fraction of patch dimensions kept fixed.  Images at least
    299 pixels on the short side use the defaults unchanged.
    """
    h, w = shape[0], shape[1]
    params = {k: v for k, v in spec.params.items() if v is not None}
    s = min(1.0, min(h, w) / REFERENCE_SIDE)
    if spec.method == "lowpass":
        params.setdefault("radius", default_radius(h, w) if s < 1 else REFERENCE_DEFAULTS["lowpass"]["radius"])
    elif spec.method == "pca_rows":
        params.setdefault("k", min(min(h, w), max(1, math.ceil(36 * s))))
    elif spec.method == "pca_patches":
        if "patch" not in params:
            params["patch"] = min(min(h, w), max(2, round(13 * math.sqrt(s))))
        if "k" not in params:
            frac = 13 / 13**2
            params["k"] = max(1, round(frac * params["patch"] ** 2))
    elif spec.method in ("wavelet_approx", "soft_threshold"):
        params.setdefault("levels", min(REFERENCE_DEFAULTS[spec.method]["levels"], max_levels(h, w)))
    elif spec.method == "jpeg":
        params.setdefault("quality", 23)
    return params


def apply(spec, img):
    img = as_image(img)
    p = resolve(spec, img.shape)
    if spec.method == "none":
        return clip(img)
    if spec.method == "lowpass":
        return lowpass_filter(img, p["radius"])
    if spec.method == "pca_rows":
        return pca_denoise_rows(img, p["k"])
    if spec.method == "pca_patches":
        return pca_denoise_patches(img, p["patch"], p["k"])
    if spec.method == "jpeg":
        return jpeg_defense(img, p["quality"])
    if spec.method == "wavelet_approx":
        return wavelet_approx_defense(img, p["levels"])
    return soft_threshold_defense(img, p["levels"])


def apply_batch(spec, batch, threads=1):
    """Apply ``spec`` to every image of an ``(N, H, W, C)`` batch, in order."""
    batch = np.asarray(batch, dtype=np.float64)
    if spec.method == "none":
        return clip(batch)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.stack(list(pool.map(lambda im: apply(spec, im), batch)))
    return np.stack([apply(spec, im) for im in batch])
