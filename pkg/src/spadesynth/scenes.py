"""Procedural (mask, image) scene generator and dataset I/O.

A scene is a stack of integer-rasterized shapes over a background label.
Each label owns a base color, a stripe pattern, and a noise amplitude; the
whole scene gets a small global tint so that appearance carries information
beyond the mask. All geometry uses integer arithmetic and all randomness
comes from the counter-based generator, so identical seeds give identical
bytes on any platform. Images are quantized to 8 bits at generation time;
training consumes exactly what the files store.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import pnm
from .errors import ConfigError, DimensionError, ParseError
from .masks import SegMask
from .rng import SplitMix64

# base colors in [-1, 1], pairwise max-channel distance >= 1.2; tint, stripe,
# and noise deviations stay well inside the 0.6 nearest-color margin
PALETTE = np.array(
    [
        [-0.8, -0.8, -0.8],
        [0.8, -0.6, -0.6],
        [-0.6, 0.8, -0.6],
        [-0.6, -0.6, 0.8],
        [0.8, 0.8, -0.4],
        [0.8, -0.4, 0.8],
    ],
    dtype=np.float32,
)

TINT_RANGE = 0.10
STRIPE_AMPS = (0.0, 0.06, 0.05, 0.06, 0.04, 0.05)
STRIPE_PERIODS = (1, 2, 3, 4, 3, 2)
NOISE_AMPS = (0.04, 0.03, 0.04, 0.03, 0.04, 0.03)


@dataclass
class TextureMap:
    """Per-label appearance: base color, noise amplitude, stripe pattern."""

    base: np.ndarray  # (L, 3) in [-1, 1]
    noise_amp: tuple
    stripe_amp: tuple
    stripe_period: tuple

    def __post_init__(self):
        L = self.base.shape[0]
        for i in range(L):
            for j in range(i + 1, L):
                gap = float(np.max(np.abs(self.base[i] - self.base[j])))
                if gap < 0.25:
                    raise ConfigError(
                        f"labels {i} and {j} have base-color distance {gap:.3f} < 0.25"
                    )


def default_texture_map(num_labels: int = 6) -> TextureMap:
    if num_labels > PALETTE.shape[0]:
        raise ConfigError(f"palette supports up to {PALETTE.shape[0]} labels")
    return TextureMap(
        base=PALETTE[:num_labels].copy(),
        noise_amp=NOISE_AMPS[:num_labels],
        stripe_amp=STRIPE_AMPS[:num_labels],
        stripe_period=STRIPE_PERIODS[:num_labels],
    )


# shape kinds: ("rectangle", label, x0, y0, x1, y1)
#              ("ellipse",   label, cx, cy, rx, ry)
#              ("half-plane", label, a, b, c)  meaning a*x + b*y <= c


@dataclass
class SceneSpec:
    seed: int
    resolution: int = 32
    num_labels: int = 6
    shapes: list = field(default_factory=list)
    textures: TextureMap | None = None

    def __post_init__(self):
        if self.textures is None:
            self.textures = default_texture_map(self.num_labels)
        if len(self.shapes) >= self.num_labels:
            raise ConfigError(
                f"{len(self.shapes)} shapes will not fit in {self.num_labels} labels"
            )


def _paint(shape, labels: np.ndarray) -> None:
    kind, label = shape[0], shape[1]
    size = labels.shape[0]
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    if kind == "rectangle":
        _, _, x0, y0, x1, y1 = shape
        hit = (xx >= x0) & (xx <= x1) & (yy >= y0) & (yy <= y1)
    elif kind == "ellipse":
        _, _, cx, cy, rx, ry = shape
        hit = ((xx - cx) ** 2) * ry * ry + ((yy - cy) ** 2) * rx * rx <= rx * rx * ry * ry
    elif kind == "half-plane":
        _, _, a, b, c = shape
        hit = a * xx + b * yy <= c
    else:
        raise ConfigError(f"unknown shape kind {kind!r}")
    labels[hit] = label


def generate_scene(spec: SceneSpec) -> tuple[SegMask, np.ndarray]:
    """(mask, image); image is float32 (1, 3, H, W) in [-1, 1], already
    8-bit-quantized so it round-trips losslessly through file I/O."""
    size = spec.resolution
    labels = np.zeros((size, size), dtype=np.int64)
    for shape in spec.shapes:
        if not 0 <= shape[1] < spec.num_labels:
            raise ConfigError(f"shape label {shape[1]} out of range")
        _paint(shape, labels)
    mask = SegMask(labels, spec.num_labels)

    rng = SplitMix64(spec.seed).spawn("texture")
    tint = (rng.uniform((3,)) * 2 - 1) * TINT_RANGE
    noise = rng.uniform((3, size, size)) * 2 - 1

    tex = spec.textures
    img = tex.base[labels].transpose(2, 0, 1).astype(np.float64)  # (3, H, W)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    for lab in range(spec.num_labels):
        sel = labels == lab
        if not sel.any():
            continue
        period = tex.stripe_period[lab]
        stripe = np.where(((xx + yy) // period) % 2 == 0, 1.0, -1.0)
        img[:, sel] += tex.stripe_amp[lab] * stripe[sel]
        img[:, sel] += tex.noise_amp[lab] * noise[:, sel]
    img += tint[:, None, None]

    quantized = np.clip(np.round((img + 1.0) * 127.5), 0, 255).astype(np.uint8)
    out = (quantized.astype(np.float32) / 127.5) - 1.0
    return mask, out[None, :, :, :]


def random_scene_spec(
    seed: int, resolution: int = 32, num_labels: int = 6, textures: TextureMap | None = None
) -> SceneSpec:
    """Background plus 2 to L-2 random shapes with labels drawn from 1..L-1."""
    rng = SplitMix64(seed).spawn("geometry")
    count = 2 + int(rng.integers(max(1, num_labels - 3)))
    shapes = []
    s = resolution
    for _ in range(count):
        label = 1 + int(rng.integers(num_labels - 1))
        kind = ("rectangle", "ellipse", "half-plane")[int(rng.integers(3))]
        if kind == "rectangle":
            x0 = int(rng.integers(s - 4))
            y0 = int(rng.integers(s - 4))
            x1 = min(s - 1, x0 + 3 + int(rng.integers(s // 2)))
            y1 = min(s - 1, y0 + 3 + int(rng.integers(s // 2)))
            shapes.append(("rectangle", label, x0, y0, x1, y1))
        elif kind == "ellipse":
            rx = 3 + int(rng.integers(s // 4))
            ry = 3 + int(rng.integers(s // 4))
            cx = int(rng.integers(s))
            cy = int(rng.integers(s))
            shapes.append(("ellipse", label, cx, cy, rx, ry))
        else:
            a = int(rng.integers(5)) - 2
            b = int(rng.integers(5)) - 2
            if a == 0 and b == 0:
                a = 1
            c = (a + b) * int(rng.integers(s))
            shapes.append(("half-plane", label, a, b, c))
    return SceneSpec(
        seed=seed, resolution=resolution, num_labels=num_labels,
        shapes=shapes, textures=textures,
    )


def save_pair(stem: str, mask: SegMask, image: np.ndarray) -> None:
    """stem.ppm for the image, stem.pgm for the labels."""
    img = np.asarray(image)
    if img.ndim == 4:
        img = img[0]
    u8 = np.clip(np.round((img + 1.0) * 127.5), 0, 255).astype(np.uint8)
    pnm.write_ppm(stem + ".ppm", u8.transpose(1, 2, 0))
    pnm.write_pgm(stem + ".pgm", mask.labels.astype(np.uint8))


def load_pair(stem: str, num_labels: int) -> tuple[SegMask, np.ndarray]:
    labels = pnm.read_pgm(stem + ".pgm")
    if labels.size and int(labels.max()) >= num_labels:
        raise ParseError(
            f"{stem}.pgm: label {int(labels.max())} out of range for {num_labels} labels"
        )
    img_u8 = pnm.read_ppm(stem + ".ppm")
    if img_u8.shape[:2] != labels.shape:
        raise DimensionError(
            f"{stem}: image is {img_u8.shape[:2]} but mask is {labels.shape}"
        )
    img = (img_u8.astype(np.float32) / 127.5) - 1.0
    return SegMask(labels, num_labels), img.transpose(2, 0, 1)[None, :, :, :]


class Dataset:
    """In-memory pair list; desk-scale sets are a few megabytes."""

    def __init__(self, masks_: list[SegMask], images: np.ndarray, seed: int):
        self.masks = masks_
        self.images = images  # (N, 3, H, W) float32
        self.seed = seed

    def __len__(self):
        return len(self.masks)


def make_dataset(
    root: str,
    n_train: int,
    n_val: int,
    seed: int,
    resolution: int = 32,
    num_labels: int = 6,
) -> None:
    """Write data/{train,val}/NNNNN.{ppm,pgm} plus index.txt manifests.

    Scene seeds come from one counter-based stream; any split missing a label
    draws replacement scenes from the same stream until all labels appear.
    """
    stream = SplitMix64(seed).spawn("scenes")
    for split, count in (("train", n_train), ("val", n_val)):
        split_dir = os.path.join(root, split)
        os.makedirs(split_dir, exist_ok=True)
        pairs = []
        while True:
            while len(pairs) < count:
                scene_seed = int(stream.raw(1)[0])
                spec = random_scene_spec(scene_seed, resolution, num_labels)
                pairs.append(generate_scene(spec))
            seen = set()
            for mask, _ in pairs:
                seen.update(np.unique(mask.labels).tolist())
            if seen == set(range(num_labels)) or count < num_labels:
                break
            pairs.pop(0)  # recycle the oldest scene for a fresh draw
        stems = []
        for i, (mask, img) in enumerate(pairs):
            stem = os.path.join(split_dir, f"{i:05d}")
            save_pair(stem, mask, img)
            stems.append(f"{i:05d}")
        with open(os.path.join(split_dir, "index.txt"), "w") as fh:
            fh.write(f"seed={seed}\nlabels={num_labels}\nresolution={resolution}\n")
            fh.writelines(s + "\n" for s in stems)


def load_dataset(split_dir: str) -> Dataset:
    index = os.path.join(split_dir, "index.txt")
    if not os.path.exists(index):
        raise ConfigError(f"no index.txt under {split_dir}")
    meta, stems = {}, []
    with open(index) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k] = int(v)
            else:
                stems.append(line)
    num_labels = meta.get("labels", 6)
    pairs = [load_pair(os.path.join(split_dir, s), num_labels) for s in stems]
    images = np.concatenate([img for _, img in pairs], axis=0)
    return Dataset([m for m, _ in pairs], images, meta.get("seed", 0))
