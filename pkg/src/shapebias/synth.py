"""Synthetic stand-in datasets in the real on-disk formats.

For benches without the actual MNIST/notMNIST/CIFAR10 files this module
fabricates replacements with the same shapes, formats and directory layout:
digits and letters are rendered from the TrueType fonts that ship with
matplotlib (rotated, sheared, scaled and shifted per sample), and the color
set pairs a per-class shape with a per-class hue palette on a smooth random
background. Everything is written through the standard formats (IDX, CIFAR
binary batches, PNG class trees) and read back by the ordinary loaders, so
the whole pipeline downstream of ingest is identical to a run on real data.

Generation is deterministic per seed. A STANDIN_MANIFEST.json at the root
records the generator version, sizes and seeds.
"""

from __future__ import annotations

import glob
import gzip
import json
import math
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFilter, ImageFont

GENERATOR_VERSION = 3

DIGITS = "0123456789"
LETTERS = "ABCDEFGHIJ"

OBJECT_CLASS_NAMES = (
    "disk", "box", "wedge", "star", "cross",
    "ring", "diamond", "bars", "vee", "blob",
)
# base hue (degrees) per object class; color is informative about the label
_OBJECT_HUES = (0, 220, 120, 55, 290, 180, 30, 330, 90, 255)


# ---------------------------------------------------------------------------
# IDX / CIFAR writers (inverse of loaders.read_idx / load_cifar10)


def write_idx_images(path: Path, images: np.ndarray, compress: bool = False):
    images = np.ascontiguousarray(images, dtype=np.uint8)
    n, h, w = images.shape
    header = struct.pack(">BBBB", 0, 0, 0x08, 3) + struct.pack(">3I", n, h, w)
    _write_blob(path, header + images.tobytes(), compress)


def write_idx_labels(path: Path, labels: np.ndarray, compress: bool = False):
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    header = struct.pack(">BBBB", 0, 0, 0x08, 1) + struct.pack(">I", len(labels))
    _write_blob(path, header + labels.tobytes(), compress)


def _write_blob(path: Path, blob: bytes, compress: bool):
    path.parent.mkdir(parents=True, exist_ok=True)
    if compress:
        with gzip.open(path, "wb") as fh:
            fh.write(blob)
    else:
        path.write_bytes(blob)


def write_cifar_batches(dir_path: Path, images: np.ndarray, labels: np.ndarray,
                        records_per_batch: int = 10_000, prefix: str = "data_batch"):
    """Write (n,32,32,3) uint8 images as CIFAR10 binary batch files."""
    dir_path.mkdir(parents=True, exist_ok=True)
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    planes = images.transpose(0, 3, 1, 2).reshape(len(images), -1)  # RRR GGG BBB
    n_batches = max(1, math.ceil(len(images) / records_per_batch))
    for b in range(n_batches):
        lo, hi = b * records_per_batch, min((b + 1) * records_per_batch, len(images))
        rows = [bytes([labels[i]]) + planes[i].tobytes() for i in range(lo, hi)]
        name = f"{prefix}_{b + 1}.bin" if prefix == "data_batch" else f"{prefix}.bin"
        (dir_path / name).write_bytes(b"".join(rows))


# ---------------------------------------------------------------------------
# glyph rendering


def _font_paths() -> list[str]:
    import matplotlib

    ttf_dir = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "fonts", "ttf")
    wanted = [
        "DejaVuSans.ttf", "DejaVuSans-Bold.ttf", "DejaVuSans-Oblique.ttf",
        "DejaVuSans-BoldOblique.ttf", "DejaVuSansMono.ttf", "DejaVuSansMono-Bold.ttf",
        "DejaVuSansMono-Oblique.ttf", "DejaVuSerif.ttf", "DejaVuSerif-Bold.ttf",
        "DejaVuSerif-Italic.ttf", "DejaVuSerif-BoldItalic.ttf",
        "STIXGeneral.ttf", "STIXGeneralBol.ttf", "STIXGeneralItalic.ttf",
        "cmr10.ttf", "cmb10.ttf", "cmss10.ttf", "cmtt10.ttf",
    ]
    found = [os.path.join(ttf_dir, w) for w in wanted if os.path.exists(os.path.join(ttf_dir, w))]
    found += sorted(glob.glob("/usr/share/fonts/truetype/dejavu/*.ttf"))
    # dedupe by basename, keep order
    seen, out = set(), []
    for p in found:
        b = os.path.basename(p)
        if b not in seen:
            seen.add(b)
            out.append(p)
    if len(out) < 4:
        raise RuntimeError("not enough TrueType fonts available to synthesize glyph data")
    return out


class GlyphRenderer:
    """Render single characters as 28x28 grayscale rasters with pose jitter."""

    def __init__(self, chars: str, canvas: int = 56, out_size: int = 28):
        self.chars = chars
        self.canvas = canvas
        self.out_size = out_size
        self._fonts: dict[tuple[int, int], ImageFont.FreeTypeFont] = {}
        self._paths = [p for p in _font_paths() if self._usable(p)]
        if len(self._paths) < 4:
            raise RuntimeError("not enough fonts render all requested characters")

    def _usable(self, path: str) -> bool:
        """Font must actually draw every requested character."""
        try:
            font = ImageFont.truetype(path, 30)
        except OSError:
            return False
        for ch in self.chars:
            img = Image.new("L", (self.canvas, self.canvas), 0)
            ImageDraw.Draw(img).text((self.canvas / 2, self.canvas / 2), ch,
                                     font=font, fill=255, anchor="mm")
            if (np.asarray(img) > 32).sum() < 20:
                return False
        return True

    @property
    def n_fonts(self) -> int:
        return len(self._paths)

    def _font(self, idx: int, size: int) -> ImageFont.FreeTypeFont:
        key = (idx, size)
        if key not in self._fonts:
            self._fonts[key] = ImageFont.truetype(self._paths[idx], size)
        return self._fonts[key]

    def render(self, char: str, rng: np.random.Generator) -> np.ndarray:
        cv = self.canvas
        font_idx = int(rng.integers(len(self._paths)))
        size = int(cv * rng.uniform(0.52, 0.72))
        img = Image.new("L", (cv, cv), 0)
        draw = ImageDraw.Draw(img)
        draw.text((cv / 2, cv / 2), char, font=self._font(font_idx, size),
                  fill=255, anchor="mm")

        # inverse affine about the canvas center: rotation, shear, scale, shift
        theta = math.radians(rng.uniform(-12, 12))
        shear = rng.uniform(-0.18, 0.18)
        sx = rng.uniform(0.82, 1.1)
        sy = rng.uniform(0.82, 1.1)
        tx = rng.uniform(-2.2, 2.2) * cv / self.out_size
        ty = rng.uniform(-2.2, 2.2) * cv / self.out_size
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        # forward map: scale -> shear -> rotate -> translate; PIL wants inverse
        fwd = np.array([
            [cos_t * sx, cos_t * shear * sy - sin_t * sy, tx],
            [sin_t * sx, sin_t * shear * sy + cos_t * sy, ty],
            [0, 0, 1],
        ])
        inv = np.linalg.inv(fwd)
        c = cv / 2
        # conjugate with the center shift so the transform pivots mid-canvas
        a, b_, c0 = inv[0]
        d, e, f0 = inv[1]
        coeffs = (a, b_, c0 + c - a * c - b_ * c, d, e, f0 + c - d * c - e * c)
        img = img.transform((cv, cv), Image.AFFINE, coeffs, resample=Image.BILINEAR)

        blur = rng.uniform(0.0, 0.9)
        if blur > 0.15:
            img = img.filter(ImageFilter.GaussianBlur(blur))
        img = img.resize((self.out_size, self.out_size), Image.LANCZOS)
        arr = np.asarray(img, dtype=np.float32)
        peak = arr.max()
        if peak > 0:
            arr *= rng.uniform(0.82, 1.0) * 255.0 / peak
        return np.clip(arr, 0, 255).astype(np.uint8)

    def batch(self, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """n glyphs, balanced over classes (class = index into chars)."""
        rng = np.random.default_rng(seed)
        k = len(self.chars)
        labels = np.arange(n) % k
        rng.shuffle(labels)
        images = np.empty((n, self.out_size, self.out_size), dtype=np.uint8)
        for i, lbl in enumerate(labels):
            images[i] = self.render(self.chars[lbl], rng)
        return images, labels.astype(np.int64)


# ---------------------------------------------------------------------------
# color object images (CIFAR10 stand-in)


def _hsv_to_rgb(h, s, v):
    h = (h % 360.0) / 60.0
    i = int(h) % 6
    f = h - int(h)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return tuple(int(round(255 * x)) for x in rgb)


def _draw_object(draw: ImageDraw.ImageDraw, cls: int, cx, cy, r, rot, color):
    if cls == 0:  # disk
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=color)
        return
    if cls == 5:  # ring
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=color,
                     width=max(2, int(r * 0.45)))
        return
    if cls == 9:  # blob: three overlapping disks
        for dx, dy, rr in ((-0.5, 0.2, 0.7), (0.5, 0.25, 0.65), (0.0, -0.45, 0.75)):
            draw.ellipse([cx + dx * r - rr * r, cy + dy * r - rr * r,
                          cx + dx * r + rr * r, cy + dy * r + rr * r], fill=color)
        return

    def poly(points):
        pts = []
        for px, py in points:
            qx = px * math.cos(rot) - py * math.sin(rot)
            qy = px * math.sin(rot) + py * math.cos(rot)
            pts.append((cx + qx * r, cy + qy * r))
        draw.polygon(pts, fill=color)

    if cls == 1:  # box
        poly([(-1, -1), (1, -1), (1, 1), (-1, 1)])
    elif cls == 2:  # wedge
        poly([(0, -1.1), (1.05, 0.85), (-1.05, 0.85)])
    elif cls == 3:  # star
        pts = []
        for i in range(10):
            ang = i * math.pi / 5 - math.pi / 2
            rad = 1.15 if i % 2 == 0 else 0.48
            pts.append((rad * math.cos(ang), rad * math.sin(ang)))
        poly(pts)
    elif cls == 4:  # cross
        poly([(-0.35, -1.1), (0.35, -1.1), (0.35, -0.35), (1.1, -0.35), (1.1, 0.35),
              (0.35, 0.35), (0.35, 1.1), (-0.35, 1.1), (-0.35, 0.35), (-1.1, 0.35),
              (-1.1, -0.35), (-0.35, -0.35)])
    elif cls == 6:  # diamond
        poly([(0, -1.2), (0.8, 0), (0, 1.2), (-0.8, 0)])
    elif cls == 7:  # bars
        poly([(-1.1, -1.0), (1.1, -1.0), (1.1, -0.55), (-1.1, -0.55)])
        poly([(-1.1, -0.2), (1.1, -0.2), (1.1, 0.25), (-1.1, 0.25)])
        poly([(-1.1, 0.6), (1.1, 0.6), (1.1, 1.05), (-1.1, 1.05)])
    elif cls == 8:  # vee
        poly([(-1.1, -1.0), (-0.55, -1.0), (0, 0.45), (0.55, -1.0), (1.1, -1.0),
              (0.35, 1.05), (-0.35, 1.05)])


def render_object_image(cls: int, rng: np.random.Generator, out_size: int = 32) -> np.ndarray:
    up = out_size * 2
    # smooth two-color background
    c0 = np.array([rng.uniform(30, 225) for _ in range(3)])
    c1 = np.array([rng.uniform(30, 225) for _ in range(3)])
    ramp = np.linspace(0, 1, up)
    axis = rng.integers(2)
    grad = np.broadcast_to(ramp[:, None] if axis == 0 else ramp[None, :], (up, up))
    bg = c0 + (c1 - c0) * grad[..., None]
    bg += rng.normal(0, 6, size=(up, up, 3))
    img = Image.fromarray(np.clip(bg, 0, 255).astype(np.uint8), "RGB")

    hue = _OBJECT_HUES[cls] + rng.uniform(-18, 18)
    color = _hsv_to_rgb(hue, rng.uniform(0.65, 1.0), rng.uniform(0.6, 1.0))
    draw = ImageDraw.Draw(img)
    cx = up / 2 + rng.uniform(-0.12, 0.12) * up
    cy = up / 2 + rng.uniform(-0.12, 0.12) * up
    r = up * rng.uniform(0.22, 0.34)
    _draw_object(draw, cls, cx, cy, r, rng.uniform(0, 2 * math.pi), color)

    img = img.resize((out_size, out_size), Image.LANCZOS)
    return np.asarray(img, dtype=np.uint8)


def object_batch(n: int, seed: int, out_size: int = 32) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 10
    rng.shuffle(labels)
    images = np.empty((n, out_size, out_size, 3), dtype=np.uint8)
    for i, lbl in enumerate(labels):
        images[i] = render_object_image(int(lbl), rng)
    return images, labels.astype(np.int64)


# ---------------------------------------------------------------------------
# top-level writers


def make_mnist_standin(root, n_train: int, n_test: int, seed: int):
    renderer = GlyphRenderer(DIGITS)
    tr_img, tr_lbl = renderer.batch(n_train, seed)
    te_img, te_lbl = renderer.batch(n_test, seed + 1)
    base = Path(root) / "mnist"
    write_idx_images(base / "train-images-idx3-ubyte", tr_img)
    write_idx_labels(base / "train-labels-idx1-ubyte", tr_lbl)
    write_idx_images(base / "t10k-images-idx3-ubyte", te_img)
    write_idx_labels(base / "t10k-labels-idx1-ubyte", te_lbl)
    return {"train": n_train, "test": n_test}


def make_notmnist_standin(root, n: int, seed: int, n_corrupt: int = 3):
    """PNG class tree root/notmnist/<A..J>/; plants a few corrupt files."""
    renderer = GlyphRenderer(LETTERS)
    images, labels = renderer.batch(n, seed)
    base = Path(root) / "notmnist"
    counters = dict.fromkeys(LETTERS, 0)
    for letter in LETTERS:
        (base / letter).mkdir(parents=True, exist_ok=True)
    for img, lbl in zip(images, labels):
        letter = LETTERS[lbl]
        idx = counters[letter]
        counters[letter] += 1
        Image.fromarray(img, "L").save(base / letter / f"{letter.lower()}{idx:06d}.png")
    rng = np.random.default_rng(seed + 99)
    for j in range(n_corrupt):
        letter = LETTERS[int(rng.integers(10))]
        (base / letter / f"broken{j:03d}.png").write_bytes(b"\x89PNG\r\n" + b"\x00" * 7)
    return {"train": n, "corrupt": n_corrupt}


def make_cifar10_standin(root, n_train: int, n_test: int, seed: int):
    tr_img, tr_lbl = object_batch(n_train, seed)
    te_img, te_lbl = object_batch(n_test, seed + 1)
    base = Path(root) / "cifar10" / "cifar-10-batches-bin"
    write_cifar_batches(base, tr_img, tr_lbl, prefix="data_batch")
    write_cifar_batches(base, te_img, te_lbl, prefix="test_batch")
    (base / "batches.meta.txt").write_text("\n".join(OBJECT_CLASS_NAMES) + "\n")
    return {"train": n_train, "test": n_test}


PRESETS = {
    # acceptance scale: smallest balanced size that leaves 10,000 images in
    # classes 0-3 of the train split (2,500 per class)
    "acceptance": {"mnist": (25_000, 4_000), "notmnist": 25_000, "cifar10": (20_000, 4_000)},
    "tiny": {"mnist": (400, 120), "notmnist": 320, "cifar10": (300, 100)},
}


def make_standin_root(root, preset: str = "acceptance", seed: int = 2026,
                      datasets=("mnist", "notmnist", "cifar10")) -> dict:
    """Write a complete stand-in data root; returns the manifest."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
    sizes = PRESETS[preset]
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "generator_version": GENERATOR_VERSION,
        "preset": preset,
        "seed": seed,
        "datasets": {},
    }
    if "mnist" in datasets:
        manifest["datasets"]["mnist"] = make_mnist_standin(root, *sizes["mnist"], seed=seed)
    if "notmnist" in datasets:
        manifest["datasets"]["notmnist"] = make_notmnist_standin(
            root, sizes["notmnist"], seed=seed + 1000
        )
    if "cifar10" in datasets:
        manifest["datasets"]["cifar10"] = make_cifar10_standin(
            root, *sizes["cifar10"], seed=seed + 2000
        )
    (root / "STANDIN_MANIFEST.json").write_text(json.dumps(manifest, indent=2))
    return manifest
