"""Core dataset types and transforms.

Images are stored as float32 arrays with values in [0, 1]. On construction
every pixel is quantized to the nearest multiple of 2**-24 (well below any
meaningful intensity resolution, ~6e-8). On that lattice the complement
``x -> 1 - x`` is closed and float32-exact, so negating twice returns the
original batch bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# Pixel values live on this grid so that 1 - x is exact in float32.
_PIXEL_SCALE = float(1 << 24)


class DataError(ValueError):
    """Raised for malformed datasets, labels or transform arguments."""


def _quantize(pixels: np.ndarray) -> np.ndarray:
    out = np.rint(pixels.astype(np.float64) * _PIXEL_SCALE) / _PIXEL_SCALE
    return out.astype(np.float32)


@dataclass(frozen=True)
class ImageBatch:
    """A stack of images: (count, height, width, channels), values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 4:
            raise DataError(f"expected 4 axes (n, h, w, c), got shape {px.shape}")
        n, h, w, c = px.shape
        if h <= 0 or w <= 0:
            raise DataError(f"empty spatial dims in shape {px.shape}")
        if c not in (1, 3):
            raise DataError(f"channels must be 1 or 3, got {c}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise DataError(
                f"pixel values outside [0, 1] (min {px.min():.6g}, max {px.max():.6g}); "
                "inputs must be normalized before building an ImageBatch"
            )
        px = _quantize(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def __len__(self) -> int:
        return self.pixels.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.pixels.shape[1:])

    def __getitem__(self, idx) -> "ImageBatch":
        sel = self.pixels[idx]
        if sel.ndim == 3:
            sel = sel[None]
        return ImageBatch(sel)


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable image collection with integer labels; transforms return new datasets."""

    images: ImageBatch
    labels: np.ndarray
    n_classes: int
    class_names: tuple[str, ...]
    source_tag: str = ""

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise DataError(f"labels must be 1-D, got shape {labels.shape}")
        if len(labels) != len(self.images):
            raise DataError(
                f"{len(labels)} labels for {len(self.images)} images ({self.source_tag!r})"
            )
        if self.n_classes < 1:
            raise DataError(f"n_classes must be positive, got {self.n_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DataError(
                f"labels outside [0, {self.n_classes}) in {self.source_tag!r}: "
                f"min {labels.min()}, max {labels.max()}"
            )
        names = tuple(str(n) for n in self.class_names)
        if len(names) != self.n_classes:
            raise DataError(f"{len(names)} class names for {self.n_classes} classes")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    def __len__(self) -> int:
        return len(self.images)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def take(self, indices: np.ndarray, source_tag: str | None = None) -> "LabeledDataset":
        """New dataset holding the given rows (order preserved)."""
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            images=self.images[idx],
            labels=self.labels[idx],
            n_classes=self.n_classes,
            class_names=self.class_names,
            source_tag=source_tag if source_tag is not None else self.source_tag,
        )

    def retag(self, source_tag: str) -> "LabeledDataset":
        return replace(self, source_tag=source_tag)


@dataclass(frozen=True)
class LabelMap:
    """A relabeling rule: identity, cyclic shift by k, or offset into a larger space."""

    kind: str  # "identity" | "shift" | "offset"
    n_classes: int
    k: int = 0
    base: int = 0

    def __post_init__(self):
        if self.kind not in ("identity", "shift", "offset"):
            raise DataError(f"unknown label map kind {self.kind!r}")
        if self.n_classes < 1:
            raise DataError("label map needs a positive class count")
        if self.kind == "offset" and self.base < 0:
            raise DataError("offset base must be nonnegative")

    def apply(self, labels: np.ndarray, source_classes: int) -> tuple[np.ndarray, int]:
        """Map a label array; returns (new labels, output class count)."""
        labels = np.asarray(labels, dtype=np.int64)
        if self.kind == "identity":
            if source_classes != self.n_classes:
                raise DataError(
                    f"identity map over {self.n_classes} classes applied to "
                    f"{source_classes}-class labels"
                )
            return labels.copy(), self.n_classes
        if self.kind == "shift":
            if source_classes != self.n_classes:
                raise DataError(
                    f"shift map over {self.n_classes} classes applied to "
                    f"{source_classes}-class labels"
                )
            return (labels + self.k) % self.n_classes, self.n_classes
        # offset: inject into a larger space [base, base + source_classes)
        if self.base + source_classes > self.n_classes:
            raise DataError(
                f"offset {self.base} pushes {source_classes} classes past "
                f"the {self.n_classes}-class target space"
            )
        return labels + self.base, self.n_classes

    def describe(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "shift":
            return f"shift({self.k})"
        return f"offset({self.base})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_classes": self.n_classes, "k": self.k, "base": self.base}

    @staticmethod
    def from_dict(d: dict) -> "LabelMap":
        return LabelMap(
            kind=d["kind"],
            n_classes=int(d["n_classes"]),
            k=int(d.get("k", 0)),
            base=int(d.get("base", 0)),
        )


def identity_map(n_classes: int) -> LabelMap:
    return LabelMap("identity", n_classes)


def shift_map(k: int, n_classes: int) -> LabelMap:
    return LabelMap("shift", n_classes, k=k)


def offset_map(base: int, n_classes: int) -> LabelMap:
    return LabelMap("offset", n_classes, base=base)


# ---------------------------------------------------------------------------
# transforms


def negate(batch: ImageBatch) -> ImageBatch:
    """Complement every pixel: out = 1 - in. Exactly involutive at stored precision."""
    if not isinstance(batch, ImageBatch):
        batch = ImageBatch(np.asarray(batch))
    return ImageBatch(np.float32(1.0) - batch.pixels)


def negate_dataset(ds: LabeledDataset, tag_suffix: str = "-negative") -> LabeledDataset:
    return LabeledDataset(
        images=negate(ds.images),
        labels=ds.labels,
        n_classes=ds.n_classes,
        class_names=ds.class_names,
        source_tag=ds.source_tag + tag_suffix,
    )


def remap_labels(ds: LabeledDataset, label_map: LabelMap) -> LabeledDataset:
    """Relabel a dataset; images are untouched and the source tag is annotated."""
    new_labels, out_classes = label_map.apply(ds.labels, ds.n_classes)
    if label_map.kind == "offset":
        names = tuple(f"c{i}" for i in range(label_map.base)) + ds.class_names
        names = names + tuple(f"c{i}" for i in range(len(names), out_classes))
    else:
        names = ds.class_names
    return LabeledDataset(
        images=ds.images,
        labels=new_labels,
        n_classes=out_classes,
        class_names=names,
        source_tag=f"{ds.source_tag}|{label_map.describe()}",
    )


def holdout_split(
    ds: LabeledDataset, fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint, exhaustive (train, val) partition; deterministic given seed."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"holdout fraction must be in (0, 1), got {fraction}")
    n = len(ds)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = int(round(n * fraction))
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    return (
        ds.take(train_idx, ds.source_tag + "-train80"),
        ds.take(val_idx, ds.source_tag + "-val20"),
    )


def exclusion_split(
    ds: LabeledDataset, excluded_class: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Class-exclusion protocol over one dataset.

    Returns (train, probe): train holds every regular image plus the negatives
    of the non-excluded classes (negatives keep their original labels); probe
    holds the negatives of the excluded class, drawn from the same images.
    """
    if not 0 <= excluded_class < ds.n_classes:
        raise DataError(
            f"excluded class {excluded_class} outside [0, {ds.n_classes})"
        )
    keep = ds.labels != excluded_class
    negatives = negate_dataset(
        ds.take(np.flatnonzero(keep)), tag_suffix=f"-negative-excl{excluded_class}"
    )
    train = mix([ds, negatives], policy="merged_labels").retag(
        f"{ds.source_tag}+negatives-excl{excluded_class}"
    )
    probe = negate_dataset(
        ds.take(np.flatnonzero(~keep)), tag_suffix=f"-negative-class{excluded_class}"
    )
    return train, probe


def make_random_dataset(
    n: int, shape: tuple[int, int, int], n_classes: int, seed: int
) -> LabeledDataset:
    """I.i.d. uniform-[0,1] pixels with i.i.d. uniform labels; deterministic given seed."""
    if n <= 0:
        raise DataError(f"need a positive image count, got {n}")
    rng = np.random.default_rng(seed)
    h, w, c = shape
    pixels = rng.random((n, h, w, c), dtype=np.float32)
    labels = rng.integers(0, n_classes, size=n)
    return LabeledDataset(
        images=ImageBatch(pixels),
        labels=labels,
        n_classes=n_classes,
        class_names=tuple(f"rand{i}" for i in range(n_classes)),
        source_tag=f"random-n{n}-seed{seed}",
    )


def mix(parts: list[LabeledDataset], policy: str) -> LabeledDataset:
    """Concatenate datasets under one of two label policies.

    distinct_labels: each part keeps its own label block; part i's labels are
    offset by the sizes of the label spaces before it (argument order).
    merged_labels: labels pass through unchanged; all parts must agree on
    the class count.
    """
    if not parts:
        raise DataError("mix needs at least one dataset")
    if policy not in ("distinct_labels", "merged_labels"):
        raise DataError(f"unknown mix policy {policy!r}")
    shapes = {p.images.image_shape for p in parts}
    if len(shapes) > 1:
        raise DataError(f"cannot mix image shapes {sorted(shapes)}")

    if policy == "merged_labels":
        counts = {p.n_classes for p in parts}
        if len(counts) > 1:
            raise DataError(
                f"merged_labels requires equal class counts, got {sorted(counts)} "
                f"from {[p.source_tag for p in parts]}"
            )
        n_classes = parts[0].n_classes
        labels = np.concatenate([p.labels for p in parts])
        names = parts[0].class_names
    else:
        n_classes = sum(p.n_classes for p in parts)
        offset = 0
        shifted = []
        names_list: list[str] = []
        for p in parts:
            shifted.append(p.labels + offset)
            names_list.extend(p.class_names)
            offset += p.n_classes
        labels = np.concatenate(shifted)
        names = tuple(names_list)

    pixels = np.concatenate([p.images.pixels for p in parts])
    tag = "+".join(p.source_tag for p in parts)
    return LabeledDataset(
        images=ImageBatch(pixels),
        labels=labels,
        n_classes=n_classes,
        class_names=names,
        source_tag=f"mix({policy})[{tag}]",
    )


def filter_classes(ds: LabeledDataset, classes) -> LabeledDataset:
    """All images whose label is in `classes`, original order and labels kept."""
    classes = sorted({int(c) for c in classes})
    for c in classes:
        if not 0 <= c < ds.n_classes:
            raise DataError(f"class {c} outside [0, {ds.n_classes})")
    mask = np.isin(ds.labels, classes)
    return ds.take(
        np.flatnonzero(mask), f"{ds.source_tag}|classes{classes}"
    )


def subset(
    ds: LabeledDataset, classes, count: int, seed: int
) -> LabeledDataset:
    """Draw `count` images from the given classes without replacement.

    The draw is stratified as evenly as class sizes allow; whatever remainder
    is left after even allocation goes to the lowest class indices. Classes
    short of their quota hand the surplus down the same way. Deterministic
    given seed; output keeps the original dataset order.
    """
    classes = sorted({int(c) for c in classes})
    if count < 0:
        raise DataError("count must be nonnegative")
    pools = {c: np.flatnonzero(ds.labels == c) for c in classes}
    available = sum(len(v) for v in pools.values())
    if count > available:
        raise DataError(
            f"requested {count} images from classes {classes} but only "
            f"{available} are available (short by {count - available})"
        )

    quota = dict.fromkeys(classes, 0)
    remaining = count
    open_classes = list(classes)
    while remaining > 0 and open_classes:
        base, rem = divmod(remaining, len(open_classes))
        for i, c in enumerate(open_classes):
            want = base + (1 if i < rem else 0)
            room = len(pools[c]) - quota[c]
            quota[c] += min(want, room)
        remaining = count - sum(quota.values())
        open_classes = [c for c in open_classes if quota[c] < len(pools[c])]

    rng = np.random.default_rng(seed)
    picked = [
        rng.choice(pools[c], size=quota[c], replace=False) for c in classes if quota[c]
    ]
    idx = np.sort(np.concatenate(picked)) if picked else np.array([], dtype=np.int64)
    return ds.take(
        idx, f"{ds.source_tag}|subset(n={count},classes={classes},seed={seed})"
    )
