"""Readers for the supported on-disk dataset formats.

Expected layout under a data root:

    <root>/mnist/train-images-idx3-ubyte[.gz]   (+ labels, t10k pair)
    <root>/cifar10/cifar-10-batches-bin/data_batch_*.bin, test_batch.bin
    <root>/notmnist/<A..J>/<image files>        (28x28 8-bit grayscale rasters)

Raw 8-bit values are divided by 255 before anything else touches them, so all
pixels land in [0, 1]. The "random" dataset id is synthesized on the fly and
sized to match the MNIST train split, with a fixed seed so every experiment
sees the same images.
"""

from __future__ import annotations

import functools
import gzip
import hashlib
import io
import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .data import DataError, ImageBatch, LabeledDataset, make_random_dataset

DATASET_IDS = ("mnist", "notmnist", "cifar10", "random")

# notMNIST's public dump holds 500k+ files; experiments use a fixed-seed
# subsample of this many, shared across all runs.
NOTMNIST_SUBSAMPLE = 60_000
NOTMNIST_SUBSAMPLE_SEED = 1841

# Seed for the synthetic uniform-random dataset (one fixed draw per shape/size).
RANDOM_DATASET_SEED = 714

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

CIFAR_CLASS_NAMES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)

NOTMNIST_CLASSES = tuple("ABCDEFGHIJ")


class MissingDataError(DataError):
    """A dataset file or directory the loader needs does not exist."""


def _open_maybe_gz(path: Path):
    raw = path.open("rb")
    magic = raw.read(2)
    raw.seek(0)
    if magic == b"\x1f\x8b":
        return gzip.open(raw)
    return raw


def _find_file(candidates: list[Path]) -> Path:
    for p in candidates:
        if p.exists():
            return p
    tried = ", ".join(str(p) for p in candidates)
    raise MissingDataError(f"none of the expected files exist: {tried}")


def read_idx(path: Path) -> np.ndarray:
    """Parse one IDX file (big-endian magic + dims header, ubyte payload)."""
    with _open_maybe_gz(path) as fh:
        header = fh.read(4)
        if len(header) != 4 or header[0] != 0 or header[1] != 0:
            raise DataError(f"{path}: not an IDX file (bad magic {header!r})")
        dtype_code, ndim = header[2], header[3]
        if dtype_code != 0x08:
            raise DataError(f"{path}: only ubyte IDX payloads are supported, got 0x{dtype_code:02x}")
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        payload = fh.read()
    expected = int(np.prod(dims))
    if len(payload) != expected:
        raise DataError(
            f"{path}: header promises {expected} bytes for dims {dims}, file has {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def read_idx_count(path: Path) -> int:
    """Record count declared in an IDX header, without reading the payload."""
    with _open_maybe_gz(path) as fh:
        header = fh.read(4)
        ndim = header[3]
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
    return dims[0]


def _dataset_dir(root, dataset: str) -> Path:
    root = Path(root)
    sub = root / dataset
    return sub if sub.exists() else root


def load_mnist(root, split: str) -> LabeledDataset:
    if split not in MNIST_FILES:
        raise DataError(f"mnist split must be train or test, got {split!r}")
    base = _dataset_dir(root, "mnist")
    img_name, lbl_name = MNIST_FILES[split]
    img_path = _find_file([base / img_name, base / (img_name + ".gz")])
    lbl_path = _find_file([base / lbl_name, base / (lbl_name + ".gz")])
    images = read_idx(img_path)
    labels = read_idx(lbl_path)
    if images.ndim != 3:
        raise DataError(f"{img_path}: expected 3-axis image payload, got {images.shape}")
    if len(images) != len(labels):
        raise DataError(f"{img_path}: {len(images)} images vs {len(labels)} labels")
    pixels = images.astype(np.float32)[..., None] / 255.0
    return LabeledDataset(
        images=ImageBatch(pixels),
        labels=labels.astype(np.int64),
        n_classes=10,
        class_names=tuple(str(d) for d in range(10)),
        source_tag=f"mnist-{split}",
    )


def _cifar_batch_files(base: Path, split: str) -> list[Path]:
    for d in (base / "cifar-10-batches-bin", base):
        names = sorted(d.glob("data_batch_*.bin")) if split == "train" else (
            [d / "test_batch.bin"] if (d / "test_batch.bin").exists() else []
        )
        if names:
            return names
    raise MissingDataError(
        f"no CIFAR10 {split} batches under {base} "
        "(expected cifar-10-batches-bin/data_batch_*.bin / test_batch.bin)"
    )


def load_cifar10(root, split: str) -> LabeledDataset:
    if split not in ("train", "test"):
        raise DataError(f"cifar10 split must be train or test, got {split!r}")
    base = _dataset_dir(root, "cifar10")
    record = 1 + 3 * 32 * 32
    chunks, labels = [], []
    files = _cifar_batch_files(base, split)
    for path in files:
        raw = path.read_bytes()
        if len(raw) % record != 0:
            raise DataError(
                f"{path}: size {len(raw)} is not a whole number of {record}-byte records"
            )
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(-1, record)
        labels.append(arr[:, 0])
        # payload is 1024 R + 1024 G + 1024 B, each row-major 32x32
        chunks.append(arr[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1))
    pixels = np.concatenate(chunks).astype(np.float32) / 255.0
    lbl = np.concatenate(labels).astype(np.int64)
    if lbl.size and lbl.max() > 9:
        raise DataError(f"CIFAR10 labels above 9 in {files}")
    names = _cifar_meta_names(base)
    return LabeledDataset(
        images=ImageBatch(pixels),
        labels=lbl,
        n_classes=10,
        class_names=names,
        source_tag=f"cifar10-{split}",
    )


def _cifar_meta_names(base: Path) -> tuple[str, ...]:
    for d in (base / "cifar-10-batches-bin", base):
        meta = d / "batches.meta.txt"
        if meta.exists():
            names = [ln.strip() for ln in meta.read_text().splitlines() if ln.strip()]
            if len(names) >= 10:
                return tuple(names[:10])
    return CIFAR_CLASS_NAMES


def _notmnist_scan(base: Path) -> list[tuple[str, Path]]:
    entries = []
    for letter in NOTMNIST_CLASSES:
        class_dir = base / letter
        if not class_dir.is_dir():
            raise MissingDataError(f"notMNIST class directory missing: {class_dir}")
        for p in sorted(class_dir.iterdir()):
            if p.is_file():
                entries.append((letter, p))
    return entries


def _notmnist_cache_key(entries, target, seed) -> str:
    h = hashlib.sha256()
    h.update(f"target={target};seed={seed};n={len(entries)}".encode())
    for letter, path in entries:
        h.update(f"{letter}/{path.name}/{path.stat().st_size}".encode())
    return h.hexdigest()[:16]


def load_notmnist(
    root,
    split: str = "train",
    target: int = NOTMNIST_SUBSAMPLE,
    seed: int = NOTMNIST_SUBSAMPLE_SEED,
    use_cache: bool = True,
) -> LabeledDataset:
    """Load the notMNIST directory tree.

    When more than `target` readable files exist, a fixed-seed subsample of
    exactly `target` is taken so every experiment shares one selection.
    Unreadable or wrong-shape files are skipped and counted, never hidden:
    the count is exposed via `load_report()`. Decoded arrays are cached under
    <root>/.shapebias-cache/ keyed by the file listing.
    """
    if split != "train":
        raise DataError(
            "notMNIST has no test split here; it is used as a training/augmentation pool"
        )
    base = _dataset_dir(root, "notmnist")
    if not base.exists():
        raise MissingDataError(f"notMNIST directory missing: {base}")
    entries = _notmnist_scan(base)
    if not entries:
        raise MissingDataError(f"notMNIST tree {base} holds no files")

    cache_dir = Path(root) / ".shapebias-cache"
    key = _notmnist_cache_key(entries, target, seed)
    cache_file = cache_dir / f"notmnist-{key}.npz"
    if use_cache and cache_file.exists():
        with np.load(cache_file) as z:
            pixels, labels, skipped = z["pixels"], z["labels"], int(z["skipped"])
    else:
        pixels, labels, skipped = _notmnist_decode(entries, target, seed)
        if use_cache:
            cache_dir.mkdir(exist_ok=True)
            tmp = cache_file.with_suffix(".tmp.npz")
            np.savez_compressed(tmp, pixels=pixels, labels=labels, skipped=skipped)
            os.replace(tmp, cache_file)

    ds = LabeledDataset(
        images=ImageBatch(pixels.astype(np.float32)[..., None] / 255.0),
        labels=labels.astype(np.int64),
        n_classes=10,
        class_names=NOTMNIST_CLASSES,
        source_tag="notmnist-train",
    )
    _LOAD_REPORTS["notmnist"] = {
        "files_found": len(entries),
        "skipped_unreadable": skipped,
        "loaded": len(ds),
        "subsample_target": target,
        "short_of_target": max(0, target - len(ds)),
    }
    return ds


def _notmnist_decode(entries, target, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(entries))
    images, labels = [], []
    skipped = 0
    label_of = {c: i for i, c in enumerate(NOTMNIST_CLASSES)}
    for i in order:
        letter, path = entries[i]
        try:
            with Image.open(path) as im:
                arr = np.asarray(im.convert("L"))
        except (UnidentifiedImageError, OSError, SyntaxError):
            skipped += 1
            continue
        if arr.shape != (28, 28):
            skipped += 1
            continue
        images.append(arr)
        labels.append(label_of[letter])
        if len(images) == target:
            break
    if not images:
        raise DataError("every notMNIST file failed to decode")
    return np.stack(images), np.asarray(labels, dtype=np.int64), skipped


# Side-channel for ingest bookkeeping (skip counts etc), keyed by dataset id.
_LOAD_REPORTS: dict[str, dict] = {}


def load_report(dataset: str) -> dict:
    return dict(_LOAD_REPORTS.get(dataset, {}))


@functools.lru_cache(maxsize=32)
def _load_cached(dataset: str, split: str, root_key: str) -> LabeledDataset:
    root = Path(root_key)
    if dataset == "mnist":
        return load_mnist(root, split)
    if dataset == "cifar10":
        return load_cifar10(root, split)
    if dataset == "notmnist":
        return load_notmnist(root, split)
    if dataset == "random":
        like = _load_cached("mnist", split, root_key)
        return make_random_dataset(
            n=len(like),
            shape=like.images.image_shape,
            n_classes=10,
            seed=RANDOM_DATASET_SEED,
        ).retag(f"random-{split}")
    raise DataError(f"unknown dataset id {dataset!r}; known: {DATASET_IDS}")


def load_dataset(dataset: str, split: str, root) -> LabeledDataset:
    """Load one of the four dataset ids; results are memoized per (id, split, root)."""
    return _load_cached(dataset, split, str(Path(root).resolve()))


def clear_cache():
    _load_cached.cache_clear()


def dataset_fingerprint(ds: LabeledDataset) -> dict:
    """Digest of the loaded arrays, for provenance blocks."""
    h = hashlib.sha256()
    h.update(ds.images.pixels.tobytes())
    h.update(ds.labels.tobytes())
    return {
        "sha256": h.hexdigest(),
        "count": len(ds),
        "n_classes": ds.n_classes,
        "image_shape": list(ds.images.image_shape),
    }


def verify_data_root(root, datasets=None) -> dict:
    """Counts, checksums and skip counts for everything under a data root."""
    root = Path(root)
    report: dict[str, dict] = {}
    wanted = datasets or DATASET_IDS
    for dataset in wanted:
        splits = ("train",) if dataset in ("notmnist", "random") else ("train", "test")
        entry: dict[str, dict] = {}
        for split in splits:
            try:
                ds = load_dataset(dataset, split, root)
            except (DataError, OSError) as exc:
                entry[split] = {"error": str(exc)}
                continue
            info = dataset_fingerprint(ds)
            info["per_class"] = ds.class_counts().tolist()
            info.update(load_report(dataset))
            entry[split] = info
        report[dataset] = entry
    return report


def format_verify_report(report: dict) -> str:
    lines = []
    for dataset, splits in report.items():
        for split, info in splits.items():
            if "error" in info:
                lines.append(f"{dataset}/{split}: MISSING ({info['error']})")
                continue
            extras = ""
            if "skipped_unreadable" in info:
                extras = (
                    f", skipped {info['skipped_unreadable']} unreadable"
                    f", target {info['subsample_target']}"
                )
                if info.get("short_of_target"):
                    extras += f" (short by {info['short_of_target']})"
            lines.append(
                f"{dataset}/{split}: {info['count']} images, "
                f"sha256 {info['sha256'][:16]}…{extras}"
            )
    return "\n".join(lines)
