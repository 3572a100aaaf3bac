"""Dataset ingestion: patch-mosaic collections, patch-stack sequence sets,
and a plain directory-of-PGM format.

``ingest_phototourism`` reads the classic patch-verification layout: a
directory of bitmap mosaics, each a grid of 64x64 patches filled row-major,
plus ``info.txt`` whose k-th line starts with the 3D-point id of patch k.

``ingest_hpatches`` reads a directory of sequence subdirectories.  Each
sequence holds ``ref.png`` plus any number of target images; every image is
a vertical stack of 65x65 patches and row k corresponds across all images
of the sequence.

``ingest_raw`` reads a directory of single-patch 8-bit PGM files listed in
``labels.csv`` (``filename,label`` per line).

All intensities are scaled to [0, 1]; labels are non-negative integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputFormatError

PT_PATCH = 64
HP_PATCH = 65


@dataclass
class LabeledPatchSet:
    """Patches plus the 3D-point label of each."""

    patches: np.ndarray  # (n, W, W) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64, >= 0
    source: str = ""

    def __len__(self) -> int:
        return self.patches.shape[0]


@dataclass
class PatchSequence:
    """One sequence: a reference stack and its transformed target stacks,
    with correspondence given by the row index."""

    name: str
    ref: np.ndarray  # (n, W, W)
    targets: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_patches(self) -> int:
        return self.ref.shape[0]


def _load_gray(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    except InputFormatError:
        raise
    except Exception as exc:
        raise InputFormatError(f"{path}: unreadable image ({exc})") from exc


def _split_mosaic(mosaic: np.ndarray, size: int, path: Path) -> list[np.ndarray]:
    h, w = mosaic.shape
    if h % size or w % size:
        raise InputFormatError(f"{path}: mosaic dimensions {w}x{h} are not multiples of {size}")
    return [
        mosaic[r : r + size, c : c + size]
        for r in range(0, h, size)
        for c in range(0, w, size)
    ]


def ingest_phototourism(directory) -> LabeledPatchSet:
    """Read a mosaic-plus-info patch directory (see module docstring)."""
    root = Path(directory)
    info = root / "info.txt"
    if not info.is_file():
        raise InputFormatError(f"{root}: missing info.txt")
    labels = []
    for line_no, line in enumerate(info.read_text().splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        try:
            label = int(fields[0])
        except ValueError as exc:
            raise InputFormatError(f"{info}:{line_no}: bad 3D-point id {fields[0]!r}") from exc
        if label < 0:
            raise InputFormatError(f"{info}:{line_no}: negative 3D-point id {label}")
        labels.append(label)
    if not labels:
        raise InputFormatError(f"{info}: no patch entries")
    mosaics = sorted(root.glob("*.bmp"))
    if not mosaics:
        raise InputFormatError(f"{root}: no .bmp mosaics found")
    patches: list[np.ndarray] = []
    for path in mosaics:
        if len(patches) >= len(labels):
            break
        patches.extend(_split_mosaic(_load_gray(path), PT_PATCH, path))
    if len(patches) < len(labels):
        raise InputFormatError(
            f"{root}: info.txt lists {len(labels)} patches but mosaics hold only {len(patches)}"
        )
    return LabeledPatchSet(
        patches=np.stack(patches[: len(labels)]),
        labels=np.asarray(labels, dtype=np.int64),
        source=str(root),
    )


def _load_stack(path: Path) -> np.ndarray:
    img = _load_gray(path)
    h, w = img.shape
    if w != HP_PATCH or h % HP_PATCH:
        raise InputFormatError(
            f"{path}: expected a vertical stack of {HP_PATCH}x{HP_PATCH} patches, got {w}x{h}"
        )
    return img.reshape(h // HP_PATCH, HP_PATCH, HP_PATCH)


def ingest_hpatches(directory) -> list[PatchSequence]:
    """Read a directory of patch-stack sequences (see module docstring)."""
    root = Path(directory)
    seq_dirs = sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
    if not seq_dirs:
        raise InputFormatError(f"{root}: no sequence directories found")
    sequences = []
    for seq_dir in seq_dirs:
        ref_path = seq_dir / "ref.png"
        if not ref_path.is_file():
            raise InputFormatError(f"{seq_dir}: missing ref.png")
        ref = _load_stack(ref_path)
        targets = {}
        for path in sorted(seq_dir.glob("*.png")):
            if path == ref_path:
                continue
            stack = _load_stack(path)
            if stack.shape[0] != ref.shape[0]:
                raise InputFormatError(
                    f"{path}: {stack.shape[0]} patches but reference has {ref.shape[0]}"
                )
            targets[path.stem] = stack
        sequences.append(PatchSequence(name=seq_dir.name, ref=ref, targets=targets))
    return sequences


def ingest_raw(directory) -> LabeledPatchSet:
    """Read a directory of one-patch PGM files listed in labels.csv."""
    root = Path(directory)
    labels_file = root / "labels.csv"
    if not labels_file.is_file():
        raise InputFormatError(f"{root}: missing labels.csv")
    patches = []
    labels = []
    for line_no, line in enumerate(labels_file.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            name, label_text = line.rsplit(",", 1)
            label = int(label_text)
        except ValueError as exc:
            raise InputFormatError(f"{labels_file}:{line_no}: expected 'filename,label'") from exc
        if label < 0:
            raise InputFormatError(f"{labels_file}:{line_no}: negative label {label}")
        path = root / name.strip()
        if not path.is_file():
            raise InputFormatError(f"{labels_file}:{line_no}: missing patch file {path}")
        patches.append(_load_gray(path))
        labels.append(label)
    if not patches:
        raise InputFormatError(f"{labels_file}: no patch entries")
    shapes = {p.shape for p in patches}
    if len(shapes) != 1:
        raise InputFormatError(f"{root}: patches must share one size, found {sorted(shapes)}")
    return LabeledPatchSet(
        patches=np.stack(patches), labels=np.asarray(labels, dtype=np.int64), source=str(root)
    )
