"""Image sequence I/O.

Frames live in a directory as numbered files (``000001.png`` etc.); the
number in the file stem is the frame index. Arrays are RGB ``uint8``.
Masks are single-channel PNGs with 255 marking field pixels.
"""

from __future__ import annotations

import re
from pathlib import Path

import cv2
import numpy as np

from .errors import FormatError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
_DIGITS = re.compile(r"(\d+)$")


def frame_name(frame: int, suffix: str = ".png") -> str:
    return f"{frame:06d}{suffix}"


def list_frames(directory) -> dict[int, Path]:
    """Map frame index to image path for every numbered image in ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory} is not a directory")
    out: dict[int, Path] = {}
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        m = _DIGITS.search(p.stem)
        if m is None:
            continue
        frame = int(m.group(1))
        if frame in out:
            raise FormatError(f"two images for frame {frame}: {out[frame].name}, {p.name}")
        out[frame] = p
    return dict(sorted(out.items()))


def read_image(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise FormatError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def write_image(path, img: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), cv2.cvtColor(np.ascontiguousarray(img), cv2.COLOR_RGB2BGR)):
        raise FormatError(f"cannot write image {path}")


def read_mask(path) -> np.ndarray:
    m = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if m is None:
        raise FormatError(f"cannot read mask {path}")
    return m > 127


def write_mask(path, mask: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.where(mask, 255, 0).astype(np.uint8)):
        raise FormatError(f"cannot write mask {path}")
