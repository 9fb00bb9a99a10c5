"""Image file handling: PNG/JPEG via Pillow, plain-text PPM for debugging.

Arrays are (C,H,W) float in [0,1] with C of 1 or 3. Export quantizes with
round(p * 255); grayscale conversion of color inputs is a plain channel
mean so it matches the recognizer-side convention exactly.
"""
from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .tensor import DTYPE


def to_uint8(img):
    return np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def _to_pil(img):
    arr = to_uint8(img)
    if arr.shape[0] == 1:
        return Image.fromarray(arr[0], mode="L")
    return Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")


def save_png(img, path, scale=1, resample="bilinear"):
    """Write (C,H,W) [0,1] to PNG, optionally upscaled for display/print."""
    pil = _to_pil(img)
    if scale != 1:
        if scale < 1 or int(scale) != scale:
            raise ValueError("scale must be a positive integer")
        method = Image.NEAREST if resample == "nearest" else Image.BILINEAR
        pil = pil.resize((pil.width * int(scale), pil.height * int(scale)), method)
    pil.save(path, format="PNG")


def save_ppm(img, path):
    """Plain-text PPM (P3) or PGM (P2) export, one pixel row per line."""
    arr = to_uint8(img)
    c, h, w = arr.shape
    with open(path, "w") as f:
        f.write(f"{'P2' if c == 1 else 'P3'}\n{w} {h}\n255\n")
        for row in range(h):
            vals = arr[:, row, :].T.reshape(-1)
            f.write(" ".join(str(v) for v in vals) + "\n")


def pil_to_array(pil, channels):
    arr = np.asarray(pil, dtype=DTYPE) / DTYPE(255.0)
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)[:3]
    if channels == 1 and arr.shape[0] == 3:
        arr = arr.mean(axis=0, keepdims=True)
    elif channels == 3 and arr.shape[0] == 1:
        arr = np.repeat(arr, 3, axis=0)
    return np.ascontiguousarray(arr[:channels])


def load_image(path, channels):
    """Load PNG/JPEG as (channels,H,W) float32 in [0,1]."""
    try:
        with Image.open(path) as pil:
            if pil.mode != "L":
                # keep RGB so a grayscale request uses the plain channel mean
                pil = pil.convert("RGB")
            return pil_to_array(pil, channels)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from None


def load_image_dir(directory, channels, min_size):
    """All readable images in a directory, skipping ones below min_size."""
    images = []
    skipped = 0
    for name in sorted(os.listdir(directory)):
        if not name.lower().endswith((".png", ".jpg", ".jpeg")):
            continue
        img = load_image(os.path.join(directory, name), channels)
        if img.shape[1] < min_size or img.shape[2] < min_size:
            skipped += 1
            continue
        images.append(img)
    return images, skipped


def resize_center_crop(img, size):
    """Proportional resize (short side to `size`) then center crop."""
    c, h, w = img.shape
    if (h, w) == (size, size):
        return img
    scale_ = size / min(h, w)
    new_h, new_w = max(size, round(h * scale_)), max(size, round(w * scale_))
    pil = _to_pil(img).resize((new_w, new_h), Image.BILINEAR)
    arr = pil_to_array(pil, c)
    top = (new_h - size) // 2
    left = (new_w - size) // 2
    return np.ascontiguousarray(arr[:, top:top + size, left:left + size])
