"""Centered, orthonormal 2-D Fourier transforms.

Convention: the zero-frequency sample sits at index (H//2, W//2) in both
domains, and both directions carry 1/sqrt(H*W) scaling, so fft2c/ifft2c
form an exactly unitary pair.  Transforms act on the last two axes, so a
coil stack (C, H, W) passes through unchanged.
"""

import numpy as np

from .errors import InvalidArgumentError

_AXES = (-2, -1)


def _check_field(a: np.ndarray) -> None:
    if a.ndim < 2 or a.shape[-1] < 1 or a.shape[-2] < 1:
        raise InvalidArgumentError(
            f"expected an array with nonempty trailing 2-D field, got shape {a.shape}"
        )


def fft2c(img: np.ndarray) -> np.ndarray:
    """Image to centered k-space (unitary)."""
    img = np.asarray(img, dtype=np.complex128)
    _check_field(img)
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(img, axes=_AXES), axes=_AXES, norm="ortho"),
        axes=_AXES,
    )


def ifft2c(ksp: np.ndarray) -> np.ndarray:
    """Centered k-space to image (unitary inverse of fft2c)."""
    ksp = np.asarray(ksp, dtype=np.complex128)
    _check_field(ksp)
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(ksp, axes=_AXES), axes=_AXES, norm="ortho"),
        axes=_AXES,
    )
