"""Fast evaluation of oscillatory integral transforms g = K f.

The kernel K(x, xi) = a(x, xi) exp(2 pi i Phi(x, xi)) is recovered from
entries, matvecs or sampled rows and columns, then applied through a lifted
type-3 NUFFT when the phase allows it and a butterfly factorization otherwise.
"""

from ._core import (
    Transform,
    bench,
    hankel1,
    kernel_matrix,
    known_kernel,
    nufft3,
    nufft3_direct,
    verify,
    version,
)

__all__ = [
    "Transform",
    "bench",
    "hankel1",
    "kernel_matrix",
    "known_kernel",
    "nufft3",
    "nufft3_direct",
    "verify",
    "version",
]
