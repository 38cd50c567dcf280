"""Elementwise sine/cosine for float64 arrays.

numpy's float64 ``sin``/``cos`` fall back to scalar libm on many builds and
dominate SIREN training time; torch ships vectorized kernels with the same
1-ulp accuracy. torch is optional; without it the numpy ufuncs are used.
"""

import numpy as np

try:
    import torch
except ImportError:  # pragma: no cover - exercised only without torch
    torch = None

BACKEND = "torch" if torch is not None else "numpy"


def set_threads(n: int) -> None:
    if torch is not None:
        torch.set_num_threads(max(1, int(n)))


def sin(x: np.ndarray) -> np.ndarray:
    if torch is None or x.dtype != np.float64:
        return np.sin(x)
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    torch.sin(torch.from_numpy(x), out=torch.from_numpy(out))
    return out


def cos(x: np.ndarray) -> np.ndarray:
    if torch is None or x.dtype != np.float64:
        return np.cos(x)
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    torch.cos(torch.from_numpy(x), out=torch.from_numpy(out))
    return out
