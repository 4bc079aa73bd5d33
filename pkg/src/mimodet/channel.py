"""Channel generation, complex-to-real embedding, economy SVD, SNR-driven
noise calibration, forward transmission, and channel-file I/O.

Noise convention: sigma0 is the standard deviation of each *real* component
of the embedded noise vector. All SNR calibration flows through
sigma0_from_snr so the convention lives in one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import SymbolVector
from .errors import ConfigurationError

# Eigenvalues of a PSD matrix below this are an error; in [-tol, 0) they are
# rounding debris and get clamped to zero.
_PSD_TOLERANCE = 1e-10


def real_embedding(hc: np.ndarray) -> np.ndarray:
    """Complex channel (N_r, N_u) -> real block matrix [[Re, -Im], [Im, Re]]."""
    hc = np.asarray(hc, dtype=np.complex128)
    if hc.ndim != 2:
        raise ValueError("channel must be a 2-D matrix")
    re, im = hc.real, hc.imag
    return np.block([[re, -im], [im, re]])


def rayleigh_channel(n_rx: int, n_users: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. circular complex Gaussian channel, per-entry variance 1/N_r."""
    if n_users < 1 or n_rx < n_users:
        raise ConfigurationError(
            f"need n_rx >= n_users >= 1, got n_rx={n_rx}, n_users={n_users}"
        )
    scale = np.sqrt(1.0 / (2.0 * n_rx))
    re = rng.standard_normal((n_rx, n_users))
    im = rng.standard_normal((n_rx, n_users))
    return scale * (re + 1j * im)


def exp_correlation(n: int, rho: float) -> np.ndarray:
    """Exponential correlation matrix R_ij = rho^|i-j|."""
    if not 0.0 <= rho < 1.0:
        raise ConfigurationError(f"correlation coefficient must be in [0, 1), got {rho}")
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def matrix_sqrt_psd(r: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric PSD matrix via eigendecomposition."""
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("matrix square root needs a square matrix")
    if not np.allclose(r, r.T, rtol=0.0, atol=1e-12):
        raise ValueError("matrix square root needs a symmetric matrix")
    w, v = np.linalg.eigh(r)
    if np.any(w < -_PSD_TOLERANCE):
        raise ValueError(f"matrix is indefinite: min eigenvalue {w.min()}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def kronecker_channel(
    n_rx: int, n_users: int, rho: float, rng: np.random.Generator
) -> np.ndarray:
    """Kronecker-correlated Rayleigh channel R_r^{1/2} H_e R_u^{1/2} with
    exponential correlation of coefficient rho on both sides."""
    r_rx = matrix_sqrt_psd(exp_correlation(n_rx, rho))
    r_tx = matrix_sqrt_psd(exp_correlation(n_users, rho))
    h_e = rayleigh_channel(n_rx, n_users, rng)
    return r_rx @ h_e @ r_tx


def sigma0_from_snr(snr_linear: float, n_rx: int, n_users: int) -> float:
    """Per-real-component noise std for a target SNR = E||Hx||^2 / E||z||^2.

    Uses the analytic E||Hx||^2 = N_u (unit-power symbols, per-entry channel
    variance 1/N_r) and E||z||^2 = 2 N_r sigma0^2.
    """
    if not snr_linear > 0:
        raise ConfigurationError(f"SNR must be positive, got {snr_linear}")
    return float(np.sqrt(n_users / (2.0 * n_rx * snr_linear)))


def transmit(
    h_real: np.ndarray,
    x,
    sigma0: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Forward model y = Hx + z with z i.i.d. N(0, sigma0^2) per component.

    `x` may be a SymbolVector or an already-embedded real vector.
    """
    h_real = np.asarray(h_real, dtype=np.float64)
    x_real = x.real if isinstance(x, SymbolVector) else np.asarray(x, dtype=np.float64)
    if x_real.shape != (h_real.shape[1],):
        raise ValueError(
            f"symbol embedding has length {x_real.shape}, channel expects {h_real.shape[1]}"
        )
    if sigma0 < 0:
        raise ValueError(f"sigma0 must be nonnegative, got {sigma0}")
    y = h_real @ x_real
    if sigma0 > 0:
        if rng is None:
            raise ValueError("rng required when sigma0 > 0")
        y = y + sigma0 * rng.standard_normal(h_real.shape[0])
    return y


@dataclass(frozen=True, eq=False)
class RealSystem:
    """Real-embedded channel with its economy SVD and spectral observation.

    H = U diag(s) V^T with U (2N_r, 2N_u) orthonormal-column, s nonincreasing,
    V (2N_u, 2N_u) orthogonal; eta = U^T y; sigma0 the per-real-component
    measurement-noise std. Immutable and shareable across trajectories.
    """

    H: np.ndarray
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    sigma0: float

    @property
    def n_users(self) -> int:
        return self.H.shape[1] // 2

    @property
    def n_rx(self) -> int:
        return self.H.shape[0] // 2


def build_real_system(hc: np.ndarray, y: np.ndarray, sigma0: float) -> RealSystem:
    """Assemble the RealSystem tuple the Langevin detector consumes."""
    h = real_embedding(hc)
    if not np.all(np.isfinite(h)):
        raise ValueError("channel contains non-finite entries")
    y = np.array(y, dtype=np.float64)
    if y.shape != (h.shape[0],):
        raise ValueError(f"observation has shape {y.shape}, expected ({h.shape[0]},)")
    u, s, vh = np.linalg.svd(h, full_matrices=False)
    v = vh.T
    for arr in (h, u, s, v, y):
        arr.setflags(write=False)
    eta = u.T @ y
    eta.setflags(write=False)
    return RealSystem(H=h, U=u, s=s, V=v, y=y, eta=eta, sigma0=float(sigma0))


def simulate_transmission(
    hc: np.ndarray,
    symbols: SymbolVector,
    sigma0: float,
    rng: np.random.Generator | None = None,
) -> RealSystem:
    """Transmit `symbols` through `hc` and package the result as a RealSystem."""
    h = real_embedding(hc)
    y = transmit(h, symbols, sigma0, rng)
    return build_real_system(hc, y, sigma0)


def format_complex(z: complex) -> str:
    """`a+bi` text form, 17 significant digits (lossless round-trip)."""
    return f"{z.real:.17g}{z.imag:+.17g}i"


def parse_complex(text: str) -> complex:
    """Inverse of format_complex."""
    s = text.strip()
    if not s.endswith("i"):
        raise ValueError(f"expected a+bi form, got {text!r}")
    try:
        return complex(s[:-1].replace(" ", "") + "j")
    except ValueError as exc:
        raise ValueError(f"cannot parse complex entry {text!r}") from exc


def save_channel_csv(hc: np.ndarray, path) -> None:
    """Write a complex channel as CSV of a+bi entries, one row per antenna."""
    hc = np.asarray(hc, dtype=np.complex128)
    lines = [",".join(format_complex(z) for z in row) for row in hc]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_channel_csv(path) -> np.ndarray:
    """Read a channel written by save_channel_csv."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([parse_complex(cell) for cell in line.split(",")])
    if not rows:
        raise ValueError(f"no channel entries in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"ragged rows in {path}")
    return np.asarray(rows, dtype=np.complex128)


def save_observation(y: np.ndarray, path) -> None:
    """Write a complex observation vector, one a+bi entry per line."""
    y = np.asarray(y, dtype=np.complex128)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(format_complex(z) for z in y) + "\n")


def load_observation(path) -> np.ndarray:
    """Read an observation vector written by save_observation."""
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(parse_complex(line))
    if not entries:
        raise ValueError(f"no observation entries in {path}")
    return np.asarray(entries, dtype=np.complex128)
