"""Array responses and angular steering dictionaries.

Half-wavelength ULA at the base station, half-wavelength UPA at the
reflecting surface. Steering entries are kept unit-modulus with no
1/sqrt(dim) normalization, so a critical-resolution dictionary satisfies
A^H A = dim * I exactly, which is the convention the angular-domain algebra
in the rest of the package relies on.

Direction-cosine mapping for the UPA: the vertical ramp carries phase
pi * p * cos(zenith) and the horizontal ramp pi * q * sin(zenith) *
sin(azimuth); the full response is kron(vertical, horizontal).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna counts for the BS ULA and the IRS UPA (spacing in wavelengths)."""

    bs_antennas: int
    irs_h: int
    irs_v: int
    spacing: float = 0.5

    def __post_init__(self):
        if self.bs_antennas < 1 or self.irs_h < 1 or self.irs_v < 1:
            raise ValueError("array dimensions must be >= 1")

    @property
    def irs_elements(self) -> int:
        return self.irs_h * self.irs_v


def _phase_ramp(n: int, cosine: float) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(n) * cosine)


def steering_ula(m: int, theta: float) -> np.ndarray:
    """ULA response, entry p = exp(j*pi*p*sin(theta)), p = 0..m-1."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return _phase_ramp(m, np.sin(theta))


def steering_ula_dc(m: int, sin_theta: float) -> np.ndarray:
    """ULA response parameterized directly by the direction cosine sin(theta)."""
    return _phase_ramp(m, sin_theta)


def steering_upa(nh: int, nv: int, azimuth: float, zenith: float) -> np.ndarray:
    """UPA response of an nh-by-nv surface, length nh*nv."""
    if nh < 1 or nv < 1:
        raise ValueError("nh, nv must be >= 1")
    cos_h = np.sin(zenith) * np.sin(azimuth)
    cos_v = np.cos(zenith)
    return steering_upa_dc(nh, nv, cos_h, cos_v)


def steering_upa_dc(nh: int, nv: int, cos_h: float, cos_v: float) -> np.ndarray:
    """UPA response from the two direction cosines (horizontal, vertical)."""
    return np.kron(_phase_ramp(nv, cos_v), _phase_ramp(nh, cos_h))


def _uniform_cosine_grid(n: int) -> np.ndarray:
    # n points uniform in the direction cosine over [-1, 1); at critical
    # resolution the resulting columns are orthogonal (DFT structure).
    return -1.0 + 2.0 * np.arange(n) / n


@dataclass(frozen=True)
class SteeringDictionary:
    """Overcomplete steering dictionaries with their grids stored explicitly.

    a_bs: M x M_g, columns over bs_grid (direction cosines, i.e. sin of the
        grid angles). a_irs: N x N_g with N_g = n_g_h * n_g_v; column
        iv * n_g_h + ih pairs irs_grid_h[ih] with irs_grid_v[iv].
    """

    a_bs: np.ndarray
    a_irs: np.ndarray
    bs_grid: np.ndarray
    irs_grid_h: np.ndarray
    irs_grid_v: np.ndarray
    irs_h: int
    irs_v: int

    @property
    def m(self) -> int:
        return self.a_bs.shape[0]

    @property
    def n(self) -> int:
        return self.a_irs.shape[0]

    @property
    def m_g(self) -> int:
        return self.a_bs.shape[1]

    @property
    def n_g(self) -> int:
        return self.a_irs.shape[1]

    @property
    def n_g_h(self) -> int:
        return self.irs_grid_h.size

    @property
    def n_g_v(self) -> int:
        return self.irs_grid_v.size

    def irs_column_cosines(self):
        """(cos_h, cos_v) pairs for all N_g columns, in column order."""
        ch = np.tile(self.irs_grid_h, self.n_g_v)
        cv = np.repeat(self.irs_grid_v, self.n_g_h)
        return ch, cv


def build_dictionaries(geom: ArrayGeometry, m_g: int, n_g: int) -> SteeringDictionary:
    """Build the BS and IRS dictionaries over uniform direction-cosine grids.

    The IRS grid is the Cartesian product of two sub-grids whose sizes scale
    the physical (irs_h, irs_v) proportions by a common integer factor; an
    n_g that cannot be factored that way is a configuration error.
    """
    m = geom.bs_antennas
    n = geom.irs_elements
    if m_g < m:
        raise ValueError(f"m_g ({m_g}) must be >= bs_antennas ({m})")
    if n_g < n:
        raise ValueError(f"n_g ({n_g}) must be >= irs elements ({n})")
    ratio_sq = n_g / n
    ratio = int(round(np.sqrt(ratio_sq)))
    if ratio * ratio * n != n_g:
        raise ValueError(
            f"n_g ({n_g}) is not factorable proportionally to the "
            f"{geom.irs_h}x{geom.irs_v} surface"
        )
    n_g_h = geom.irs_h * ratio
    n_g_v = geom.irs_v * ratio

    bs_grid = _uniform_cosine_grid(m_g)
    grid_h = _uniform_cosine_grid(n_g_h)
    grid_v = _uniform_cosine_grid(n_g_v)

    a_bs = np.exp(1j * np.pi * np.outer(np.arange(m), bs_grid))
    a_h = np.exp(1j * np.pi * np.outer(np.arange(geom.irs_h), grid_h))
    a_v = np.exp(1j * np.pi * np.outer(np.arange(geom.irs_v), grid_v))
    a_irs = np.kron(a_v, a_h)

    return SteeringDictionary(
        a_bs=a_bs,
        a_irs=a_irs,
        bs_grid=bs_grid,
        irs_grid_h=grid_h,
        irs_grid_v=grid_v,
        irs_h=geom.irs_h,
        irs_v=geom.irs_v,
    )


def snap_to_grid(grid: np.ndarray, value) -> np.ndarray:
    """Index of the nearest grid point for each value (ties to the lower index)."""
    value = np.atleast_1d(np.asarray(value, dtype=float))
    return np.abs(value[:, None] - grid[None, :]).argmin(axis=1)
