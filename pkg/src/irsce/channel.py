"""Rician multipath link synthesis and the desk-scale scenario generator.

Each link is a Rician sum of one optional LoS term weighted
sqrt(kappa/(1+kappa)) and L NLoS terms weighted sqrt(1/(L*(1+kappa))),
every term carrying an i.i.d. CN(0, 1/PL) gain, plus an overall sqrt(dim)
scale where dim is the product of the array sizes the link connects
(N for UE-IRS, M*N for IRS-BS, M for UE-BS). Azimuths are drawn uniform on
(-pi/2, pi/2) and zeniths uniform on (pi/4, 3*pi/4) to stay away from
endfire.

In on-grid mode the drawn direction cosines are snapped to the dictionary
grids and the sparse angular matrices F, G, H are recorded alongside, with
F_bar = A_I F etc. holding exactly by construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .arrays import SteeringDictionary, snap_to_grid, steering_ula_dc, steering_upa_dc
from .util import db2lin, dbm2watt


@dataclass(frozen=True)
class LinkParams:
    """Parameters of a single Rician link draw."""

    rician_k: float  # linear K-factor, 0 for pure NLoS, np.inf for pure LoS
    n_nlos_paths: int
    path_loss_db: float
    los: bool

    def __post_init__(self):
        if self.rician_k < 0:
            raise ValueError("rician_k must be >= 0")
        if self.n_nlos_paths < 0:
            raise ValueError("n_nlos_paths must be >= 0")
        if not self.los and self.rician_k != 0:
            raise ValueError("NLoS links carry rician_k = 0")


@dataclass(frozen=True)
class LinkSpec:
    """Per-link-family scenario settings (path losses come from geometry)."""

    los: bool
    rician_k_db: float
    n_paths: int


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, RF parameters and per-link settings of the simulated cell."""

    n_users: int = 4
    bs_position: tuple = (0.0, 0.0)
    irs_position: tuple = (20.0, 10.0)
    user_center: tuple = (40.0, 0.0)
    user_radius: float = 5.0
    bandwidth_hz: float = 80e6
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0
    tx_power_dbm: float = 23.0
    data_power_dbm: float = 23.0
    ue_irs: LinkSpec = field(default_factory=lambda: LinkSpec(True, 13.2, 4))
    irs_bs: LinkSpec = field(default_factory=lambda: LinkSpec(True, 13.2, 4))
    ue_bs: LinkSpec = field(default_factory=lambda: LinkSpec(False, -np.inf, 4))

    def __post_init__(self):
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if self.user_radius <= 0:
            raise ValueError("user_radius must be > 0")

    @property
    def noise_variance(self) -> float:
        """sigma_B^2 = sigma_I^2 = W * N0 * NF in watts."""
        n0_w = dbm2watt(self.noise_density_dbm_hz)
        return float(self.bandwidth_hz * n0_w * db2lin(self.noise_figure_db))

    @property
    def tx_power_w(self) -> float:
        return float(dbm2watt(self.tx_power_dbm))

    @property
    def data_power_w(self) -> float:
        return float(dbm2watt(self.data_power_dbm))


@dataclass(frozen=True)
class ChannelSet:
    """Ground-truth spatial links and, for on-grid draws, their angular forms."""

    f_bar: np.ndarray  # N x K
    g_bar: np.ndarray  # M x N
    h_bar: np.ndarray  # M x K
    f_ang: np.ndarray | None = None  # N_g x K
    g_ang: np.ndarray | None = None  # M_g x N_g
    h_ang: np.ndarray | None = None  # M_g x K
    user_positions: np.ndarray | None = None  # K x 2, meters

    @property
    def on_grid(self) -> bool:
        return self.f_ang is not None


def path_loss_db(d: float, los: bool) -> float:
    """Distance-dependent path loss in dB: LoS 31.4 + 20 log10 d, NLoS 42 + 29.2 log10 d."""
    if d <= 0:
        raise ValueError("distance must be > 0")
    if los:
        return 31.4 + 20.0 * np.log10(d)
    return 42.0 + 29.2 * np.log10(d)


def _rician_weights(rng, params: LinkParams):
    """Complex path weights (w_los, w_nlos[L]); either part may be empty."""
    pl_lin = db2lin(params.path_loss_db)
    gain_std = np.sqrt(1.0 / pl_lin)
    kappa = params.rician_k
    w_los = None
    if kappa > 0:
        alpha0 = gain_std * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
        los_scale = 1.0 if np.isinf(kappa) else np.sqrt(kappa / (1.0 + kappa))
        w_los = los_scale * alpha0
    w_nlos = np.zeros(0, dtype=complex)
    ell = params.n_nlos_paths
    if ell > 0 and not np.isinf(kappa):
        alphas = gain_std * (
            rng.standard_normal(ell) + 1j * rng.standard_normal(ell)
        ) / np.sqrt(2.0)
        w_nlos = np.sqrt(1.0 / (ell * (1.0 + kappa))) * alphas
    return w_los, w_nlos


def _path_term(sample):
    if isinstance(sample, tuple):
        a_rx, a_tx = sample
        return np.outer(a_rx, a_tx.conj())
    return np.asarray(sample)


def draw_link(rng, params: LinkParams, steering_sampler, return_parts: bool = False):
    """Draw one Rician link.

    steering_sampler(rng) returns either a steering vector (vector links) or
    an (a_rx, a_tx) pair, in which case the path term is the outer product
    a_rx a_tx^H. The overall sqrt(dim) scale is inferred from the sampled
    shapes.
    """
    w_los, w_nlos = _rician_weights(rng, params)
    n_terms = (1 if w_los is not None else 0) + w_nlos.size
    if n_terms == 0:
        zero = np.zeros_like(_path_term(steering_sampler(rng)))
        return (zero, zero, zero) if return_parts else zero
    terms = [_path_term(steering_sampler(rng)) for _ in range(n_terms)]
    scale = np.sqrt(terms[0].size)
    los_part = np.zeros_like(terms[0])
    offset = 0
    if w_los is not None:
        los_part = scale * w_los * terms[0]
        offset = 1
    nlos_part = np.zeros_like(terms[0])
    for j, w in enumerate(w_nlos):
        nlos_part = nlos_part + scale * w * terms[offset + j]
    link = los_part + nlos_part
    if return_parts:
        return link, los_part, nlos_part
    return link


def nominal_sensor_std(cfg: ScenarioConfig, n_elements: int) -> float:
    """Analytic per-sensor received std used to scale the quantizer.

    Uses the user-disk-center distance to the IRS, the UE-IRS path loss at
    that distance, and the per-element average channel power N/PL, plus the
    sensor noise floor.
    """
    d = float(np.linalg.norm(np.asarray(cfg.user_center) - np.asarray(cfg.irs_position)))
    pl = db2lin(path_loss_db(d, cfg.ue_irs.los))
    signal_power = cfg.n_users * n_elements * cfg.tx_power_w / pl
    return float(np.sqrt(signal_power + cfg.noise_variance))


def _draw_path_cosines(rng, n_paths: int, upa: bool):
    """Direction cosines for n_paths paths; UPA paths get an (h, v) pair."""
    az = rng.uniform(-np.pi / 2, np.pi / 2, size=n_paths)
    if not upa:
        return np.sin(az)
    zen = rng.uniform(np.pi / 4, 3 * np.pi / 4, size=n_paths)
    return np.sin(zen) * np.sin(az), np.cos(zen)


def draw_scenario(rng, cfg: ScenarioConfig, dictionary: SteeringDictionary,
                  on_grid: bool = True) -> ChannelSet:
    """Draw user positions and all three link families.

    Users are placed uniformly on the circle of radius user_radius around
    user_center. With on_grid=True every path's direction cosines are
    snapped to the dictionary grids and the angular matrices are recorded.
    """
    m, n = dictionary.m, dictionary.n
    m_g, n_g = dictionary.m_g, dictionary.n_g
    k = cfg.n_users
    irs_pos = np.asarray(cfg.irs_position, dtype=float)
    bs_pos = np.asarray(cfg.bs_position, dtype=float)
    center = np.asarray(cfg.user_center, dtype=float)

    phi = rng.uniform(0.0, 2 * np.pi, size=k)
    users = center + cfg.user_radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)

    f_bar = np.zeros((n, k), dtype=complex)
    h_bar = np.zeros((m, k), dtype=complex)
    f_ang = np.zeros((n_g, k), dtype=complex) if on_grid else None
    g_ang = np.zeros((m_g, n_g), dtype=complex) if on_grid else None
    h_ang = np.zeros((m_g, k), dtype=complex) if on_grid else None

    def irs_column(ch, cv):
        if on_grid:
            ih = snap_to_grid(dictionary.irs_grid_h, ch)[0]
            iv = snap_to_grid(dictionary.irs_grid_v, cv)[0]
            col = iv * dictionary.n_g_h + ih
            return col, dictionary.a_irs[:, col]
        return None, steering_upa_dc(dictionary.irs_h, dictionary.irs_v, ch, cv)

    def bs_column(cb):
        if on_grid:
            ib = snap_to_grid(dictionary.bs_grid, cb)[0]
            return ib, dictionary.a_bs[:, ib]
        return None, steering_ula_dc(m, cb)

    def link_params(spec: LinkSpec, dist: float) -> LinkParams:
        kappa = 0.0 if not spec.los else float(db2lin(spec.rician_k_db))
        return LinkParams(kappa, spec.n_paths, path_loss_db(dist, spec.los), spec.los)

    def path_list(params: LinkParams):
        """Weights for (LoS?, NLoS...) paths in draw order."""
        w_los, w_nlos = _rician_weights(rng, params)
        weights = []
        if w_los is not None:
            weights.append(w_los)
        weights.extend(list(w_nlos))
        n_nlos = w_nlos.size
        return weights, w_los is not None, n_nlos

    # UE-IRS links, one per user
    for kk in range(k):
        dist = float(np.linalg.norm(users[kk] - irs_pos))
        params = link_params(cfg.ue_irs, dist)
        weights, _, _ = path_list(params)
        ch, cv = _draw_path_cosines(rng, len(weights), upa=True)
        for p, w in enumerate(weights):
            idx, col = irs_column(ch[p], cv[p])
            coef = np.sqrt(n) * w
            if on_grid:
                f_ang[idx, kk] += coef
            else:
                f_bar[:, kk] += coef * col

    # IRS-BS link
    dist_ib = float(np.linalg.norm(irs_pos - bs_pos))
    params_g = link_params(cfg.irs_bs, dist_ib)
    weights_g, _, _ = path_list(params_g)
    cb = _draw_path_cosines(rng, len(weights_g), upa=False)
    ch_g, cv_g = _draw_path_cosines(rng, len(weights_g), upa=True)
    g_bar = np.zeros((m, n), dtype=complex)
    for p, w in enumerate(weights_g):
        ib, col_b = bs_column(cb[p])
        ii, col_i = irs_column(ch_g[p], cv_g[p])
        coef = np.sqrt(m * n) * w
        if on_grid:
            g_ang[ib, ii] += coef
        else:
            g_bar += coef * np.outer(col_b, col_i.conj())

    # UE-BS links
    for kk in range(k):
        dist = float(np.linalg.norm(users[kk] - bs_pos))
        params = link_params(cfg.ue_bs, dist)
        weights, _, _ = path_list(params)
        cb = _draw_path_cosines(rng, len(weights), upa=False)
        for p, w in enumerate(weights):
            idx, col = bs_column(cb[p])
            coef = np.sqrt(m) * w
            if on_grid:
                h_ang[idx, kk] += coef
            else:
                h_bar[:, kk] += coef * col

    if on_grid:
        f_bar = dictionary.a_irs @ f_ang
        g_bar = dictionary.a_bs @ g_ang @ dictionary.a_irs.conj().T
        h_bar = dictionary.a_bs @ h_ang

    return ChannelSet(
        f_bar=f_bar, g_bar=g_bar, h_bar=h_bar,
        f_ang=f_ang, g_ang=g_ang, h_ang=h_ang,
        user_positions=users,
    )


def cascaded_channel(f_bar: np.ndarray, g_bar: np.ndarray) -> np.ndarray:
    """UE-IRS-BS cascaded link, MN x K; column k is vec(G_bar diag(f_bar_k))."""
    m, n = g_bar.shape
    if f_bar.shape[0] != n:
        raise ValueError("f_bar rows must match g_bar columns")
    k = f_bar.shape[1]
    out = np.empty((m * n, k), dtype=complex)
    for kk in range(k):
        out[:, kk] = (g_bar * f_bar[:, kk][None, :]).reshape(-1, order="F")
    return out
