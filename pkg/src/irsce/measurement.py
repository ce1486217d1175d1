"""Training protocol construction, uniform quantization and measurement synthesis.

The training phase transmits i.i.d. QPSK pilots at full power while a small
set of surface elements acts as sensors; the remaining elements reflect with
unit-modulus random phases after an initial all-off warmup window. Sensor
outputs pass through a per-real-dimension mid-rise uniform quantizer whose
interval boundaries are closed below and open above.
"""

from dataclasses import dataclass

import numpy as np

from .util import to_complex

# Optimal uniform-quantizer step for a unit-variance Gaussian input,
# indexed by bit width (Max's classic table).
_OPTIMAL_STEP = {
    1: 1.596, 2: 0.996, 3: 0.586, 4: 0.335,
    5: 0.188, 6: 0.104, 7: 0.057, 8: 0.031,
}


@dataclass(frozen=True)
class TrainingSetup:
    """Knobs needed to generate one training protocol."""

    n_elements: int
    n_users: int
    t: int
    t_c: int
    warmup_off: int = 50
    f_sn: float = 1.0
    n_active: int = 4
    tx_power_w: float = 0.1995262314968879  # 23 dBm
    v_redraw: str = "per_slot"  # or "per_period"

    def __post_init__(self):
        if self.t > self.t_c:
            raise ValueError(f"t ({self.t}) must not exceed t_c ({self.t_c})")
        if self.n_active > self.n_elements:
            raise ValueError(f"n_active ({self.n_active}) exceeds n_elements ({self.n_elements})")
        if self.n_active < 0:
            raise ValueError("n_active must be >= 0")
        if self.warmup_off > self.t:
            raise ValueError(f"warmup_off ({self.warmup_off}) exceeds t ({self.t})")
        if not (0 < self.f_sn <= 1):
            raise ValueError("f_sn must lie in (0, 1]")
        if self.v_redraw not in ("per_slot", "per_period"):
            raise ValueError("v_redraw must be 'per_slot' or 'per_period'")


@dataclass(frozen=True)
class TrainingProtocol:
    """Pilots, sensor schedule and reflection schedule over the training phase."""

    x: np.ndarray       # K x T pilots
    omega: np.ndarray   # N x T binary sensor schedule
    v: np.ndarray       # N x T reflection coefficients
    s: np.ndarray       # N x T effective reflection, (1 - omega) * v
    t: int
    t_c: int
    f_sn: float
    warmup_off: int

    @property
    def n_elements(self) -> int:
        return self.omega.shape[0]

    @property
    def n_users(self) -> int:
        return self.x.shape[0]


def build_training(rng, setup: TrainingSetup) -> TrainingProtocol:
    """Generate pilots X, sensor schedule Omega and reflection schedule v.

    X is i.i.d. QPSK at full power. Omega activates n_active elements drawn
    uniformly without replacement, redrawn at the start of every switching
    period of length round(1/f_sn). v is zero during the warmup window and
    unit-modulus with uniform phases afterwards.
    """
    n, k, t = setup.n_elements, setup.n_users, setup.t

    qpsk = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=(k, t))))
    x = np.sqrt(setup.tx_power_w) * qpsk

    omega = np.zeros((n, t))
    period = int(round(1.0 / setup.f_sn))
    for start in range(0, t, period):
        idx = rng.choice(n, size=setup.n_active, replace=False) if setup.n_active else []
        omega[idx, start:min(start + period, t)] = 1.0

    v = np.zeros((n, t), dtype=complex)
    if setup.v_redraw == "per_slot":
        phases = rng.uniform(0.0, 2 * np.pi, size=(n, t))
    else:
        per = rng.uniform(0.0, 2 * np.pi, size=(n, (t + period - 1) // period))
        phases = np.repeat(per, period, axis=1)[:, :t]
    v[:, setup.warmup_off:] = np.exp(1j * phases[:, setup.warmup_off:])

    s = (1.0 - omega) * v
    return TrainingProtocol(x=x, omega=omega, v=v, s=s, t=t, t_c=setup.t_c,
                            f_sn=setup.f_sn, warmup_off=setup.warmup_off)


@dataclass(frozen=True)
class Quantizer:
    """Mid-rise uniform quantizer applied per real dimension.

    thresholds has 2^bits + 1 strictly increasing entries with +-inf at the
    ends; level i is the representative of [thresholds[i], thresholds[i+1]).
    """

    bits: int
    step: float
    levels: np.ndarray
    thresholds: np.ndarray


def design_quantizer(bits: int, signal_std: float) -> Quantizer:
    """Uniform quantizer scaled for a complex input of std signal_std.

    The step is c_B * signal_std / sqrt(2) with c_B the optimal uniform step
    for a unit-variance Gaussian; beyond the tabulated 8 bits the step is
    halved per extra bit, which keeps the support fixed at ~ +-4 input stds.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if bits > 16:
        raise ValueError("bit widths above 16 are unsupported")
    if signal_std <= 0:
        raise ValueError("signal_std must be > 0")
    c = _OPTIMAL_STEP[bits] if bits <= 8 else _OPTIMAL_STEP[8] * 2.0 ** (8 - bits)
    step = c * signal_std / np.sqrt(2.0)
    half = 2 ** (bits - 1)
    levels = step * (np.arange(2 ** bits) - half + 0.5)
    inner = step * (np.arange(1, 2 ** bits) - half)
    thresholds = np.concatenate(([-np.inf], inner, [np.inf]))
    return Quantizer(bits=bits, step=float(step), levels=levels, thresholds=thresholds)


def quantize(q: Quantizer, u):
    """Quantize complex input(s); returns (z, z_lo, z_up) of the same shape.

    Real and imaginary parts are mapped independently; the returned
    thresholds bracket the input as lo <= x < up per real dimension.
    """
    u = np.asarray(u, dtype=complex)
    inner = q.thresholds[1:-1]

    def one_axis(x):
        idx = np.searchsorted(inner, x, side="right")
        return q.levels[idx], q.thresholds[idx], q.thresholds[idx + 1]

    zr, lor, upr = one_axis(u.real)
    zi, loi, upi = one_axis(u.imag)
    return zr + 1j * zi, to_complex(lor, loi), to_complex(upr, upi)


@dataclass(frozen=True)
class MeasurementSet:
    """BS observations, sensor observations and pseudo-measurements."""

    y: np.ndarray       # M x T
    z: np.ndarray       # N x T, zero where omega == 0
    z_hat: np.ndarray   # N x T pseudo-measurements
    z_lo: np.ndarray    # N x T lower thresholds (complex, per Re/Im)
    z_up: np.ndarray    # N x T upper thresholds
    u_true: np.ndarray  # N x T pre-quantization sensor signal (diagnostics)


def simulate(rng, ch, tp: TrainingProtocol, sigma_b_sq: float, sigma_i_sq: float,
             q: Quantizer) -> MeasurementSet:
    """Generate BS and sensor measurements for one channel draw.

    Y = G_bar (S o F_bar X) + H_bar X + N_B and U = Omega o F_bar X + N_I in
    the pseudo-measurement form; entries of (Z_hat, Z_lo, Z_up) where omega
    is zero are assigned the quantization interval containing 0, which never
    influences inference.
    """
    m = ch.g_bar.shape[0]
    n, t = tp.omega.shape
    fx = ch.f_bar @ tp.x
    noise_b = np.sqrt(sigma_b_sq / 2.0) * (
        rng.standard_normal((m, t)) + 1j * rng.standard_normal((m, t)))
    noise_i = np.sqrt(sigma_i_sq / 2.0) * (
        rng.standard_normal((n, t)) + 1j * rng.standard_normal((n, t)))

    y = ch.g_bar @ (tp.s * fx) + ch.h_bar @ tp.x + noise_b
    u_true = tp.omega * fx + noise_i

    z_hat, z_lo, z_up = quantize(q, u_true)
    z0, lo0, up0 = quantize(q, 0.0 + 0.0j)
    inactive = tp.omega == 0
    z_hat = np.where(inactive, z0, z_hat)
    z_lo = np.where(inactive, lo0, z_lo)
    z_up = np.where(inactive, up0, z_up)
    z = tp.omega * z_hat
    return MeasurementSet(y=y, z=z, z_hat=z_hat, z_lo=z_lo, z_up=z_up, u_true=u_true)
