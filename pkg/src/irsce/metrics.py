"""NMSE, power consumption, heuristic sum spectral efficiency and energy efficiency.

The spectral-efficiency evaluator is deliberately simple and is applied
identically to every estimator: the surface phases are conjugate-aligned to
the estimated cascaded channel of the strongest user against a reference
combiner direction, the uplink combiner is linear MMSE built from the
estimated effective channels, and the resulting SINRs are evaluated on the
true effective channels.
"""

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .estimator import EstimateSet
from .util import lin2db


def nmse(est: np.ndarray, truth: np.ndarray) -> float:
    """||est - truth||_F^2 / ||truth||_F^2."""
    truth = np.asarray(truth)
    denom = np.linalg.norm(truth) ** 2
    if denom == 0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(np.asarray(est) - truth) ** 2 / denom)


def nmse_db(est, truth) -> float:
    return float(lin2db(nmse(est, truth)))


@dataclass(frozen=True)
class PowerModel:
    """Hardware power constants (watts, joules, hertz)."""

    b_inf: int = 10                # effective BS ADC resolution, bits
    fom: float = 1432.1e-15        # ADC energy per conversion step
    f_s: float = 80e6              # sampling rate
    p_t: float = 0.25e-9           # fronthaul traffic power per bps
    p_lo: float = 22.5e-3          # local oscillator
    p_rf: float = 31.6e-3          # RF chain

    def __post_init__(self):
        if min(self.b_inf, self.fom, self.f_s, self.p_t, self.p_lo, self.p_rf) <= 0:
            raise ValueError("power model constants must be positive")


def adc_power(pm: PowerModel, bits: int) -> float:
    """P_ADC(B) = FOM * f_s * 2^B."""
    return pm.fom * pm.f_s * 2.0 ** bits


def power_total(pm: PowerModel, m: int, n_a: int, bits: int, w: float,
                t: int, t_c: int) -> float:
    """Total consumed power in watts.

    P_BS = P_LO + M (P_RF + 2 P_ADC(B_inf));
    P_IRS = P_LO + N_a (P_RF + 2 P_ADC(B));
    P_FH = 2 B N_a W P_T, duty-cycled by T/T_c. With no active sensors the
    total is exactly P_BS.
    """
    p_bs = pm.p_lo + m * (pm.p_rf + 2.0 * adc_power(pm, pm.b_inf))
    if n_a == 0:
        return p_bs
    p_irs = pm.p_lo + n_a * (pm.p_rf + 2.0 * adc_power(pm, bits))
    p_fh = 2.0 * bits * n_a * w * pm.p_t
    return p_bs + (t / t_c) * (p_irs + p_fh)


def energy_efficiency(se: float, total_power: float, w: float) -> float:
    """bits per joule: W * SE / P_total."""
    if total_power <= 0:
        raise ValueError("total power must be > 0")
    return w * se / total_power


def _reflection_from_estimates(est: EstimateSet, n: int) -> np.ndarray:
    """Unit-modulus reflection vector aligned to the strongest user's
    estimated cascade; all-ones when there is nothing to align to."""
    m = est.h_bar.shape[0]
    k = est.cascaded.shape[1]
    casc = est.cascaded.reshape(m, n, k, order="F")
    strengths = np.linalg.norm(casc, axis=(0, 1))
    star = int(np.argmax(strengths))  # argmax takes the lowest index on ties
    c_star = casc[:, :, star]
    ref = est.h_bar[:, star]
    if np.linalg.norm(ref) == 0:
        if np.linalg.norm(c_star) == 0:
            return np.ones(n, dtype=complex)
        _, _, vh = np.linalg.svd(c_star, full_matrices=False)
        ref = c_star @ vh[0].conj()  # principal left direction
    proj = ref.conj() @ c_star  # length N
    v = np.ones(n, dtype=complex)
    nz = np.abs(proj) > 0
    v[nz] = np.exp(-1j * np.angle(proj[nz]))
    return v


def sum_spectral_efficiency(est: EstimateSet, truth: ChannelSet,
                            data_power_w: float, noise_var: float) -> float:
    """Sum rate of the uplink under the shared alignment + MMSE heuristic.

    Phases come from the estimates, the combiner from the estimated
    effective channels, and the SINRs from the true ones; users whose
    estimated effective channel is identically zero contribute zero rate.
    """
    m, n = truth.g_bar.shape
    k = truth.f_bar.shape[1]
    v = _reflection_from_estimates(est, n)

    casc_est = est.cascaded.reshape(m, n, k, order="F")
    eff_est = np.stack([casc_est[:, :, kk] @ v + est.h_bar[:, kk] for kk in range(k)], axis=1)
    eff_true = np.stack(
        [(truth.g_bar * truth.f_bar[:, kk][None, :]) @ v + truth.h_bar[:, kk]
         for kk in range(k)], axis=1)

    cov = data_power_w * (eff_est @ eff_est.conj().T) + noise_var * np.eye(m)
    combiner = np.linalg.solve(cov, eff_est)  # column k = MMSE filter of user k

    se = 0.0
    for kk in range(k):
        w_k = combiner[:, kk]
        if np.linalg.norm(w_k) == 0:
            continue
        gains = np.abs(w_k.conj() @ eff_true) ** 2
        signal = data_power_w * gains[kk]
        interference = data_power_w * (np.sum(gains) - gains[kk])
        noise = noise_var * np.linalg.norm(w_k) ** 2
        se += np.log2(1.0 + signal / (interference + noise))
    return float(se)


@dataclass(frozen=True)
class MetricRecord:
    """One evaluated (trial, estimator) outcome."""

    estimator: str
    sweep_name: str
    sweep_value: float
    trial: int
    seed: int
    nmse_f_db: float
    nmse_g_db: float
    nmse_h_db: float
    nmse_casc_db: float
    se: float
    power_w: float
    ee: float
    error: str | None = None
