"""Quick self-contained oracle checks behind the `selftest` CLI subcommand.

A fast subset of the full pytest suite: dictionary structure, quantizer
bracketing, truncated-Gaussian moments against quadrature, the two
second-moment expectations against exhaustive summation, partition
degeneracy of the block updates and sweep determinism.
"""

import dataclasses

import numpy as np
from scipy.integrate import quad

from . import operators as ops
from .arrays import ArrayGeometry, build_dictionaries
from .config import ExperimentConfig
from .estimator import (HyperParams, InferenceProblem, NoiseModel,
                        PartitionSpec, init_posterior, update_f_blocks,
                        update_g_blocks, update_h_blocks)
from .measurement import TrainingSetup, build_training, design_quantizer, quantize, simulate
from .channel import draw_scenario
from .sweep import records_to_csv, run_sweep
from .truncated_gaussian import trunc_gauss_moments


def _tiny_problem(seed=0, n_active=1):
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry(2, 2, 1)
    dictionary = build_dictionaries(geom, 2, 2)
    cfg = _tiny_scenario()
    truth = draw_scenario(rng, cfg, dictionary, on_grid=True)
    setup = TrainingSetup(n_elements=2, n_users=1, t=6, t_c=20, warmup_off=2,
                          f_sn=1.0, n_active=n_active, tx_power_w=1.0)
    protocol = build_training(rng, setup)
    q = design_quantizer(4, 1.0)
    meas = simulate(rng, truth, protocol, 1e-2, 1e-2, q)
    return meas, protocol, dictionary


def _tiny_scenario():
    from .channel import LinkSpec, ScenarioConfig
    return ScenarioConfig(n_users=1, ue_irs=LinkSpec(True, 10.0, 1),
                          irs_bs=LinkSpec(True, 10.0, 1),
                          ue_bs=LinkSpec(False, -np.inf, 1))


def check_dictionary_unitarity():
    geom = ArrayGeometry(4, 2, 2)
    d = build_dictionaries(geom, 4, 4)
    err_b = np.linalg.norm(d.a_bs.conj().T @ d.a_bs - 4 * np.eye(4))
    err_i = np.linalg.norm(d.a_irs.conj().T @ d.a_irs - 4 * np.eye(4))
    return max(err_b, err_i) < 1e-8, f"gram errors {err_b:.2e}, {err_i:.2e}"


def check_quantizer_bracketing():
    rng = np.random.default_rng(1)
    q = design_quantizer(3, 2.0)
    u = 4.0 * (rng.standard_normal(10000) + 1j * rng.standard_normal(10000))
    z, lo, up = quantize(q, u)
    ok = (np.all(lo.real <= u.real) and np.all(u.real < up.real)
          and np.all(lo.imag <= u.imag) and np.all(u.imag < up.imag))
    return ok, "thresholds bracket inputs"


def check_trunc_moments():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        mu = rng.normal(0, 2)
        sigma = rng.uniform(0.2, 3.0)
        lo = mu + sigma * rng.uniform(-12, 8)
        up = lo + sigma * rng.uniform(0.1, 8)
        mean, _ = trunc_gauss_moments(mu, sigma, lo, up)
        a, b = (lo - mu) / sigma, (up - mu) / sigma
        c = a if a > 0 else (b if b < 0 else 0.0)
        w = lambda t: np.exp(-0.5 * ((t + c) ** 2 - c ** 2))
        z, _ = quad(w, a - c, b - c, epsabs=1e-14, limit=200)
        tz, _ = quad(lambda t: t * w(t), a - c, b - c, epsabs=1e-14, limit=200)
        ref = mu + sigma * (c + tz / z)
        worst = max(worst, abs(float(mean) - ref) / sigma)
    return worst < 1e-8, f"worst scaled mean error {worst:.2e}"


def check_appendix_expectations():
    meas, protocol, dictionary = _tiny_problem()
    rng = np.random.default_rng(3)
    n_f = dictionary.n_g * protocol.n_users
    n_gv = dictionary.m_g * dictionary.n_g

    def rand_moments(n):
        m = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        r = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return m, [r @ r.conj().T + np.eye(n)]

    m_g, c_g = rand_moments(n_gv)
    got = ops.expect_afgh_afg(m_g, c_g, dictionary, protocol)
    want = ops.expect_gram_exhaustive(
        lambda i: ops.dense_afg(dictionary, protocol,
                                np.eye(n_gv)[:, i].reshape(dictionary.m_g, dictionary.n_g, order="F")),
        m_g, c_g)
    err_a = np.linalg.norm(got - want) / np.linalg.norm(want)

    m_f, c_f = rand_moments(n_f)
    got = ops.expect_agfh_agf(m_f, c_f, dictionary, protocol)
    want = ops.expect_gram_exhaustive(
        lambda i: ops.dense_agf(dictionary, protocol,
                                np.eye(n_f)[:, i].reshape(dictionary.n_g, protocol.n_users, order="F")),
        m_f, c_f)
    err_b = np.linalg.norm(got - want) / np.linalg.norm(want)
    return max(err_a, err_b) < 1e-8, f"relative errors {err_a:.2e}, {err_b:.2e}"


def check_partition_degeneracy():
    meas, protocol, dictionary = _tiny_problem()
    noise = NoiseModel(1e-2, 1e-2)
    hyper = HyperParams()
    p1 = InferenceProblem(meas, protocol, dictionary, noise, PartitionSpec(1, 1, 1))
    s1 = init_posterior(p1, hyper, init_iters=3)
    s2 = s1.copy()
    for upd in (update_g_blocks, update_h_blocks, update_f_blocks):
        upd(s1, p1)
        upd(s2, p1)
    same = max(np.linalg.norm(s1.m_f - s2.m_f), np.linalg.norm(s1.m_g - s2.m_g))
    return same < 1e-12, "deterministic block updates"


def check_sweep_determinism():
    cfg = ExperimentConfig()
    cfg = dataclasses.replace(
        cfg,
        scenario=_tiny_scenario(),
        geometry=dataclasses.replace(cfg.geometry, bs_antennas=2, irs_h=2, irs_v=1,
                                     m_g=2, n_g=2),
        training=dataclasses.replace(cfg.training, t=6, t_c=20, warmup_off=2,
                                     n_active=1, bits=3),
        stop=dataclasses.replace(cfg.stop, max_iters=5),
        trials=2)
    a = records_to_csv(run_sweep(cfg).records)
    b = records_to_csv(run_sweep(cfg).records)
    return a == b, "byte-identical repeat"


CHECKS = (
    ("dictionary unitarity", check_dictionary_unitarity),
    ("quantizer bracketing", check_quantizer_bracketing),
    ("truncated-Gaussian moments", check_trunc_moments),
    ("second-moment expectations", check_appendix_expectations),
    ("partition degeneracy", check_partition_degeneracy),
    ("sweep determinism", check_sweep_determinism),
)


def run_selftest(stream=None) -> bool:
    import sys
    stream = stream or sys.stdout
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", file=stream)
    return all_ok
