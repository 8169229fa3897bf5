"""Shared fixtures for the heavy benchmark runs used by the acceptance suite."""

import os

import pytest

from srsub import BeamConfig, NoiseLevel, RegressorSpec, load_corpus, run_benchmark

WORKERS = min(2, os.cpu_count() or 1)
BENCH_SEED = 42
BENCH_N = 1000


@pytest.fixture(scope="session")
def feynman_problems():
    return load_corpus("feynman-desk")


@pytest.fixture(scope="session")
def eponymous_problems():
    return load_corpus("eponymous-desk")


@pytest.fixture(scope="session")
def feynman_report_poly(feynman_problems):
    """Noise-free run on the physics-style subset with polynomial fits; serves
    both the reduction-rate and the recovery-boost criteria."""
    return run_benchmark(
        feynman_problems, BeamConfig(), RegressorSpec(kind="poly"),
        NoiseLevel(0.0), seed=BENCH_SEED, n_samples=BENCH_N,
        fit_models=True, workers=WORKERS,
    )


@pytest.fixture(scope="session")
def eponymous_report(eponymous_problems):
    return run_benchmark(
        eponymous_problems, BeamConfig(), RegressorSpec(kind="poly"),
        NoiseLevel(0.0), seed=BENCH_SEED, n_samples=BENCH_N,
        fit_models=False, workers=WORKERS,
    )


@pytest.fixture(scope="session")
def feynman_rates_by_arm(feynman_problems):
    """Reduction rates for the substitution-type ablation arms."""
    arms = {
        "input": BeamConfig(sub_types=frozenset({"input"})),
        "aifeynman": BeamConfig(grammar="aifeynman"),
    }
    out = {}
    for label, cfg in arms.items():
        rep = run_benchmark(
            feynman_problems, cfg, RegressorSpec(kind="poly"),
            NoiseLevel(0.0), seed=BENCH_SEED, n_samples=BENCH_N,
            fit_models=False, workers=WORKERS,
        )
        out[label] = rep.aggregates["reduction_rate"]
    return out


@pytest.fixture(scope="session")
def feynman_rates_by_noise(feynman_problems):
    """Reduction rates for codec and the volume baseline at two noise levels."""
    out = {}
    for gamma in (0.01, 0.1):
        for measure in ("codec", "volume"):
            rep = run_benchmark(
                feynman_problems, BeamConfig(measure=measure),
                RegressorSpec(kind="poly"), NoiseLevel(gamma),
                seed=BENCH_SEED, n_samples=BENCH_N,
                fit_models=False, workers=WORKERS,
            )
            out[(gamma, measure)] = rep.aggregates["reduction_rate"]
    return out
