"""Regenerate the bundled surrogate sound-pressure curves and reference beta.

The measured curves are not redistributed, so simulations default to
coefficient curves fitted from these synthetic curves instead. Each main
effect is a smooth trend in engine speed plus narrow resonance peaks.

    python scripts/make_surrogate.py [--noise-scale S] [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

from fglht.data import (
    N_RUNS, N_SPEEDS, RPM_RANGE, design_array, rpm_to_unit, write_beta_csv, write_noise_csv,
)
from fglht.model import FunctionalDataset, build_design, estimate_beta

RESOURCES = Path(__file__).resolve().parents[1] / "src" / "fglht" / "resources"
SEED = 20240917
# Per-factor gains for the trend and peak shapes (A..G) and the noise scale.
# They were fitted by least squares to reference power levels for Case 1 at
# (rho, delta) = (0.3, 0.08), (0.5, 0.15), (0.7, 0.20) and to data-based
# powers for factors A..F. Factor G and all null rates were left out of
# the fit so that they remain independent checks.
TREND_GAIN = np.array([1.416, 2.999, 1.489, 0.300, 0.0, 0.139, 0.424])
PEAK_GAIN = np.array([7.480, 1.905, 8.102, 7.371, 8.893, 4.125, 5.153])
NOISE_SCALE = 3.433


def bump(t, centre, width):
    return np.exp(-(((t - centre) / width) ** 2))


def main_effects(t):
    """Low-minus-high contrast curves for factors A..G (dB)."""
    trend = np.array([
        0.6 + 1.0 * t,
        0.25 * np.sin(2 * np.pi * t),
        1.2 * t**2,
        1.0 + 1.5 * t,
        0.2 * np.cos(3 * np.pi * t),
        0.3 + 0.3 * t,
        2.5 + 1.5 * t,
    ])
    w = 0.04
    peaks = np.array([
        bump(t, 0.35, w),
        0.3 * bump(t, 0.15, w),
        bump(t, 0.72, w),
        bump(t, 0.25, w) + 0.7 * bump(t, 0.62, w),
        0.3 * bump(t, 0.9, w),
        bump(t, 0.8, w),
        1.5 * bump(t, 0.55, w) + 0.8 * bump(t, 0.2, w),
    ])
    return TREND_GAIN[:, None] * trend + PEAK_GAIN[:, None] * peaks


def surrogate(noise_scale=NOISE_SCALE):
    rpm = np.linspace(*RPM_RANGE, N_SPEEDS)
    t = rpm_to_unit(rpm).points
    x = design_array()
    grand = 62.0 + 12.0 * t + 2.5 * bump(t, 0.55, 0.08)
    # Level 1 (low) gets +effect/2, level 2 (high) gets -effect/2.
    signs = x[:, 1::2] - x[:, 2::2]
    mean = grand + signs @ main_effects(t) / 2
    rng = np.random.default_rng(SEED)
    cov = 0.8**2 * np.exp(-0.5 * ((t[:, None] - t[None, :]) / 0.12) ** 2)
    chol = np.linalg.cholesky(cov + 1e-10 * np.eye(t.size))
    noise = rng.standard_normal((N_RUNS, t.size)) @ chol.T
    noise += 0.15 * rng.standard_normal((N_RUNS, t.size))
    return rpm, mean + noise_scale * noise


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--noise-scale", type=float, default=NOISE_SCALE)
    ap.add_argument("--out", type=Path, default=RESOURCES)
    args = ap.parse_args()
    rpm, values = surrogate(args.noise_scale)
    args.out.mkdir(parents=True, exist_ok=True)
    write_noise_csv(args.out / "surrogate_noise.csv", values, rpm)
    y = FunctionalDataset(rpm_to_unit(rpm), values)
    write_beta_csv(args.out / "reference_beta.csv", estimate_beta(y, build_design(design_array())))


if __name__ == "__main__":
    main()
