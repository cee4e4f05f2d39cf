"""Closed-form detection probability against a Monte Carlo detector.

A fixed reflection vector alpha is observed in complex Gaussian noise. The
Neyman-Pearson detector thresholds Re(alpha^H y); its detection probability
has a closed form in the reflection energy |alpha|^2 and the noise power.
This script sweeps the energy and prints both numbers side by side.

Run: python3 demos/01_detector.py
"""

import numpy as np

from netisac import detection_probability, detector_threshold, simulate_detector

SIGMA_SQ = 1.0
P_FA = 1e-2
TRIALS = 100_000

print(f"noise power {SIGMA_SQ}, p_fa {P_FA}, {TRIALS} trials per row\n")
print(f"{'2E/sigma^2':>11} {'threshold':>10} {'p_D theory':>11} {'p_D MC':>8} {'p_FA MC':>8}")
rng = np.random.default_rng(1)
for snr in (0.25, 1, 4, 9, 16, 25):
    energy = snr * SIGMA_SQ / 2
    direction = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    alpha = np.sqrt(energy) * direction / np.linalg.norm(direction)
    pd = detection_probability(energy, P_FA, SIGMA_SQ)
    thr = detector_threshold(energy, P_FA, SIGMA_SQ)
    pd_mc, pfa_mc = simulate_detector(alpha, SIGMA_SQ, P_FA, trials=TRIALS, seed=int(snr * 100))
    print(f"{snr:>11g} {thr:>10.4f} {pd:>11.4f} {pd_mc:>8.4f} {pfa_mc:>8.4f}")

print("\nOnly the energy matters: the direction of alpha was random in every row.")
