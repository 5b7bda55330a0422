"""What a channel observer learns: the case for edge-based noise.

An eavesdropper on edge (j, i) sees the broadcast value plus discretised
white noise whose per-sample standard deviation is sigma/sqrt(dt) - for
sigma = 1 and dt = 0.01, a single observation is off by 10 on average,
drowning the signal. Averaging helps only until the sender re-broadcasts,
which caps the usable window. With sigma = 0 the very first observation
discloses the initial state exactly; that is what the noise prevents.
"""
import numpy as np

import etconsensus as ec

g = ec.build_digraph(3, [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)])
gain = ec.make_gain(1.0, 0.6)

for sigma in (0.0, 1.0):
    noise = ec.NoiseModel.uniform(g, sigma)
    cfg = ec.SimConfig(graph=g, gain=gain, noise=noise, x0=(1.0, 0.0, -1.0),
                       dt=0.01, t_end=5.0, seed=42, sample_stride=10)
    traj = ec.simulate(cfg)
    probe = ec.privacy_probe(traj, edge=(1, 2), window=400)
    print(f"sigma = {sigma}: one-run estimate of x_1(0) from edge (1,2): "
          f"{probe.estimate:+.4f} (true 1.0, sq error {probe.sq_error:.4f}, "
          f"window used {probe.window_used}"
          f"{', truncated at first re-broadcast' if probe.truncated else ''})")

print("\naveraging error vs window, RMS over 300 runs (sigma = 1):")
noise = ec.NoiseModel.uniform(g, 1.0)
cfg = ec.SimConfig(graph=g, gain=gain, noise=noise, x0=(1.0, 0.0, -1.0),
                   dt=0.01, t_end=5.0, seed=42, sample_stride=10)
ensemble = ec.simulate_ensemble(cfg, 300, base_seed=9)

windows = (1, 4, 16, 64, 256)
sq = {w: [] for w in windows}
truncations = 0
for tr in ensemble:
    probe = ec.privacy_probe(tr, edge=(1, 2), window=max(windows))
    truncations += probe.truncated
    for w in windows:
        idx = min(w, probe.window_used) - 1
        sq[w].append(probe.sq_errors_by_window[idx])

print(f"  (window truncated by the sender's first re-broadcast in "
      f"{truncations}/300 runs)")
print("  window   RMS error   ideal sigma/sqrt(dt*w)")
for w in windows:
    rms = float(np.sqrt(np.mean(sq[w])))
    print(f"  {w:6d}   {rms:9.3f}   {1.0 / np.sqrt(0.01 * w):9.3f}")

print("\nEven hundreds of samples leave an O(1) error on an O(1) secret, and"
      "\nthe trigger cuts the window long before the average sharpens.")
