"""The numerical scheme preserves exponential stability.

The two-dimensional system

    dx1 = (-2 x1 - 3 x1^3 + int_{-1/4}^0 x2(t+s) ds) dt + x1 dB1
    dx2 = (-2 x2 - 2 x2^3 + int_{-1/2}^0 x1^3(t+s) ds) dt + x2 dB2

is exponentially stable in mean square, and the clipped explicit scheme
inherits that: log E|Y(t)|^2 decays linearly, the cross-replica sample mean
collapses to zero, and almost every path has a negative Lyapunov-type rate
(1/T) log |Y(T)|.

Run:  python demos/04_exponential_stability.py
CLI:  sfde-tem stability --model example2
"""

import numpy as np

import sfde_tem as st

SEED = 42
model = st.builtin_example2()
report = st.stability_decay(
    model, st.SchemeConfig(step=2.0**-6, horizon=10.0),
    p_exponent=2.0, samples=500, seed=SEED, report_every=32,
)

print("t        log E|Y(t)|^2    sample mean")
for t, lm, mean in zip(report.times[::4], report.log_moment[::4], report.sample_mean[::4]):
    print(f"{t:<8.3f} {lm:<16.4f} ({mean[0]:+.5f}, {mean[1]:+.5f})")

neg = float((report.pathwise_rates < 0).mean())
print(f"\nfitted tail rate of log E|Y(t)|^2: {report.moment_rate:.3f}  (decay)")
print(f"pathwise rates (1/T) log |Y(T)|: mean {report.pathwise_rates.mean():.3f}, "
      f"{100*neg:.1f}% negative")

with open("demo_stability.csv", "w") as handle:
    handle.write("t,log_moment,sample_mean_1,sample_mean_2\n")
    for t, lm, mean in zip(report.times, report.log_moment, report.sample_mean):
        handle.write(f"{t:.17g},{lm:.17g},{mean[0]:.17g},{mean[1]:.17g}\n")
print("wrote demo_stability.csv (plot log_moment vs t for the decay line)")
