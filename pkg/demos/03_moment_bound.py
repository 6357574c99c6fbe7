"""Uniform moment boundedness of the truncated scheme.

The clipped iteration keeps E|Y(t)|^p bounded uniformly in both time and the
step size, even for p as large as 8 on a system with cubic drift and
quadratically growing diffusion.  The demo estimates the eighth moment on
three grids and reports the running maximum of each curve: the maxima should
agree to well within a factor of two.

Run:  python demos/03_moment_bound.py
CLI:  sfde-tem moments --model example1 --p 8 --steps 6
"""

import sfde_tem as st

SEED = 42
model = st.builtin_example1()

print("step      running max of E|Y(t)|^8   (T = 10, M = 500)")
maxima = []
for j in (5, 6, 7):
    curve = st.moment_estimate(
        model, st.SchemeConfig(2.0**-j, 10.0), p_exponent=8.0,
        samples=500, seed=SEED, report_every=8,
    )
    maxima.append(curve.running_max)
    print(f"2^-{j}     {curve.running_max:.4f}")
print(f"max/min ratio across grids: {max(maxima)/min(maxima):.4f}")

# The raw (unclipped) scheme tells a different story when started far out:
# divergent replicas are detected, halted, and counted.
wild = st.builtin_example1(initial_data=lambda theta: [8.0])
curve = st.moment_estimate(
    wild, st.SchemeConfig(2.0**-6, 2.0, st.CLASSIC_EM), p_exponent=2.0,
    samples=200, seed=SEED,
)
print(f"\nclassic EM from x = 8: {curve.diverged}/200 replicas diverged "
      "(the clipped scheme never does)")
