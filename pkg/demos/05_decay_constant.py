"""Solving for the admissible exponential decay constant.

A stable delay system with declared dissipation constants b1 > b2 >= 0 and
b3 > b4 >= 0 decays at any rate nu > 0 satisfying

    (p/2) (b1 - b2 e^{nu tau}) - nu > 0   and   b3 - b4 e^{nu tau} > 0.

Both margins shrink as nu grows (the delay terms are amplified by e^{nu tau}),
so the solver brackets and bisects each one and returns the largest admissible
rate.  For the stable two-dimensional builtin system the answer exceeds 2.

Run:  python demos/05_decay_constant.py
CLI:  sfde-tem nu --model example2      or with explicit constants:
      sfde-tem nu --b1 2.75 --b2 0.25 --b3 3.75 --b4 0.75 --tau 0.5 --p 2
"""

import math

import sfde_tem as st

model = st.builtin_example2()
c = model.assumption_constants
b1, b2, b3, b4 = c["b1"], c["b2"], c["b3"], c["b4"]
p, tau = c["p"], model.tau

nu = st.admissible_nu(b1, b2, b3, b4, p, tau)
print(f"declared constants: b1={b1}, b2={b2}, b3={b3}, b4={b4}, p={p}, tau={tau}")
print(f"largest admissible decay constant: nu = {nu:.9f}")

margin1 = 0.5 * p * (b1 - b2 * math.exp(nu * tau)) - nu
margin2 = b3 - b4 * math.exp(nu * tau)
print(f"margins at nu: {margin1:.3e}, {margin2:.3e}  (both >= 0)")

bumped = nu + 1e-6
margin1b = 0.5 * p * (b1 - b2 * math.exp(bumped * tau)) - bumped
margin2b = b3 - b4 * math.exp(bumped * tau)
print(f"margins at nu + 1e-6: {min(margin1b, margin2b):.3e}  (constraint now violated)")

# No delay feedback (b2 = b4 = 0) reduces the first constraint to nu < p b1 / 2.
print(f"\nno-delay sanity check: nu = {st.admissible_nu(3.0, 0.0, 1.0, 0.0, 2.0, tau):.9f} "
      f"(expected {3.0 * 2.0 / 2.0})")
