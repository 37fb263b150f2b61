"""Forward, reverse and second-order derivatives of a small function.

f(x1, x2) = (x1/x2 + cos x1) * (x1/x2 + exp x2), evaluated at (1, 2).
"""

import numpy as np

from pinnlab import autodiff as ad


def f(x1, x2):
    a = x1 / x2
    return (a + ad.cos(x1)) * (a + ad.exp(x2))


# forward mode: one dual pass per input direction
for k in range(2):
    value, d = ad.forward_eval(f, [1.0, 2.0], k)
    print(f"forward  df/dx{k + 1} = {d:+.10f}   (value {value:.10f})")

# reverse mode: both partials from one tape sweep
print("reverse  grad =", ad.gradient(f, [1.0, 2.0]))

# forward-over-reverse Hessian (tape replayed with dual inputs)
H = ad.hessian(f, [1.0, 2.0])
print("hessian\n", H)
print("symmetric:", np.allclose(H, H.T, atol=1e-12))

# a Taylor jet carries u, u_a and u_aa along each seeded axis in one pass
x = np.linspace(0.0, 1.0, 5).reshape(-1, 1)
(jx,) = ad.seed_jet([x], [0])
J = ad.sin(jx) * ad.exp(jx)
print("jet d2/dx2 of sin(x) e^x vs 2 cos(x) e^x:", np.abs(J.d2[0] - 2 * np.cos(x) * np.exp(x)).max())
