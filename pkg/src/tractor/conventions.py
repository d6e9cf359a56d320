"""Sign and normalization conventions used throughout the package.

The text below is hashed into every CLI report, so any change to a
convention changes ``CONVENTIONS_HASH``.
"""

import hashlib

# Sign of the Cotton-York block in the tractor curvature: Omega has g_1 part
# COTTON_SLOT_SIGN * C(X, Y).  Fixed by the commutator cross-check.
COTTON_SLOT_SIGN = +1.0

CONVENTIONS = """\
basis: tractor components ordered (e_-, e_1..e_n, e_+); standard tractor t = (d; tau; b)
tractor form: <t, t'> = d b' + b d' + g(tau, tau')
adjoint tractor: [[-phi_c, eta, 0], [xi, phi_ss, -g^{-1} eta^T], [0, -g(xi, .), phi_c]]
riemann: R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z; Ric(Y,Z) = tr(X -> R(X,Y)Z)
schouten: K = (scal/(2(n-1)) g - Ric)/(n-2)  (negative of the common P)
cotton: C(X,Y)(Z) = (nabla_X K)(Y,Z) - (nabla_Y K)(X,Z)
connection: nabla_X (d; tau; b) = (X(d) + K(X,tau); nabla_X tau + d X - b K(X)^#; X(b) - g(X,tau))
curvature: Omega(X,Y) t = [nabla_X, nabla_Y] t - nabla_[X,Y] t = (xi 0, phi W(X,Y), eta +C(X,Y))
splitting operator: A_Q = (V, asym nabla V, phi_c = div V / n, eta = g(D V, .)), D V = (lap V + scal V/(2(n-1)))/(n-2)
complex structure: beta^2 = -id iff m, v = -g^{-1} l^T lightlike, A m = a m, A v = -a v, g(m, v) = 1 + a^2, A^2 = -id on span{m,v}^perp
complex trace: Omega_S = (i/2) tr(J Omega) for Omega commuting with J
transport: dT/ds = -Gamma^tr(gamma'(s)) T, T(0) = id
"""

CONVENTIONS_HASH = hashlib.sha256(CONVENTIONS.encode()).hexdigest()
