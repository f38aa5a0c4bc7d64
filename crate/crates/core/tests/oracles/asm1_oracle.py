#!/usr/bin/env python3
"""Straight-line evaluation of the modified ASM1 reaction terms.

Written separately from the Rust implementation; its printed values are
pasted into tests/biokinetics_oracle.rs. Units: kg/m^3 and seconds, so
half-saturations given in g/m^3 are divided by 1000 and daily rates by 86400.
"""

DAY = 86400.0
Y_A, Y_H, f_P, i_XB, i_XP = 0.24, 0.67, 0.08, 0.086, 0.06
mu_H, K_S, K_OH, K_NO, b_H = 6.0 / DAY, 20e-3, 0.2e-3, 0.5e-3, 0.62 / DAY
eta_g, eta_h, k_h, K_X = 0.8, 0.4, 3.0 / DAY, 0.03
mu_A, K_NH_bar, K_NH, b_A, K_OA = 0.8 / DAY, 0.05e-3, 1.0e-3, 0.15 / DAY, 0.4e-3
k_a = 0.08 * 1000.0 / DAY
c = 0.75


def monod(a, b):
    return a / (a + b)


def rates(C, S):
    X_I, X_SND, X_BH, X_BA, X_P, X_ND = C
    S_I, S_S, S_O, S_NO, S_NH, S_ND = S
    X_S = X_SND + X_ND
    if X_S == 0.0 and X_BH == 0.0:
        mu7 = mu8 = 0.0
    else:
        mu7 = X_S * X_BH / (K_X * X_BH + X_S)
        mu8 = X_BH * X_ND / (K_X * X_BH + X_S)
    hyd = monod(S_O, K_OH) + eta_h * monod(K_OH, S_O) * monod(S_NO, K_NO)
    return [
        mu_H * monod(S_NH, K_NH_bar) * monod(S_S, K_S) * monod(S_O, K_OH) * X_BH,
        mu_H * monod(S_NH, K_NH_bar) * monod(S_S, K_S) * monod(K_OH, S_O) * monod(S_NO, K_NO) * eta_g * X_BH,
        mu_A * monod(S_NH, K_NH) * monod(S_O, K_OA) * X_BA,
        b_H * X_BH,
        b_A * X_BA,
        k_a * S_ND * X_BH,
        k_h * mu7 * hyd,
        k_h * mu8 * hyd,
    ]


a = 1 - f_P * (1 + i_XP) - i_XB
b = i_XB - f_P * i_XP
SIGMA_C = [
    [0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, a, a, 0, -1, 1],
    [1, 1, 0, -1, 0, 0, 0, 0],
    [0, 0, 1, 0, -1, 0, 0, 0],
    [0, 0, 0, f_P, f_P, 0, 0, 0],
    [0, 0, 0, b, b, 0, 0, -1],
]
SIGMA_S = [
    [0, 0, 0, 0, 0, 0, 0, 0],
    [-1 / Y_H, -1 / Y_H, 0, 0, 0, 0, 1, 0],
    [-(1 - Y_H) / Y_H, 0, -(4.57 - Y_A) / Y_A, 0, 0, 0, 0, 0],
    [0, -(1 - Y_H) / (2.86 * Y_H), 1 / Y_A, 0, 0, 0, 0, 0],
    [-i_XB, -i_XB, -i_XB - 1 / Y_A, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, -1, 0, 1],
]


def matvec(m, v):
    return [sum(m[i][j] * v[j] for j in range(8)) for i in range(6)]


def show(name, values):
    print(f"{name} = [" + ", ".join(repr(v) for v in values) + "]")


C0 = [0.8889, 0.0295, 1.4503, 0.0904, 0.7371, 0.0025]
S0 = [0.04, 0.0026, 0.0, 0.0333, 0.0004, 0.0009]
r0 = rates(C0, S0)
show("RATES_INITIAL", r0)
show("R_C_INITIAL", matvec(SIGMA_C, r0))
show("R_S_INITIAL", matvec(SIGMA_S, r0))

X_f = 5.0
w = [0.04, 0.16 - 0.01828, 0.096, 1e-6, 0.0, 0.01828]
Cf = [X_f / ((0.04 + 0.16 + 0.096 + 1e-6) * c) * wk for wk in w]
Sf = [0.04, 0.064, 0.0, 0.001, 0.0125, 0.0101]
rf = rates(Cf, Sf)
show("RATES_FEED", rf)
print(f"TOTAL_FEED = {c * sum(matvec(SIGMA_C, rf))!r}")
