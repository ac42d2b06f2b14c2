#!/usr/bin/env python3
"""Tabulate K(lambda) for the standard bubble from the planar integral.

K(lambda) = |(1/4pi) * integral over R^2 of (2 lambda/(lambda^2+|y|^2))^2 (|y|^2-1)/(|y|^2+1) dy|

In polar coordinates with s = |y|^2 this is lambda^2 * int_0^inf (s-1)/((lambda^2+s)^2 (s+1)) ds,
evaluated here with mpmath tanh-sinh quadrature at 40 digits.
"""
import sys

import mpmath as mp

mp.mp.dps = 40
ROWS = 200
LO, HI = 1, 8


def planar_k(lam):
    lam = mp.mpf(lam)
    f = lambda s: (s - 1) / ((lam**2 + s) ** 2 * (s + 1))
    return abs(lam**2 * mp.quad(f, [0, 1, lam**2, mp.inf]))


def main(path):
    with open(path, "w") as out:
        out.write("# bubble correspondence lambda -> K, planar integral oracle\n")
        out.write(f"# mpmath {mp.__version__}, tanh-sinh quadrature, dps={mp.mp.dps}\n")
        out.write(f"# {ROWS} rows, lambda uniform on [{LO}, {HI}]\n")
        out.write("lambda,K\n")
        for i in range(ROWS):
            lam = mp.mpf(LO) + (HI - LO) * mp.mpf(i) / (ROWS - 1)
            out.write(f"{mp.nstr(lam, 17, strip_zeros=False)},{mp.nstr(planar_k(lam), 17, strip_zeros=False)}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/lambda_k.csv")
