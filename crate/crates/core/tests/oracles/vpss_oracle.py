#!/usr/bin/env python3
"""Independent high-precision evaluation of the VPSS formulas.

Prints the golden values asserted by the Rust acceptance suite; the output
is committed as vpss_oracle.out.
Run: python3 vpss_oracle.py
"""
from mpmath import mp, mpf, log, exp

mp.dps = 50

W = [mpf(5), mpf("2.5"), mpf(3), mpf("1.5")]
GAMMA = mpf(500)
L_NORM = mpf(10)
K = mpf("0.5")


def pbf(x):
    wx = sum(w * xi for w, xi in zip(W, x))
    return log(1 + GAMMA * wx)


def pdf(l_max, l_avg):
    return 1 + (l_max + l_avg) / (2 * L_NORM)


def vpss(raw):
    return 10 * (1 - exp(-raw / K))


def case(name, x, l_max, l_avg):
    b = pbf([mpf(v) for v in x])
    d = pdf(mpf(l_max), mpf(l_avg))
    raw = b * d
    print(f"{name}: pbf={mp.nstr(b, 20)} pdf={mp.nstr(d, 20)} "
          f"raw={mp.nstr(raw, 20)} vpss={mp.nstr(vpss(raw), 20)}")


if __name__ == "__main__":
    case("golden", ["0.001", "0.0004", "0.0002", "0.0001"], "3", "1.5")
    case("case_study_depth", ["0.001", "0.0004", "0.0002", "0.0001"], "7", "2.33")
    case("zero", ["0", "0", "0", "0"], "0", "0")
