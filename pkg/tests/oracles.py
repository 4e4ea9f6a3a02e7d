"""Reference values frozen from 50-digit mpmath evaluations.

J0 from mpmath.besselj; Q1 from the Bessel series
sum (a/b)^k I_k(ab) (b > a) or its complement (b <= a), summed with
mpmath.nsum; log(1 - Q1) from the complementary series directly.
"""

J0 = {
    0.0: 1.0,
    1.52: 0.50064150569989963312,
    2.404826: -2.2962111149134158929e-7,
    3.141592653589793: -0.30424217764409379633,
    6.283185307179586: 0.22027690853993436099,
    12.0: 0.047689310796833536624,
    12.5: 0.14688405470042110231,
    33.3: 0.063338485947520899644,
    50.0: 0.055812327669251815005,
}

Q1 = {
    (1.0, 1.0): 0.73287980379682021825,
    (0.5, 2.0): 0.16914063850946718271,
    (2.0, 0.5): 0.98206936729166494805,
    (3.0, 3.5): 0.36568020088635623935,
    (10.0, 12.0): 0.025329474297941417811,
    (20.0, 18.0): 0.97863566247356292492,
    (20.0, 25.0): 3.2175727404389550468e-7,
    (5.0, 0.1): 0.99999998082681315558,
}

LOG_ONE_MINUS_Q1 = {
    (10.0, 1.0): -44.823920068496329755,
    (30.0, 2.0): -397.61332779797299916,
    (40.0, 5.0): -618.01705664461286748,
    (8.0, 0.5): -32.577729505245202467,
    (60.0, 30.0): -454.66830279482584168,
}
