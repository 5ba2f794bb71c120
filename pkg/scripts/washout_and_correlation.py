"""Washout of the Klein-Gordon interference term and the scale of the deviation map.

Prints the fitted power of T in |<j0>_T - C| and, for plane and Gaussian beams,
the correlation length of <|j0|>_T - <rho>_T in units of 1 / |w1 - w2|.
"""
import argparse

import numpy as np

from kgbohm.interference import (
    BeamProfile,
    TwoFrequencyScenario,
    classical_density,
    deviation_map,
    grid_points,
    time_average,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--omega1", type=float, default=1.0)
    ap.add_argument("--omega2", type=float, default=4.0)
    ap.add_argument("--box", type=float, default=4.0)
    ap.add_argument("--grid", type=int, default=96)
    ap.add_argument("--periods", type=float, default=2.25, help="averaging window in beat periods")
    args = ap.parse_args()

    P = 2 * np.pi / abs(args.omega1 - args.omega2)
    box = (args.box, args.box)
    axes = [(np.arange(args.grid) + 0.5) * args.box / args.grid] * 2
    gauss = TwoFrequencyScenario(args.omega1, args.omega2, BeamProfile(0.3, (2.0, 1.5), 1.5),
                                 BeamProfile(-0.3, (2.0, 2.5), 1.5), box)

    pts = grid_points([a[::2] for a in axes])
    C = classical_density(gauss, pts)
    Ts = np.array([(n + 0.25) * P for n in (2, 4, 8, 16, 32, 64)])
    err = np.array([np.max(np.abs(time_average("kg", gauss, pts, T) - C)) for T in Ts])
    for T, e in zip(Ts, err):
        print(f"T = {T:8.3f}  max|<j0>_T - C| = {e:.3e}")
    print(f"fitted exponent: {np.polyfit(np.log(Ts), np.log(err), 1)[0]:.6f}")

    for label, b1, b2 in [
        ("plane beams +-0.1 rad", BeamProfile(0.1, envelope="plane"), BeamProfile(-0.1, envelope="plane")),
        ("plane beams +-0.3 rad", BeamProfile(0.3, envelope="plane"), BeamProfile(-0.3, envelope="plane")),
        ("gaussian beams", gauss.beam1, gauss.beam2),
    ]:
        sc = TwoFrequencyScenario(args.omega1, args.omega2, b1, b2, box)
        dm = deviation_map(sc, axes, args.periods * P)
        print(f"{label:>22}: correlation length {dm.correlation_length:.4f}, "
              f"1/|w1 - w2| = {dm.beat_length:.4f}, ratio {dm.ratio:.3f}")


if __name__ == "__main__":
    main()
