"""How the sample-covariance error and the recoverable dimension scale with N.

Runs a reduced sweep (D=64, power-law spectrum with beta=2) and prints the
median operator-norm error, the median recoverable dimension K(N) and the
log-log slopes of both. Expect roughly -1/2 for the error and 1/(2 beta) for
K(N).

    python3 demos/noise_floor_scaling.py [trials]
"""

import sys

from spectral_lab.synthlab import SweepConfig, SyntheticSpec, run_sweep, scaling_fit


def main(trials: int = 8) -> None:
    spec = SyntheticSpec(D=64, beta=2.0, signal=(1.0, 0.5, 0.25))
    grid = [128 * 2**i for i in range(8)]
    sr = run_sweep(spec, grid, trials, SweepConfig(calibrate=False, n_test=500, workers=4))
    err, dim = sr.medians("op_err"), sr.medians("K_of_N")
    print(f"{'N':>6}  {'median op_err':>14}  {'median K(N)':>11}")
    for N in grid:
        print(f"{N:>6}  {err[N]:>14.5f}  {dim[N]:>11.1f}")
    for name, target in (("op_err", -0.5), ("K_of_N", 1 / (2 * spec.beta))):
        fit = scaling_fit(sr, name)
        print(f"{name}: slope {fit.slope:+.3f} (expected {target:+.3f}), R^2 {fit.r_squared:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 8)
