"""Tail |x1| against the saturation cap for the second-order loop."""
import argparse

import numpy as np

from hyperstab.analysis import saturation_tail_bound, steady_state_residuals
from hyperstab.controller import ControllerSpec
from hyperstab.ct_sim import simulate_ct
from hyperstab.disturbance import ChannelSignal, DisturbanceSpec
from hyperstab.gain import GainSchedule


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--caps", type=float, nargs="+", default=[2.0, 5.0, 10.0, 20.0, 50.0])
    p.add_argument("--t-final", type=float, default=50.0)
    args = p.parse_args()

    dist = DisturbanceSpec((ChannelSignal(sines=((0.6, 2.0, 0.0),), const=0.2),
                            ChannelSignal(sines=((0.5, 3.0, 0.3),), const=-0.3)))
    d1 = dist.sup_norms()[0]
    t_a = 0.8 * args.t_final
    print("cap,sup_norm_x,sup_abs_u,tail_abs_x1,eps")
    for cap in args.caps:
        spec = ControllerSpec(2, (1.0, 2.0), 2, GainSchedule(cap=cap))
        traj = simulate_ct(spec, dist, (1.0, -1.0), args.t_final, 0.01)
        tail = steady_state_residuals(traj, dist, (t_a, args.t_final))[0]
        eps = saturation_tail_bound(d1, 1.0, cap, t_a)
        print(f"{cap:g},{np.max(np.linalg.norm(traj.states, axis=1)):.4f},"
              f"{np.max(np.abs(traj.controls)):.4f},{tail:.5f},{eps:.5f}")


if __name__ == "__main__":
    main()
