"""Grid search of the Q-loss weight alpha and scale kappa for AE5.

Trains on seed 0 at the desk budget and scores each setting by BER on the
validation split (never the test split).  Usage:

    python3 scripts/tune_qloss.py [--frames 16384] [--epochs 5] [--out tune.csv]
"""

import argparse
import csv
import time

from tnoma import ae
from tnoma.frames import VALID


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=16384)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--alphas", default="0.1,0.3")
    ap.add_argument("--kappas", default="1,2,4")
    ap.add_argument("--valid-frames", type=int, default=2048)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="tune_qloss.csv")
    args = ap.parse_args()

    grid = [(0.0, 1.0)] + [(float(a), float(k)) for k in args.kappas.split(",")
                           for a in args.alphas.split(",")]
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["alpha", "kappa", "val_ber", "ci95", "seconds"])
        for alpha, kappa in grid:
            t0 = time.time()
            system = ae.build_system(variant="AE5", seed=args.seed,
                                     loss="ce+q" if alpha > 0 else "ce")
            ae.train(system, ae.TrainConfig(frames=args.frames, epochs=args.epochs,
                                            seed=args.seed, alpha=alpha, kappa=kappa))
            res = ae.evaluate(system, [30.0], args.valid_frames, seed=args.seed, split=VALID)
            w.writerow([alpha, kappa, repr(float(res.ber_avg[0])), repr(float(res.ci95_avg[0])),
                        round(time.time() - t0, 1)])
            f.flush()
            print(alpha, kappa, res.ber_avg[0], res.ci95_avg[0], flush=True)


if __name__ == "__main__":
    main()
