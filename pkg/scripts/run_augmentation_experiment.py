"""Downstream augmentation benefit on critical-path delay prediction.

For each netlist and seed: simulate a small real dataset for the netlist's
gate kind, train a spectrally regularized GAN on it, sample artificial rows,
and fit gradient-boosted trees once on the real rows and once on real +
artificial. Both models predict per-gate delays that are composed into the
critical-path delay and scored against the oracle at fresh operating points.
"""

import argparse
import statistics

from circuit_augmentor import boost, evaluation, gan, oracle
from circuit_augmentor.seeding import stream

GAN_KW = dict(
    latent_dim=32,
    gen_hidden=(128, 128, 128),
    disc_hidden=(128, 128, 128),
    lr=5e-4,
    batch_size=64,
    epochs=2000,
    eval_every=25,
)
BOOST_KW = dict(n_trees=300, max_depth=4, learning_rate=0.05)


def run_seed(netlist, kind, seed, n_real, n_artificial):
    real = oracle.generate_dataset(kind, n_real, seed)
    _, sim = oracle.row_simulator(kind)
    cfg = gan.GanConfig(
        seed=seed, regularizer=gan.RegularizerMode("spectral_reg", 0.5), **GAN_KW
    )
    model = gan.build(cfg, len(real.schema))
    hook = evaluation.make_evaluator(real, simulator=sim, n_eval=256)
    best, _final, _log = gan.train(model, real, hook)
    artificial = gan.sample(best, n_artificial, stream(seed, "artificial-sample"))
    return boost.augmentation_experiment(
        real,
        artificial,
        netlist,
        boost.GbrtConfig(seed=seed, **BOOST_KW),
        n_test_points=25,
        seed=seed,
    )


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--netlists", default="c17,rca4")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n-real", type=int, default=100)
    ap.add_argument("--n-artificial", type=int, default=2000)
    args = ap.parse_args()

    for name in args.netlists.split(","):
        netlist = oracle.builtin_netlist(name)
        kind = netlist.gates[0].kind
        print(f"== {name} ({len(netlist.gates)} x {kind}, "
              f"{args.n_real} real + {args.n_artificial} artificial)")
        reductions = []
        wins = 0
        for seed in range(args.seeds):
            rec = run_seed(netlist, kind, seed, args.n_real, args.n_artificial)
            rr = (rec.pct_error_real - rec.pct_error_augmented) / rec.pct_error_real
            reductions.append(rr)
            wins += rec.pct_error_augmented < rec.pct_error_real
            print(
                f"  seed {seed}: real {rec.pct_error_real:6.2f}%  "
                f"augmented {rec.pct_error_augmented:6.2f}%  reduction {rr:+.1%}"
            )
        print(
            f"  improved {wins}/{args.seeds} seeds, "
            f"median reduction {statistics.median(reductions):+.1%}"
        )


if __name__ == "__main__":
    main()
