#!/usr/bin/env python3
"""Run the full three-method restoration benchmark on the built-in
13-target scene and write the comparison artifacts.

Equivalent to `nfsar bench`; kept as a script so the experiment is easy to
tweak (grid size, seed, sweep grids) without touching the package.
"""

import argparse

from nfsar.cli import apply_grid_override, default_config, run_bench


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/bench", help="output directory")
    parser.add_argument("--grid", type=int, default=None,
                        help="resample the default 256x256 grid to N x N")
    parser.add_argument("--seed", type=int, default=0, help="clutter RNG seed")
    parser.add_argument("--no-noise", action="store_true",
                        help="disable clutter injection")
    args = parser.parse_args()

    config = default_config("paper1")
    config.output_dir = args.out
    config.seed = args.seed
    if args.grid is not None:
        apply_grid_override(config, args.grid)
    if args.no_noise:
        config.noise.enabled = False
    run_bench(config)


if __name__ == "__main__":
    main()
