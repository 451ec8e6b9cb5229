"""Inference timing split into feature learning, weight prediction and feature mapping."""
import sys
import traceback

import numpy as np

from src.checkpoint import load_checkpoint
from src.cli import config_overrides, configure_logging, parse_bench_args
from src.config import load_run_config
from src.errors import MetaSRError
from src.evaluation import benchmark
from src.image_io import ImagePlane, read_png
from src.model import MetaSR
from src.utils import format_scale


def main(argv=None) -> int:
    """Main benchmark pipeline."""
    print("=" * 60)
    print("Meta-SR Timing")
    print("=" * 60)

    try:
        args = parse_bench_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    configure_logging(args.verbose)

    try:
        config = load_run_config(args.config, config_overrides(args))

        if args.checkpoint:
            model = load_checkpoint(args.checkpoint).build_model()
            print(f"\nCheckpoint: {args.checkpoint}")
        else:
            model = MetaSR(config.model_config(), rng=np.random.default_rng(config.seed), dtype=config.numpy_dtype)
            print(f"\nModel: {config.preset} preset, {config.backend} backend (random weights)")

        if args.image:
            image = read_png(args.image)
            print(f"Input: {args.image} ({image.width}x{image.height})")
        else:
            rng = np.random.default_rng(config.seed)
            image = ImagePlane(rng.uniform(0.0, 1.0, (args.size, args.size, 3)))
            print(f"Input: random {args.size}x{args.size}")

        print("\n" + "-" * 40)
        print(f"Timing {len(args.scales)} run(s)...")
        print("-" * 40)

        results = benchmark(model, image, args.scales)

        print("\n" + "=" * 60)
        print("Timing Complete!")
        print("=" * 60)
        print(f"{'scale':>6} | {'FL (s)':>9} | {'WP (s)':>9} | {'map (s)':>9} | {'total (s)':>9} | {'WP %':>6} | cache")
        for res in results:
            print(
                f"{'x' + format_scale(res.scale):>6} | {res.feature_learning:9.4f} | {res.weight_prediction:9.4f} | "
                f"{res.feature_mapping:9.4f} | {res.total:9.4f} | {100 * res.weight_prediction_share:6.2f} | "
                f"{res.cache_hits} hit / {res.cache_misses} miss"
            )
        stats = model.weight_cache.stats()
        print(f"\nWeight cache: {stats['hits']} hits, {stats['misses']} misses, {stats['entries']} entries")
        return 0

    except MetaSRError as e:
        print(f"\n[ERROR] {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("\n\nOperation cancelled by user.")
        return 1
    except Exception as e:
        print(f"\n[ERROR] {e}", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
