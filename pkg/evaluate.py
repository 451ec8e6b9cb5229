"""Evaluate a checkpoint and the bicubic baseline on a directory of HR images."""
import sys
import traceback
from pathlib import Path

from src.checkpoint import load_checkpoint
from src.cli import config_overrides, configure_logging, parse_eval_args
from src.config import load_run_config
from src.dataset import load_image_dir
from src.errors import MetaSRError
from src.evaluation import evaluate, format_results_table, write_results_csv
from src.utils import format_scale, resolve_thread_count


def main(argv=None) -> int:
    """Main evaluation pipeline."""
    print("=" * 60)
    print("Meta-SR Evaluation")
    print("=" * 60)

    try:
        args = parse_eval_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    configure_logging(args.verbose)

    try:
        config = load_run_config(args.config, config_overrides(args))
        scales = args.scales or config.val_scales
        workers = resolve_thread_count(config.deterministic, config.threads)
        csv_path = Path(args.csv) if args.csv else Path.cwd() / f"{Path(args.dataset_dir).name}_eval.csv"

        print(f"\nDataset: {args.dataset_dir}")
        print(f"Scales: {', '.join('x' + format_scale(r) for r in scales)}")
        print(f"Shave: {config.shave}")
        if args.bicubic_only:
            print("Mode: bicubic baseline only")
        else:
            print(f"Checkpoint: {args.checkpoint}")

        # Step 1: Load data and model
        print("\n" + "-" * 40)
        print("Loading images...")
        print("-" * 40)

        hr_images = load_image_dir(args.dataset_dir)
        print(f"Images: {len(hr_images)}")
        model = None if args.bicubic_only else load_checkpoint(args.checkpoint).build_model()

        # Step 2: Evaluate
        print("\n" + "-" * 40)
        print(f"Evaluating with {workers} worker(s)...")
        print("-" * 40)

        results = evaluate(model, hr_images, scales, shave_for=config.shave_for, workers=workers)
        write_results_csv(results, csv_path)

        print("\n" + "=" * 60)
        print("Evaluation Complete!")
        print("=" * 60)
        print(format_results_table(results))

        print(f"\nCSV={csv_path}")
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
