"""Train a Meta-SR model on a directory of HR images."""
import sys
import traceback

from src.checkpoint import load_checkpoint
from src.cli import config_overrides, configure_logging, parse_train_args
from src.config import load_run_config
from src.dataset import load_image_dir, training_scales
from src.errors import MetaSRError
from src.feature_extractor import parameter_count
from src.trainer import LOG_FILENAME, Trainer
from src.utils import format_scale


def main(argv=None) -> int:
    """Main training pipeline."""
    print("=" * 60)
    print("Meta-SR Training")
    print("=" * 60)

    try:
        args = parse_train_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    configure_logging(args.verbose)

    try:
        config = load_run_config(args.config, config_overrides(args), require_train_dir=True)

        print(f"\nTraining data: {config.train_dir}")
        print(f"Validation data: {config.val_dir or '(none)'}")
        print(f"Output directory: {config.output_dir}")
        print(f"Preset: {config.preset}, backend: {config.backend}, k={config.kernel_size}, hidden={config.hidden}")
        print(f"Feature extractor parameters: {parameter_count(config.model_config().features):,}")
        if config.finetune_scale is not None:
            print(f"Scale: fixed x{format_scale(config.finetune_scale)}")
        else:
            scales = training_scales()
            print(f"Scales: x{format_scale(scales[0])} .. x{format_scale(scales[-1])} ({len(scales)} values)")
        print(f"Seed: {config.seed}{' (deterministic)' if config.deterministic else ''}")

        # Step 1: Load images
        print("\n" + "-" * 40)
        print("Loading images...")
        print("-" * 40)

        hr_images = load_image_dir(config.train_dir)
        val_images = load_image_dir(config.val_dir) if config.val_dir else []
        print(f"Training images: {len(hr_images)}")
        print(f"Validation images: {len(val_images)}")

        checkpoint = None
        if args.resume:
            checkpoint = load_checkpoint(args.resume)
            print(f"Resuming from: {args.resume}")

        # Step 2: Train
        print("\n" + "-" * 40)
        print(f"Training for {config.epochs} epochs x {config.iterations_per_epoch} steps...")
        print("-" * 40)

        trainer = Trainer(config, hr_images, val_images, checkpoint=checkpoint)
        history = trainer.fit()
        checkpoint_path = trainer.last_checkpoint or trainer.save()

        # Summary
        print("\n" + "=" * 60)
        print("Training Complete!")
        print("=" * 60)
        print(f"Epochs run: {len(history)} (total {trainer.epoch})")
        print(f"Steps: {trainer.global_step}")
        if history:
            print(f"Final mean loss: {history[-1]:.5f}")
        print(f"Log: {trainer.output_dir / LOG_FILENAME}")

        print(f"\nCHECKPOINT={checkpoint_path}")
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
