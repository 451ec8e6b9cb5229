"""Upscale an image to one or more scale factors with a single checkpoint."""
import sys
import traceback
from pathlib import Path

from src.checkpoint import load_checkpoint
from src.cli import configure_logging, parse_sr_args
from src.errors import MetaSRError
from src.image_io import read_png, write_png
from src.meta_upscale import validate_scale
from src.utils import format_scale


def output_paths(input_file: str, scales, output: str = None):
    """
    Destination file for each scale.

    A single scale with an explicit .png output writes exactly there; otherwise
    files are named <stem>_x<r>.png inside the output directory (default: the
    input's directory).
    """
    source = Path(input_file)
    if output and len(scales) == 1 and output.lower().endswith(".png"):
        return [Path(output)]
    directory = Path(output) if output else source.parent
    return [directory / f"{source.stem}_x{format_scale(r)}.png" for r in scales]


def main(argv=None) -> int:
    """Main super-resolution pipeline."""
    print("=" * 60)
    print("Meta-SR Upscaling")
    print("=" * 60)

    try:
        args = parse_sr_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    configure_logging(args.verbose)

    try:
        for r in args.scales:
            validate_scale(r)

        # Step 1: Load model and image
        print("\n" + "-" * 40)
        print("Loading checkpoint and image...")
        print("-" * 40)

        model = load_checkpoint(args.checkpoint).build_model()
        image = read_png(args.input_file)
        print(f"Checkpoint: {args.checkpoint} ({model.config.backend} backend)")
        print(f"Input: {args.input_file} ({image.width}x{image.height})")

        # Step 2: Upscale (features extracted once for all scales)
        print("\n" + "-" * 40)
        print(f"Upscaling to {len(args.scales)} scale(s)...")
        print("-" * 40)

        outputs = model.super_resolve(image, args.scales)
        targets = output_paths(args.input_file, args.scales, args.output)
        written = []
        for r, plane, target in zip(args.scales, outputs, targets):
            written.append(write_png(plane, target))
            print(f"  x{format_scale(r)}: {plane.width}x{plane.height} -> {target}")

        print("\n" + "=" * 60)
        print("Upscaling Complete!")
        print("=" * 60)
        for path in written:
            print(f"OUTPUT={path}")
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
