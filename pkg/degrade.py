"""Write bicubic-downscaled LR copies of an HR image tree."""
import sys
import traceback

from src.cli import configure_logging, parse_degrade_args
from src.errors import ImageIOError, MetaSRError
from src.evaluation import degrade_tree
from src.utils import format_scale


def main(argv=None) -> int:
    """Main degradation pipeline."""
    print("=" * 60)
    print("LR Image Generation")
    print("=" * 60)

    try:
        args = parse_degrade_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    configure_logging(args.verbose)

    print(f"\nInput directory: {args.input_dir}")
    print(f"Output directory: {args.output_dir}")
    print(f"Scales: {', '.join('x' + format_scale(r) for r in args.scales)}")

    try:
        print("\n" + "-" * 40)
        print("Downscaling...")
        print("-" * 40)

        written = degrade_tree(args.input_dir, args.output_dir, args.scales)
        if not written:
            raise ImageIOError(f"No readable PNG images found in {args.input_dir}")

        print("\n" + "=" * 60)
        print("Degradation Complete!")
        print("=" * 60)
        print(f"Files written: {len(written)}")
        for path in written[:5]:
            print(f"  - {path}")
        if len(written) > 5:
            print(f"  ... and {len(written) - 5} more files")

        print(f"\nOUTPUT_DIR={args.output_dir}")
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
