"""Meta-SR - command dispatcher and interactive launcher."""
import subprocess
import sys
from pathlib import Path

import questionary

SCRIPT_DIR = Path(__file__).parent

VERBS = {
    "train": "train.py",
    "sr": "sr.py",
    "eval": "evaluate.py",
    "degrade": "degrade.py",
    "bench": "bench.py",
}

PRESETS = [
    ("desk", "small network, trains on a CPU"),
    ("paper", "16 blocks x 8 convs, 64 channels (slow on CPU)"),
]


# ── Utilities ─────────────────────────────────


def ask_path(message: str) -> str | None:
    """Ask for a path interactively."""
    raw = questionary.path(message).ask()
    if raw is None:
        return None
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"'):
        raw = raw[1:-1]
    return raw


def parse_scales(text: str) -> list[str] | None:
    """Split '1.5 2 3.3' (spaces or commas) into positive scale strings."""
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        if not parts or any(float(p) <= 0 for p in parts):
            return None
    except ValueError:
        return None
    return parts


def scale_args(scales: list[str]) -> list[str]:
    args = []
    for r in scales:
        args += ["--scale", r]
    return args


def ask_scales(message: str, default: str) -> list[str] | None:
    text = questionary.text(message, default=default, validate=lambda t: parse_scales(t) is not None).ask()
    if text is None:
        return None
    return parse_scales(text)


def run_script(name: str, args: list[str]) -> int:
    """Run a project script in a child interpreter."""
    script = SCRIPT_DIR / name
    result = subprocess.run([sys.executable, str(script)] + args)
    return result.returncode


def run_script_capture(name: str, args: list[str]) -> tuple[int, str]:
    """Run a project script, echoing and capturing its stdout."""
    script = SCRIPT_DIR / name
    proc = subprocess.Popen(
        [sys.executable, "-u", str(script)] + args,
        stdout=subprocess.PIPE,
        text=True,
    )
    stdout_lines = []
    for line in proc.stdout:
        print(line, end="")
        stdout_lines.append(line)
    proc.wait()
    return proc.returncode, "".join(stdout_lines)


def parse_key(stdout: str, key: str) -> str | None:
    """Value of the last KEY=value line in a script's output."""
    value = None
    prefix = f"{key}="
    for line in stdout.splitlines():
        if line.startswith(prefix):
            value = line[len(prefix):]
    return value


# ── 1. Training ───────────────────────────────


def do_train() -> int:
    """Train a model, then optionally evaluate it."""
    train_dir = ask_path("Directory of HR training images:")
    if train_dir is None:
        return 1
    if not Path(train_dir).is_dir():
        print(f"\n[ERROR] Directory not found: {train_dir}", file=sys.stderr)
        return 1

    preset = questionary.select(
        "Network size:",
        choices=[questionary.Choice(f"{name:<6} - {desc}", value=name) for name, desc in PRESETS],
        default="desk",
    ).ask()
    if preset is None:
        return 1
    epochs = questionary.text("Epochs:", default="10", validate=lambda t: t.isdigit() and int(t) > 0).ask()
    if epochs is None:
        return 1

    ret, stdout = run_script_capture("train.py", [train_dir, "--preset", preset, "--epochs", epochs])
    if ret != 0:
        return ret

    checkpoint = parse_key(stdout, "CHECKPOINT")
    if checkpoint is None:
        print("\n[ERROR] Could not find the checkpoint path in the training output.", file=sys.stderr)
        return 1

    next_action = questionary.select(
        "Training finished. What next?",
        choices=[
            questionary.Choice("Evaluate the checkpoint on a test set", value="eval"),
            questionary.Choice("Upscale an image", value="sr"),
            questionary.Choice("Exit", value=None),
        ],
    ).ask()

    if next_action == "eval":
        return do_eval(checkpoint)
    elif next_action == "sr":
        return do_sr(checkpoint)
    return 0


# ── 2. Upscaling ──────────────────────────────


def do_sr(checkpoint: str = None) -> int:
    """Upscale one image to one or more scales."""
    if checkpoint is None:
        checkpoint = ask_path("Checkpoint file:")
        if checkpoint is None:
            return 1
    image = ask_path("Image to upscale (PNG):")
    if image is None:
        return 1
    if not Path(image).is_file():
        print(f"\n[ERROR] File not found: {image}", file=sys.stderr)
        return 1
    scales = ask_scales("Scale factor(s), e.g. 1.5 2.7:", "2")
    if scales is None:
        return 1
    return run_script("sr.py", [image, "--checkpoint", checkpoint] + scale_args(scales))


# ── 3. Evaluation ─────────────────────────────


def do_eval(checkpoint: str = None) -> int:
    """Evaluate a checkpoint (or bicubic only) on a test directory."""
    dataset = ask_path("Directory of HR test images:")
    if dataset is None:
        return 1
    if not Path(dataset).is_dir():
        print(f"\n[ERROR] Directory not found: {dataset}", file=sys.stderr)
        return 1
    if checkpoint is None:
        checkpoint = ask_path("Checkpoint file (leave empty for bicubic only):")
        if checkpoint is None:
            return 1
    scales = ask_scales("Scale factor(s):", "1.5 2 3.3")
    if scales is None:
        return 1
    args = [dataset] + scale_args(scales)
    args += ["--checkpoint", checkpoint] if checkpoint else ["--bicubic-only"]
    return run_script("evaluate.py", args)


# ── 4. Degradation ────────────────────────────


def do_degrade() -> int:
    """Generate LR copies of an image directory."""
    input_dir = ask_path("Directory of HR images:")
    if input_dir is None:
        return 1
    if not Path(input_dir).is_dir():
        print(f"\n[ERROR] Directory not found: {input_dir}", file=sys.stderr)
        return 1
    scales = ask_scales("Downscale factor(s):", "2")
    if scales is None:
        return 1
    return run_script("degrade.py", [input_dir] + scale_args(scales))


# ── Main menu ─────────────────────────────────

ACTIONS = [
    ("Train a model", do_train),
    ("Upscale an image", do_sr),
    ("Evaluate on a test set", do_eval),
    ("Generate LR images", do_degrade),
    ("Exit", None),
]


def main(argv: list[str] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if argv:
        verb, rest = argv[0], argv[1:]
        if verb not in VERBS:
            print(f"[ERROR] Unknown command: {verb} (expected one of: {', '.join(VERBS)})", file=sys.stderr)
            return 2
        return run_script(VERBS[verb], rest)

    print("=" * 60)
    print("Meta-SR")
    print("=" * 60)
    print()

    choices = [
        questionary.Choice(label, value=action)
        for label, action in ACTIONS
    ]
    action = questionary.select(
        "What would you like to do?",
        choices=choices,
    ).ask()

    if action is None:
        return 0

    return action()


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nOperation cancelled by user.")
        sys.exit(1)
