"""Entry point for spinthermal."""

import sys


def check_numerics():
    """Check that numpy and scipy are importable and print install hints if not."""
    missing = []
    for name in ("numpy", "scipy"):
        try:
            __import__(name)
        except ImportError:
            missing.append(name)
    if not missing:
        return True

    print(f"Error: {', '.join(missing)} not installed.", file=sys.stderr)
    print(file=sys.stderr)
    print("spinthermal needs numpy and scipy for its linear algebra.", file=sys.stderr)
    print("To install them:", file=sys.stderr)
    print(f"  pip install {' '.join(missing)}", file=sys.stderr)
    return False


def main():
    """Main entry point."""
    if not check_numerics():
        sys.exit(1)

    from spinthermal.cli import main as cli_main
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
