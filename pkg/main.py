# main.py
# Main entry point for adaptsym.
# Checks the numerical stack is importable, then hands argv to the CLI.

import sys

# --- Numerical Imports ---
try:
    import numpy  # noqa: F401
    import scipy  # noqa: F401
except ImportError as e:
    print(f"Error importing the numerical stack: {e}")
    print("Please ensure you have installed NumPy and SciPy:")
    print("pip install -r requirements.txt")
    sys.exit(1)

# --- Project Module Imports ---
try:
    from cli import main
except ImportError as e:
    print(f"Error importing project modules: {e}")
    print("Please ensure cli.py, adapt.py, pools.py, lie.py, fock.py, fci.py, symmetry.py, "
          "fcidump.py and errors.py exist in the same directory.")
    sys.exit(1)


if __name__ == "__main__":
    sys.exit(main())
