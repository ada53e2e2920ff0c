"""Allow ``python -m implied_leverage``."""
from implied_leverage.cli import main

if __name__ == "__main__":
    main()
