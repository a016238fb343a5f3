"""
Launcher for the faultkit command-line interface.
"""
import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
