#!/usr/bin/env python3
"""
Startup check for the adaptive PINN toolkit.
"""

import sys
from pathlib import Path


def check_dependencies():
    """Check if required dependencies are installed."""
    required_packages = {
        'pydantic': 'pydantic',
        'pydantic-settings': 'pydantic_settings',
        'numpy': 'numpy',
        'scipy': 'scipy',
        'pandas': 'pandas',
        'tqdm': 'tqdm',
        'python-dotenv': 'dotenv',
        'loguru': 'loguru',
    }

    missing_packages = []

    for package, module in required_packages.items():
        try:
            __import__(module)
        except ImportError:
            missing_packages.append(package)

    if missing_packages:
        print("Missing required packages:")
        for package in missing_packages:
            print(f"  - {package}")
        print("\nPlease install missing packages with:")
        print("pip install -r requirements.txt")
        return False

    return True


def check_presets():
    """Check that the preset file parses."""
    try:
        from adaptive_pinn.cli.commands import load_presets
        presets = load_presets()
        print(f"✓ {len(presets)} presets available: {', '.join(sorted(presets))}")
        return True
    except Exception as e:
        print(f"✗ Could not read presets: {e}")
        return False


def create_directories():
    """Create output and log directories."""
    from adaptive_pinn.config import ensure_directories
    ensure_directories('data')
    print("✓ Directories created")


def setup_environment():
    """Setup environment variables."""
    env_file = Path('.env')
    if not env_file.exists():
        env_example = Path('env.example')
        if env_example.exists():
            import shutil
            shutil.copy('env.example', '.env')
            print("✓ Created .env file from template")
        else:
            print("⚠ No .env file found, using default settings")


def main():
    """Main startup function."""
    print("Adaptive PINN Toolkit - Startup Check")
    print("=" * 50)

    print("\nChecking dependencies...")
    if not check_dependencies():
        sys.exit(1)

    print("\nChecking presets...")
    if not check_presets():
        print("⚠ --preset will not work")

    print("\nSetting up directories...")
    create_directories()

    print("\nSetting up environment...")
    setup_environment()

    print("\n" + "=" * 50)
    print("Setup complete!")
    print("\nTo generate data:")
    print("  python -m adaptive_pinn gen-data --output-dir data")
    print("\nTo train an adaptive PINN:")
    print("  python -m adaptive_pinn train --preset paper-pinn")
    print("\nTo run tests:")
    print("  pytest tests/")
    print("\nTo regenerate the benchmark tables:")
    print("  python scripts/reproduce_tables.py --output-dir runs/tables")


if __name__ == "__main__":
    main()
