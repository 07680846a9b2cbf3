#!/usr/bin/env python3
"""
Bandwidth Sentinel Setup Script
Basic installation checks and working directories
"""

import sys
from pathlib import Path


def create_directories():
    """Create directories reports and logs are written to"""
    directories = [
        'reports',
        'logs',
    ]

    for directory in directories:
        Path(directory).mkdir(parents=True, exist_ok=True)
        print(f"✅ Created directory: {directory}")


def check_python_version():
    """Check if Python version is compatible"""
    if sys.version_info < (3, 9):
        print("❌ Python 3.9 or higher is required")
        sys.exit(1)
    print(f"✅ Python version: {sys.version}")


def check_data_files():
    """Configuration, reference tables and catalogs ship with the repository"""
    required = [
        Path('config/config.yaml'),
        Path('config/published_bandwidth.json'),
        Path('catalogs/vgg16.csv'),
    ]
    missing = [str(p) for p in required if not p.exists()]
    if missing:
        print(f"❌ Missing data files: {', '.join(missing)}")
        sys.exit(1)
    print("✅ Configuration and catalogs found")


def main():
    """Main setup function"""
    print("🚀 Bandwidth Sentinel Setup")
    print("=" * 40)

    check_python_version()
    create_directories()
    check_data_files()

    print("\n✅ Setup complete!")
    print("\nNext steps:")
    print("1. Install dependencies: pip install -r requirements.txt")
    print("2. Run tests: pytest tests/")
    print("3. Try it: python sentinel_cli.py compare --macs 512,2048,16384")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by a build frontend (pip/setuptools); metadata lives in pyproject.toml
        from setuptools import setup
        setup()
    else:
        main()
