#!/usr/bin/env python3
"""
Simple runner script for the TractLab CLI that checks dependencies
"""

import sys


def check_dependencies():
    """Check if required packages are available"""
    missing_packages = []

    for module, package in (("numpy", "numpy"), ("scipy", "scipy"), ("skimage", "scikit-image"),
                            ("rich", "rich"), ("tqdm", "tqdm"), ("tenacity", "tenacity"),
                            ("dotenv", "python-dotenv")):
        try:
            __import__(module)
        except ImportError:
            missing_packages.append(package)

    if missing_packages:
        print("❌ Missing required packages:")
        for package in missing_packages:
            print(f"   - {package}")
        print("\n📦 Install with: pip install -r requirements_cli.txt")
        return False

    print("✅ All dependencies available!")
    return True


def check_python_version():
    """Check if Python version is adequate"""
    if sys.version_info < (3, 8):
        print(f"❌ Python 3.8+ required, found {sys.version}")
        return False

    print(f"✅ Python version: {sys.version}")
    return True


def main():
    print("∮ TractLab - CLI")
    print("=" * 50)

    if not check_python_version():
        sys.exit(1)

    if not check_dependencies():
        sys.exit(1)

    print("🚀 Starting CLI application...")
    print("💡 For help: python tractlab_cli.py --help\n")

    try:
        from tractlab_cli import main as cli_main
    except ImportError as e:
        print(f"❌ Import error: {e}")
        print("💡 Try running directly: python tractlab_cli.py")
        sys.exit(1)

    sys.argv[0] = "tractlab_cli.py"
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
