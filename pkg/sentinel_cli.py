"""
Bandwidth Sentinel - Partial-sum bandwidth of channel-tiled convolutions
Command line entry point
"""

import sys

from frontend.cli import main

if __name__ == "__main__":
    sys.exit(main())
