#!/usr/bin/env python3
"""
SGMNet Desk - Trimap-free human matting toolkit
Entry point for the synth / train / eval / infer / composite / ablation commands
"""

import sys

from src.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
