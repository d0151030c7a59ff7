"""
SGMNet Desk - Trimap-free human matting toolkit
Command-line application
"""

__version__ = "1.0.0"
__author__ = "SGMNet Desk Team"
