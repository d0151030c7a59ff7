"""
Command-line entry points
"""

from src.cli.commands import build_parser, main

__all__ = ["build_parser", "main"]
