"""Command-line orchestration, configs and slope fitting."""
