"""Rosenzweig-MacArthur predator-prey dynamics driven by alpha-stable Levy noise."""

__version__ = "0.1.0"
