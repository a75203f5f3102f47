"""Twistorial 4-metrics from 3-dimensional data and Ricci-soliton checks."""

__version__ = "0.1.0"
