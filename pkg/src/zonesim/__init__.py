"""Multizone building thermal, airflow and humidity simulation."""
__version__ = "0.1.0"
