"""Trace polynomial optimization via tracial moment-SOS relaxations."""
