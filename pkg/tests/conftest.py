"""Pytest path setup; shared helpers live in util.py next to this file."""
