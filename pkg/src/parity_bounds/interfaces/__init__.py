"""Interfaces layer initialization."""
