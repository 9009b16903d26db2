"""Headless crowd-robot navigation benchmark."""
