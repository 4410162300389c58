"""Bundled illustrative appliance models, turn-on samples, and a sample tariff."""
