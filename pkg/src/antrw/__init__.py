"""Directed-edge-reinforced random walk ("Ant RW") simulation and verification."""
