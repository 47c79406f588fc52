"""Hypernetwork normal forms of weakly coupled Hopf oscillator networks."""
__version__ = "0.1.0"
