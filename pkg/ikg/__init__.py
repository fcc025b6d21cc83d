# iKG sampling policies, rate analysis and simulation harness

__version__ = "1.0.0"
