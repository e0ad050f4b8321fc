# Hydra-CP: domain-aware hybrid collaborative perception

__version__ = "1.0.0"
