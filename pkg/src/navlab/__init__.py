"""
ObjectNav BC → RL finetuning lab
"""

__version__ = "0.1.0"
