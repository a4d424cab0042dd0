"""Doors-keys-gems gridworld with a conversational-norm oracle and LLM evaluation harness."""
__version__ = "0.1.0"
