"""
multHP - pre-retrieval performance prediction for multi-hop questions
"""

__version__ = "1.0.0"
__author__ = "multHP Team"
__description__ = "Retrieval-path based difficulty estimation for multi-hop question answering"
