"""
Core services for multHP
"""
