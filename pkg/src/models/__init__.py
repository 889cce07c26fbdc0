"""
Data models and errors for multHP
"""
