"""
Shared helpers: JSON-lines files, logging and run manifests
"""
