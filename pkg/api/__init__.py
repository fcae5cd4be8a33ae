"""
Key Management Server API
"""
__version__ = "1.0.0"
