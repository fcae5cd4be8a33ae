"""
API Middleware for the Key Management Server
"""
