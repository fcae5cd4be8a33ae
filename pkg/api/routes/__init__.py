"""
API Routes for the Key Management Server
"""
