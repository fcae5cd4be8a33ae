"""
API Services for the Key Management Server
"""
