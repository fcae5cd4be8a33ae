"""
API Models for the Key Management Server
"""
