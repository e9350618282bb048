"""
Test initialization
"""
