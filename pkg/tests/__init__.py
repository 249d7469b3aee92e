"""
Unit tests for gait-auth-service
"""
